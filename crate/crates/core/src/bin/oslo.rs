use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use oslo_lqr::bench::{self, output, ExperimentConfig, InstanceSpec, OutputFormat};
use oslo_lqr::linalg::Vector;
use oslo_lqr::oslo::{good_event_monitor, ConstantsMode};
use oslo_lqr::riccati::{solve_dare, strong_stability_certificate};
use oslo_lqr::sdp::{
    build_exact_sdp, extract_policy, solve_sdp, DEFAULT_MAX_ITERS, DEFAULT_PINV_THRESHOLD,
    DEFAULT_TOL,
};
use oslo_lqr::system::{cumulative_regret, rollout};
use oslo_lqr::warmup::{self, WarmupConfig};
use oslo_lqr::{Error, LqrInstance, SimRng};

#[derive(Parser)]
#[command(
    name = "oslo",
    version,
    about = "Optimistic adaptive LQR control: solvers, simulation and regret experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log progress at debug level.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Args)]
struct Common {
    /// TOML file; instance-only commands read its `[instance]` table.
    #[arg(long)]
    config: PathBuf,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Constants {
    Theory,
    Practical,
}

impl From<Constants> for ConstantsMode {
    fn from(c: Constants) -> Self {
        match c {
            Constants::Theory => ConstantsMode::Theory,
            Constants::Practical => ConstantsMode::Practical,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimPolicy {
    Optimal,
    K0,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Riccati equation of the configured instance.
    SolveDare(Common),
    /// Solve the exact covariance SDP of the configured instance.
    SolveSdp(Common),
    /// Roll out a fixed policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = SimPolicy::Optimal)]
        policy: SimPolicy,
    },
    /// Run the exploration phase and check its guarantees.
    Warmup {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Horizon used to size the warm-up; defaults to the largest configured one.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// One learner run with good-event diagnostics.
    RunOslo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, value_enum)]
        constants: Option<Constants>,
        /// Start with a warm-up phase driven by the configured K₀.
        #[arg(long)]
        warm_start: bool,
    },
    /// Run a multi-seed experiment.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, value_enum)]
        constants: Option<Constants>,
        /// Replace the configured seeds by `seed..seed+count`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the regret exponent of a bench JSON result or a `T,regret` CSV.
    Fit {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Io { .. }
        | Error::Json(_)
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. } => 2,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_instance(path: &Path) -> Result<LqrInstance, Error> {
    let table: toml::Table =
        toml::from_str(&read(path)?).map_err(|e| Error::Config(e.to_string()))?;
    let spec = table
        .get("instance")
        .cloned()
        .ok_or_else(|| Error::Config(format!("{} has no [instance] table", path.display())))?;
    let spec: InstanceSpec = spec
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    spec.build()
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(&s, out)
}

fn csv_only(format: Format, what: &str) -> Result<(), Error> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(Error::Config(format!("{what} only supports --format json"))),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::SolveDare(c) => {
            csv_only(c.format, "solve-dare")?;
            let inst = load_instance(&c.config)?;
            emit_json(&solve_dare(&inst, 1e-12)?, c.out.as_deref())?;
        }
        Command::SolveSdp(c) => {
            csv_only(c.format, "solve-sdp")?;
            let inst = load_instance(&c.config)?;
            let sol = solve_sdp(&build_exact_sdp(&inst), DEFAULT_TOL, DEFAULT_MAX_ITERS)?
                .require_optimal()?;
            let k = extract_policy(&sol, DEFAULT_PINV_THRESHOLD)?;
            emit_json(
                &json!({ "solution": sol, "policy": k.policy, "degenerate": k.degenerate }),
                c.out.as_deref(),
            )?;
        }
        Command::Simulate {
            common: c,
            seed,
            horizon,
            policy,
        } => {
            let inst = load_instance(&c.config)?;
            let ric = solve_dare(&inst, 1e-12)?;
            let mut pol = match policy {
                SimPolicy::Optimal => ric.policy(),
                SimPolicy::K0 => ExperimentConfig::load(&c.config)?
                    .k0
                    .ok_or_else(|| Error::Config("no [k0] section".into()))?
                    .build(&inst)?,
            };
            let mut rng = SimRng::new(seed);
            let traj = rollout(
                &inst,
                &mut pol,
                horizon,
                &Vector::zeros(inst.dims().d),
                &mut rng,
            )?;
            let regret = cumulative_regret(&traj.costs, ric.j_star);
            match c.format {
                Format::Json => emit_json(
                    &json!({ "j_star": ric.j_star, "trajectory": traj, "regret": regret }),
                    c.out.as_deref(),
                )?,
                Format::Csv => {
                    let mut s = String::from("t,x,u,cost,cum_regret\n");
                    for t in 0..traj.len() {
                        let join = |v: &Vector| {
                            v.iter()
                                .map(|x| format!("{x:?}"))
                                .collect::<Vec<_>>()
                                .join(";")
                        };
                        s.push_str(&format!(
                            "{},{},{},{:?},{:?}\n",
                            t + 1,
                            join(&traj.states[t]),
                            join(&traj.actions[t]),
                            traj.costs[t],
                            regret[t]
                        ));
                    }
                    emit(&s, c.out.as_deref())?;
                }
            }
        }
        Command::Warmup {
            common: c,
            seed,
            horizon,
        } => {
            csv_only(c.format, "warmup")?;
            let cfg = ExperimentConfig::load(&c.config)?;
            let inst = cfg.instance.build()?;
            let k0 = cfg
                .k0
                .as_ref()
                .ok_or_else(|| Error::Config("no [k0] section".into()))?
                .build(&inst)?;
            let horizon = horizon.unwrap_or(*cfg.horizons.last().expect("validated"));
            let t0 = cfg.warmup_length(&inst, horizon)?;
            let cert = strong_stability_certificate(&inst, &k0, None)?;
            let warm = WarmupConfig::from_certificate(k0, &cert, t0, inst.bounds.sigma)?;
            let res = warmup::run_warmup(&inst, &warm, SimRng::new(seed))?;
            let report = warmup::warmup_guarantee_check(&res, &inst, &warm, cfg.delta);
            emit_json(
                &json!({
                    "t0": t0,
                    "a0_b0": res.a0_b0.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
                    "trace_v0": res.trace_v0,
                    "min_eig_v0": res.min_eig_v0,
                    "report": report,
                }),
                c.out.as_deref(),
            )?;
        }
        Command::RunOslo {
            common: c,
            seed,
            horizon,
            constants,
            warm_start,
        } => {
            let mut cfg = ExperimentConfig::load(&c.config)?;
            if let Some(m) = constants {
                cfg.constants = m.into();
                cfg.validate()?;
            }
            let inst = cfg.instance.build()?;
            let horizon = horizon.unwrap_or(*cfg.horizons.last().expect("validated"));
            let ocfg = cfg.oslo_config(&inst, horizon)?;
            let rng = SimRng::new(seed);
            let (record, regret, t0) = if warm_start {
                let k0 = cfg
                    .k0
                    .as_ref()
                    .ok_or_else(|| Error::Config("no [k0] section".into()))?
                    .build(&inst)?;
                let cert = strong_stability_certificate(&inst, &k0, None)?;
                let t0 = cfg.warmup_length(&inst, horizon)?;
                let warm = WarmupConfig::from_certificate(k0, &cert, t0, inst.bounds.sigma)?;
                let run = warmup::run_with_warmup(
                    &inst,
                    &warm,
                    &ocfg,
                    &mut oslo_lqr::oslo::OptimisticSdp,
                    rng,
                )?;
                (run.learner, run.total_regret, Some(t0))
            } else {
                let run =
                    oslo_lqr::oslo::run_oslo(&inst, &ocfg, &Vector::zeros(inst.dims().d), rng)?;
                let regret = run.regret.clone();
                (run, regret, None)
            };
            let flags = good_event_monitor(&record, &inst);
            match c.format {
                Format::Json => emit_json(
                    &json!({
                        "warmup_length": t0,
                        "mu": ocfg.mu,
                        "lambda": ocfg.lambda,
                        "beta": ocfg.beta,
                        "j_star": record.j_star,
                        "epochs": record.epoch_starts(),
                        "halted": record.halted,
                        "good_event_survived": flags.survived(),
                        "good_event_first_failure": flags.first_failure(),
                        "final_regret": regret.last(),
                        "record": record,
                    }),
                    c.out.as_deref(),
                )?,
                Format::Csv => {
                    let mut s = String::from("t,cum_regret\n");
                    for (i, r) in regret.iter().enumerate() {
                        s.push_str(&format!("{},{:?}\n", i + 1, r));
                    }
                    emit(&s, c.out.as_deref())?;
                }
            }
            if record.halted.is_some() {
                return Ok(1);
            }
        }
        Command::Bench {
            config,
            out,
            format,
            constants,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(m) = constants {
                cfg.constants = m.into();
            }
            if let Some(s) = seed {
                let count = cfg.seeds.seeds().len() as u64;
                cfg.seeds = bench::SeedSpec::Range { start: s, count };
            }
            let res = bench::run_experiment(&cfg)?;
            match (out, format) {
                (Some(p), f) => {
                    let f = match f.unwrap_or(Format::Csv) {
                        Format::Csv => OutputFormat::Csv,
                        Format::Json => OutputFormat::Json,
                    };
                    output::write_output(&res, &p, f)?;
                }
                (None, f) => {
                    output::emit_outputs(&res)?;
                    let nothing_written =
                        res.config.output.csv.is_none() && res.config.output.json.is_none();
                    if nothing_written || f.is_some() {
                        let f = match f.unwrap_or(Format::Csv) {
                            Format::Csv => OutputFormat::Csv,
                            Format::Json => OutputFormat::Json,
                        };
                        emit(&output::render(&res, f)?, None)?;
                    }
                }
            }
            for e in &res.exponents {
                match (&e.median_fit, &e.note) {
                    (Some(f), _) => log::info!(
                        "{}: exponent {:.3} (r² {:.3})",
                        e.algorithm,
                        f.slope,
                        f.r_squared
                    ),
                    (None, Some(n)) => log::info!("{}: no fit ({n})", e.algorithm),
                    _ => {}
                }
            }
            if res.failed_cells() > 0 {
                eprintln!("{} of {} cells failed", res.failed_cells(), res.cells.len());
                return Ok(1);
            }
        }
        Command::Fit { input, format } => {
            csv_only(format, "fit")?;
            let text = read(&input)?;
            let fits = if text.trim_start().starts_with('{') {
                let res = output::from_json(&text)?;
                serde_json::to_value(&res.exponents)?
            } else {
                let mut pts = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let mut it = line.split(',').map(str::trim);
                    let (Some(a), Some(b)) = (it.next(), it.next()) else {
                        continue;
                    };
                    match (a.parse::<f64>(), b.parse::<f64>()) {
                        (Ok(t), Ok(r)) => pts.push((t, r)),
                        // header rows
                        _ if i == 0 => {}
                        _ => {
                            return Err(Error::Config(format!(
                                "{}:{}: expected `T,regret`",
                                input.display(),
                                i + 1
                            )))
                        }
                    }
                }
                serde_json::to_value(bench::fit_regret_exponent(&pts)?)?
            };
            emit_json(&fits, None)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
