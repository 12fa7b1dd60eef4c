//! Multi-seed regret experiments.
//!
//! An [`ExperimentConfig`] (TOML, unknown keys rejected) names an instance,
//! a list of algorithms, horizons and seeds. Every `(algorithm, T, seed)`
//! cell runs independently on the rayon pool; results are sorted by key
//! before aggregation, so thread count never changes the output.

pub mod fit;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::oslo::{
    self, good_event_monitor, ConstantsMode, OptimisticSdp, OsloConfig, PracticalMultipliers,
    RunRecord,
};
use crate::riccati::{solve_dare, strong_stability_certificate};
use crate::rng::SimRng;
use crate::system::{
    cumulative_regret, random_instance_with, rollout, BoundParams, Dims, LqrInstance, Policy,
    RandomInstanceOptions,
};
use crate::warmup::{self, WarmupConfig};

pub use fit::{fit_regret_exponent, mean_and_stderr, median, quantile, ExponentFit};
pub use output::{emit_outputs, OutputFormat};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "OSLO_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Oslo,
    OsloWithWarmup,
    Optimal,
    FixedK0,
    CertaintyEquivalence,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Oslo => "oslo",
            Algorithm::OsloWithWarmup => "oslo_with_warmup",
            Algorithm::Optimal => "optimal",
            Algorithm::FixedK0 => "fixed_k0",
            Algorithm::CertaintyEquivalence => "certainty_equivalence",
        }
    }

    fn is_learner(self) -> bool {
        matches!(
            self,
            Algorithm::Oslo | Algorithm::OsloWithWarmup | Algorithm::CertaintyEquivalence
        )
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    /// `A = B = Q = R = W = 1`.
    Golden {},
    Scalar {
        a: f64,
        b: f64,
        q: f64,
        r: f64,
        w: f64,
    },
    Explicit {
        #[serde(with = "crate::serde_mat::flexible")]
        a: Mat,
        #[serde(with = "crate::serde_mat::flexible")]
        b: Mat,
        #[serde(with = "crate::serde_mat::flexible")]
        q: Mat,
        #[serde(with = "crate::serde_mat::flexible")]
        r: Mat,
        #[serde(with = "crate::serde_mat::flexible")]
        w: Mat,
        /// Tight bounds are derived when omitted.
        #[serde(default)]
        bounds: Option<BoundParams>,
    },
    Random {
        d: usize,
        k: usize,
        seed: u64,
        bounds: BoundParams,
        #[serde(default)]
        options: RandomInstanceOptions,
    },
}

impl InstanceSpec {
    pub fn build(&self) -> Result<LqrInstance> {
        match self {
            InstanceSpec::Golden {} => Ok(LqrInstance::golden()),
            InstanceSpec::Scalar { a, b, q, r, w } => LqrInstance::scalar(*a, *b, *q, *r, *w),
            InstanceSpec::Explicit {
                a,
                b,
                q,
                r,
                w,
                bounds,
            } => match bounds {
                Some(bp) => {
                    LqrInstance::new(a.clone(), b.clone(), q.clone(), r.clone(), w.clone(), *bp)
                }
                None => LqrInstance::with_tight_bounds(
                    a.clone(),
                    b.clone(),
                    q.clone(),
                    r.clone(),
                    w.clone(),
                ),
            },
            InstanceSpec::Random {
                d,
                k,
                seed,
                bounds,
                options,
            } => {
                let mut rng = SimRng::new(*seed);
                random_instance_with(Dims::new(*d, *k)?, *bounds, *options, &mut rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorName {
    Truth,
    Zero,
}

/// Initial estimate `(A₀ B₀)` for runs without a warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Named(PriorName),
    Matrix(#[serde(with = "crate::serde_mat::flexible")] Mat),
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Named(PriorName::Zero)
    }
}

impl PriorSpec {
    pub fn build(&self, inst: &LqrInstance) -> Mat {
        match self {
            PriorSpec::Named(PriorName::Truth) => inst.theta(),
            PriorSpec::Named(PriorName::Zero) => Mat::zeros(inst.dims().d, inst.dims().n()),
            PriorSpec::Matrix(m) => m.clone(),
        }
    }
}

/// The known stabilizing policy: an explicit gain, or the Riccati gain of the
/// instance with `R` scaled by `r_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct K0Spec {
    #[serde(default, with = "crate::serde_mat::opt_mat")]
    pub gain: Option<Mat>,
    #[serde(default)]
    pub r_scale: Option<f64>,
}

impl K0Spec {
    pub fn build(&self, inst: &LqrInstance) -> Result<Policy> {
        match (&self.gain, self.r_scale) {
            (Some(g), None) => Policy::new(g.clone()),
            (None, Some(s)) if s > 0.0 => {
                let mut scaled = inst.clone();
                scaled.r *= s;
                Ok(solve_dare(&scaled, 1e-12)?.policy())
            }
            _ => Err(Error::Config(
                "k0 needs exactly one of `gain` or a positive `r_scale`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarmupSpec {
    /// Fixed length; otherwise derived from the horizon.
    pub t0: Option<usize>,
    /// Multiplier on `√(T log²(T/δ))` in practical mode, or on the full
    /// bound-dependent length in theory mode.
    pub constant: f64,
}

impl Default for WarmupSpec {
    fn default() -> Self {
        WarmupSpec {
            t0: None,
            constant: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub pinv_threshold: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings {
            tol: crate::sdp::DEFAULT_TOL,
            max_iters: crate::sdp::DEFAULT_MAX_ITERS,
            pinv_threshold: crate::sdp::DEFAULT_PINV_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Record per-cell wall time. Off gives byte-identical reruns.
    pub wall_clock: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            csv: None,
            json: None,
            wall_clock: true,
        }
    }
}

fn default_delta() -> f64 {
    0.1
}

fn default_mode() -> ConstantsMode {
    ConstantsMode::Practical
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub instance: InstanceSpec,
    pub algorithms: Vec<Algorithm>,
    pub horizons: Vec<usize>,
    pub seeds: SeedSpec,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_mode")]
    pub constants: ConstantsMode,
    #[serde(default)]
    pub practical: PracticalMultipliers,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub k0: Option<K0Spec>,
    #[serde(default)]
    pub warmup: WarmupSpec,
    #[serde(default)]
    pub sdp: SdpSettings,
    #[serde(default)]
    pub fallback_on_sdp_failure: bool,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        if self.horizons.is_empty() || self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "horizons must be nonempty and strictly increasing".into(),
            ));
        }
        if self.horizons[0] < 2 {
            return Err(Error::Config("horizons must be at least 2".into()));
        }
        if self.seeds.seeds().is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        let needs_k0 = self
            .algorithms
            .iter()
            .any(|a| matches!(a, Algorithm::FixedK0 | Algorithm::OsloWithWarmup));
        if needs_k0 && self.k0.is_none() {
            return Err(Error::Config(
                "fixed_k0 and oslo_with_warmup need a [k0] section".into(),
            ));
        }
        if self.constants == ConstantsMode::Theory && self.overrides != Overrides::default() {
            return Err(Error::Config(
                "overrides are only accepted with practical constants".into(),
            ));
        }
        if !(self.warmup.constant > 0.0) {
            return Err(Error::Config("warmup.constant must be positive".into()));
        }
        Ok(())
    }

    /// Learner configuration for one horizon.
    pub fn oslo_config(&self, inst: &LqrInstance, horizon: usize) -> Result<OsloConfig> {
        let known = inst.known();
        let prior = self.prior.build(inst);
        let mut cfg = match self.constants {
            ConstantsMode::Theory => OsloConfig::theory(&known, horizon, self.delta, prior)?,
            ConstantsMode::Practical => {
                OsloConfig::practical(&known, horizon, self.delta, prior, self.practical)?
            }
        };
        if let Some(mu) = self.overrides.mu {
            cfg = cfg.with_mu(mu);
        }
        if let Some(lambda) = self.overrides.lambda {
            cfg = cfg.with_lambda(lambda);
        }
        if let Some(beta) = self.overrides.beta {
            cfg = cfg.with_beta(beta);
        }
        cfg.sdp_tol = self.sdp.tol;
        cfg.sdp_max_iters = self.sdp.max_iters;
        cfg.pinv_threshold = self.sdp.pinv_threshold;
        cfg.fallback_on_sdp_failure =
            self.fallback_on_sdp_failure && self.constants == ConstantsMode::Practical;
        cfg.validate(inst.dims())?;
        Ok(cfg)
    }

    /// Warm-up length for one horizon.
    pub fn warmup_length(&self, inst: &LqrInstance, horizon: usize) -> Result<usize> {
        if let Some(t0) = self.warmup.t0 {
            return Ok(t0);
        }
        match self.constants {
            ConstantsMode::Theory => warmup::warmup_length_with(
                &inst.bounds,
                inst.dims(),
                horizon,
                self.delta,
                self.warmup.constant,
            ),
            ConstantsMode::Practical => {
                let t = horizon as f64;
                Ok(
                    (self.warmup.constant * (t * (t / self.delta).ln().powi(2)).sqrt()).ceil()
                        as usize,
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: usize,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// `R_T`; absent when the cell failed or stopped early.
    pub final_regret: Option<f64>,
    pub epoch_count: usize,
    /// Good event held to the end (learners only).
    pub good_event_ok: Option<bool>,
    /// First round at which the good event failed.
    pub good_event_failure_step: Option<usize>,
    pub warmup_length: Option<usize>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

impl CellResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Dyadic rounds `1, 2, 4, …` up to `horizon`, plus `horizon` itself.
pub fn dyadic_checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |t| t.checked_mul(2))
        .take_while(|&t| t <= horizon)
        .collect();
    if out.last() != Some(&horizon) && horizon > 0 {
        out.push(horizon);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub runs: usize,
    pub failures: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub algorithm: Algorithm,
    /// Fit through the per-horizon medians.
    pub median_fit: Option<ExponentFit>,
    /// Exponents fitted through the lower and upper quartiles.
    pub band: Option<(f64, f64)>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub version: String,
    pub config: ExperimentConfig,
    pub instance: LqrInstance,
    pub j_star: f64,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
    pub exponents: Vec<ExponentSummary>,
}

impl ExperimentResult {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.failed()).count()
    }

    pub fn exponent(&self, algorithm: Algorithm) -> Option<&ExponentSummary> {
        self.exponents.iter().find(|e| e.algorithm == algorithm)
    }

    pub fn aggregate(&self, algorithm: Algorithm, horizon: usize) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.algorithm == algorithm && a.horizon == horizon)
    }
}

/// Shared, read-only inputs of every cell.
struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    inst: LqrInstance,
    j_star: f64,
    k_star: Policy,
    k0: Option<Policy>,
}

fn checkpoints_of(regret: &[f64], horizon: usize) -> Vec<Checkpoint> {
    dyadic_checkpoints(horizon)
        .into_iter()
        .filter(|&t| t <= regret.len())
        .map(|t| Checkpoint {
            t,
            cum_regret: regret[t - 1],
        })
        .collect()
}

fn learner_summary(
    run: &RunRecord,
    inst: &LqrInstance,
) -> (usize, Option<bool>, Option<usize>, Option<String>) {
    let flags = good_event_monitor(run, inst);
    (
        run.epochs.len(),
        Some(flags.survived()),
        flags.first_failure(),
        run.halted.clone(),
    )
}

fn run_cell(setup: &Setup<'_>, algorithm: Algorithm, horizon: usize, seed: u64) -> CellResult {
    let started = Instant::now();
    let mut cell = CellResult {
        algorithm,
        horizon,
        seed,
        checkpoints: Vec::new(),
        final_regret: None,
        epoch_count: 0,
        good_event_ok: None,
        good_event_failure_step: None,
        warmup_length: None,
        wall_ms: 0,
        error: None,
    };
    let outcome = run_cell_inner(setup, algorithm, horizon, seed, &mut cell);
    if let Err(e) = outcome {
        cell.error = Some(e.to_string());
    }
    if setup.cfg.output.wall_clock {
        cell.wall_ms = started.elapsed().as_millis() as u64;
    }
    cell
}

fn run_cell_inner(
    setup: &Setup<'_>,
    algorithm: Algorithm,
    horizon: usize,
    seed: u64,
    cell: &mut CellResult,
) -> Result<()> {
    let inst = &setup.inst;
    let rng = SimRng::new(seed);
    let x1 = Vector::zeros(inst.dims().d);
    let regret = match algorithm {
        Algorithm::Optimal | Algorithm::FixedK0 => {
            let mut policy = match algorithm {
                Algorithm::Optimal => setup.k_star.clone(),
                _ => setup.k0.clone().expect("validated"),
            };
            let mut rng = rng;
            let traj = rollout(inst, &mut policy, horizon, &x1, &mut rng)?;
            cumulative_regret(&traj.costs, setup.j_star)
        }
        Algorithm::Oslo | Algorithm::CertaintyEquivalence => {
            let cfg = setup.cfg.oslo_config(inst, horizon)?;
            let run = if algorithm == Algorithm::Oslo {
                oslo::run_oslo(inst, &cfg, &x1, rng)?
            } else {
                oslo::certainty_equivalence_baseline(inst, &cfg, &x1, rng)?
            };
            let (epochs, ok, step, halted) = learner_summary(&run, inst);
            cell.epoch_count = epochs;
            cell.good_event_ok = ok;
            cell.good_event_failure_step = step;
            cell.error = halted;
            run.regret
        }
        Algorithm::OsloWithWarmup => {
            let cfg = setup.cfg.oslo_config(inst, horizon)?;
            let k0 = setup.k0.clone().expect("validated");
            let cert = strong_stability_certificate(inst, &k0, None)?;
            let t0 = setup.cfg.warmup_length(inst, horizon)?;
            let warm = WarmupConfig::from_certificate(k0, &cert, t0, inst.bounds.sigma)?;
            cell.warmup_length = Some(t0);
            let run = warmup::run_with_warmup(inst, &warm, &cfg, &mut OptimisticSdp, rng)?;
            let (epochs, ok, step, halted) = learner_summary(&run.learner, inst);
            cell.epoch_count = epochs;
            cell.good_event_ok = ok;
            cell.good_event_failure_step = step.map(|s| s + t0);
            cell.error = halted;
            run.total_regret
        }
    };
    cell.checkpoints = checkpoints_of(&regret, horizon);
    if regret.len() == horizon && cell.error.is_none() {
        cell.final_regret = regret.last().copied();
    }
    Ok(())
}

fn aggregate(
    cfg: &ExperimentConfig,
    cells: &[CellResult],
) -> (Vec<Aggregate>, Vec<ExponentSummary>) {
    let mut aggs = Vec::new();
    let mut exps = Vec::new();
    let mut algorithms = cfg.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();
    for &alg in &algorithms {
        let mut med_pts = Vec::new();
        let mut q1_pts = Vec::new();
        let mut q3_pts = Vec::new();
        for &t in &cfg.horizons {
            let rows: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.algorithm == alg && c.horizon == t)
                .collect();
            let finals: Vec<f64> = rows.iter().filter_map(|c| c.final_regret).collect();
            let agg = Aggregate {
                algorithm: alg,
                horizon: t,
                runs: rows.len(),
                failures: rows.iter().filter(|c| c.final_regret.is_none()).count(),
                median: median(&finals),
                q1: quantile(&finals, 0.25),
                q3: quantile(&finals, 0.75),
            };
            if let (Some(m), Some(a), Some(b)) = (agg.median, agg.q1, agg.q3) {
                med_pts.push((t as f64, m));
                q1_pts.push((t as f64, a));
                q3_pts.push((t as f64, b));
            }
            aggs.push(agg);
        }
        let (median_fit, note) = match fit_regret_exponent(&med_pts) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let band = match (fit_regret_exponent(&q1_pts), fit_regret_exponent(&q3_pts)) {
            (Ok(a), Ok(b)) => Some((a.slope.min(b.slope), a.slope.max(b.slope))),
            _ => None,
        };
        exps.push(ExponentSummary {
            algorithm: alg,
            median_fit,
            band,
            note,
        });
    }
    (aggs, exps)
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Run every cell. Only configuration problems are errors; cell failures are
/// recorded in the result.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let inst = cfg.instance.build()?;
    let ric = solve_dare(&inst, 1e-12)?;
    let k0 = cfg.k0.as_ref().map(|k| k.build(&inst)).transpose()?;
    if let Some(k0) = &k0 {
        if k0.k_mat.shape() != (inst.dims().k, inst.dims().d) {
            return Err(Error::Config(format!(
                "k0 has shape {:?}",
                k0.k_mat.shape()
            )));
        }
    }
    // surface learner configuration errors before any work starts
    if cfg.algorithms.iter().any(|a| a.is_learner()) {
        for &t in &cfg.horizons {
            cfg.oslo_config(&inst, t)?;
        }
    }
    let setup = Setup {
        cfg,
        j_star: ric.j_star,
        k_star: ric.policy(),
        k0,
        inst,
    };
    let mut keys: Vec<(Algorithm, usize, u64)> = Vec::new();
    for &a in &cfg.algorithms {
        for &t in &cfg.horizons {
            for s in cfg.seeds.seeds() {
                keys.push((a, t, s));
            }
        }
    }
    keys.sort();
    keys.dedup();
    let work = || {
        keys.par_iter()
            .map(|&(a, t, s)| run_cell(&setup, a, t, s))
            .collect::<Vec<_>>()
    };
    let mut cells = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    cells.sort_by_key(|c| (c.algorithm, c.horizon, c.seed));
    for c in cells.iter().filter(|c| c.failed()) {
        log::warn!(
            "cell {} T={} seed={} failed: {}",
            c.algorithm,
            c.horizon,
            c.seed,
            c.error.as_deref().unwrap_or("")
        );
    }
    let (aggregates, exponents) = aggregate(cfg, &cells);
    Ok(ExperimentResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        instance: setup.inst,
        j_star: setup.j_star,
        cells,
        aggregates,
        exponents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
name = "small"
algorithms = ["optimal", "fixed_k0", "oslo"]
horizons = [64, 128, 256]
seeds = { start = 0, count = 3 }
prior = "truth"

[instance]
kind = "golden"

[k0]
gain = [[-0.3]]

[output]
wall_clock = false
"#;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        assert_eq!(cfg.seeds.seeds(), vec![0, 1, 2]);
        assert_eq!(cfg.prior, PriorSpec::Named(PriorName::Truth));
        let bad = SMALL.replace("prior = \"truth\"", "priors = \"truth\"");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(Error::Config(_))
        ));
        let bad = SMALL.replace("kind = \"golden\"", "kind = \"golden\"\nextra = 1");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn validation() {
        let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        assert!(ExperimentConfig {
            horizons: vec![128, 64],
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            seeds: SeedSpec::List(vec![]),
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            k0: None,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        let theory = ExperimentConfig {
            constants: ConstantsMode::Theory,
            overrides: Overrides {
                mu: Some(2.0),
                ..Default::default()
            },
            ..cfg
        };
        assert!(theory.validate().is_err());
    }

    #[test]
    fn checkpoints() {
        assert_eq!(dyadic_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(dyadic_checkpoints(8), vec![1, 2, 4, 8]);
        assert_eq!(dyadic_checkpoints(1), vec![1]);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 27);
        assert_eq!(a.failed_cells(), 0);
        let fixed = a.aggregate(Algorithm::FixedK0, 256).unwrap();
        assert_eq!(fixed.runs, 3);
        assert!(a
            .cells
            .windows(2)
            .all(|w| (w[0].algorithm, w[0].horizon, w[0].seed)
                < (w[1].algorithm, w[1].horizon, w[1].seed)));
    }

    #[test]
    fn optimal_and_fixed_share_noise() {
        let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        let res = run_experiment(&cfg).unwrap();
        let opt = res
            .cells
            .iter()
            .find(|c| c.algorithm == Algorithm::Optimal && c.horizon == 64)
            .unwrap();
        assert_eq!(opt.checkpoints.last().unwrap().t, 64);
        assert!(opt.good_event_ok.is_none());
    }
}
