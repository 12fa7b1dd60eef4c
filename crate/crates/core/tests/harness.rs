//! Experiment harness end to end, through the library and the `oslo` binary.

use std::path::Path;
use std::process::Command;

use oslo_lqr::bench::{output, run_experiment, Algorithm, ExperimentConfig};

const BIN: &str = env!("CARGO_BIN_EXE_oslo");

const CONFIG: &str = r#"
name = "harness"
algorithms = ["optimal", "fixed_k0", "oslo_with_warmup"]
horizons = [256, 1024]
seeds = { start = 0, count = 3 }
prior = "truth"
fallback_on_sdp_failure = true

[practical]
admissible_lambda = true

[instance]
kind = "golden"

[k0]
gain = -0.3

[output]
wall_clock = false
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn oslo(args: &[&str], threads: Option<&str>) -> std::process::Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("OSLO_THREADS", t);
    }
    cmd.output().unwrap()
}

#[test]
fn bench_csv_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", CONFIG);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let out = oslo(
        &[
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            a.to_str().unwrap(),
        ],
        Some("1"),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = oslo(
        &[
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ],
        Some("4"),
    );
    assert!(out.status.success());
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "algorithm,T,seed,checkpoint_t,cum_regret,epoch_count,good_event_ok,wall_ms\n"
    ));
    assert!(text.ends_with('\n'));
    // 3 algorithms x 3 seeds x (9 + 11 checkpoints) + header
    assert_eq!(text.lines().count(), 1 + 3 * 3 * (9 + 11));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        &CONFIG.replace("prior = \"truth\"", "priorr = \"truth\""),
    );
    let out = oslo(&["bench", "--config", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("priorr"));
    let out = oslo(
        &[
            "bench",
            "--config",
            dir.path().join("missing.toml").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}

#[test]
fn failed_cells_are_isolated_and_exit_with_one() {
    // a 300-round warm-up cannot fit in a 256-round horizon
    let text = CONFIG.replace("[practical]", "[warmup]\nt0 = 300\n\n[practical]");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let res = run_experiment(&cfg).unwrap();
    let failed: Vec<_> = res.cells.iter().filter(|c| c.failed()).collect();
    assert_eq!(failed.len(), 3);
    assert!(failed
        .iter()
        .all(|c| c.algorithm == Algorithm::OsloWithWarmup && c.horizon == 256));

    let clean = ExperimentConfig::from_toml(
        &CONFIG
            .replace("horizons = [256, 1024]", "horizons = [1024]")
            .replace("[practical]", "[warmup]\nt0 = 300\n\n[practical]"),
    )
    .unwrap();
    let reference = run_experiment(&clean).unwrap();
    for c in reference.cells {
        let same = res
            .cells
            .iter()
            .find(|r| (r.algorithm, r.horizon, r.seed) == (c.algorithm, c.horizon, c.seed))
            .unwrap();
        assert_eq!(same, &c);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "cfg.toml", &text);
    let out = oslo(
        &[
            "bench",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.path().join("o.csv").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_output_round_trips_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", CONFIG);
    let json = dir.path().join("r.json");
    let out = oslo(
        &[
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--format",
            "json",
            "--out",
            json.to_str().unwrap(),
        ],
        None,
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(&json).unwrap();
    let parsed = output::from_json(&text).unwrap();
    let direct = run_experiment(&ExperimentConfig::from_toml(CONFIG).unwrap()).unwrap();
    assert_eq!(parsed, direct);
    assert_eq!(parsed.version, env!("CARGO_PKG_VERSION"));

    let out = oslo(&["fit", json.to_str().unwrap()], None);
    assert!(out.status.success());
    let fits: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(fits.as_array().unwrap().len(), 3);
}

#[test]
fn solver_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", CONFIG);
    let out = oslo(&["solve-dare", "--config", cfg.to_str().unwrap()], None);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["j_star"].as_f64().unwrap() - 1.618_033_988_749_895).abs() < 1e-9);

    let out = oslo(&["solve-sdp", "--config", cfg.to_str().unwrap()], None);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["solution"]["value"].as_f64().unwrap() - 1.618_033_988_749_895).abs() < 1e-6);

    let out = oslo(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--horizon",
            "10",
            "--format",
            "csv",
        ],
        None,
    );
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 11);

    let out = oslo(
        &[
            "warmup",
            "--config",
            cfg.to_str().unwrap(),
            "--horizon",
            "4096",
        ],
        None,
    );
    assert!(out.status.success());

    let out = oslo(
        &[
            "run-oslo",
            "--config",
            cfg.to_str().unwrap(),
            "--horizon",
            "256",
            "--format",
            "csv",
            "--constants",
            "practical",
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 257);
}
