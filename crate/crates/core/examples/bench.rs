//! A small regret experiment: medians and fitted exponents per algorithm.

use oslo_lqr::bench::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
name = "example"
algorithms = ["optimal", "fixed_k0", "oslo_with_warmup"]
horizons = [1024, 2048, 4096, 8192]
seeds = { start = 0, count = 8 }
fallback_on_sdp_failure = true

[practical]
admissible_lambda = true

[instance]
kind = "golden"

[k0]
gain = -0.3
"#;

fn main() -> oslo_lqr::Result<()> {
    let res = run_experiment(&ExperimentConfig::from_toml(CONFIG)?)?;
    for a in &res.aggregates {
        println!(
            "{:<18} T = {:>5}: median regret {:>9.1}",
            a.algorithm.as_str(),
            a.horizon,
            a.median.unwrap_or(f64::NAN)
        );
    }
    for e in &res.exponents {
        match &e.median_fit {
            Some(f) => println!("{:<18} exponent {:.3}", e.algorithm.as_str(), f.slope),
            None => println!(
                "{:<18} no fit: {}",
                e.algorithm.as_str(),
                e.note.as_deref().unwrap_or("")
            ),
        }
    }
    Ok(())
}
