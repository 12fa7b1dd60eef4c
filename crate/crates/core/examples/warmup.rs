//! Warm-up exploration with a known stabilizing gain, then OSLO from its
//! estimate.

use oslo_lqr::oslo::{OptimisticSdp, OsloConfig, PracticalMultipliers};
use oslo_lqr::riccati::strong_stability_certificate;
use oslo_lqr::warmup::{run_warmup, run_with_warmup, warmup_guarantee_check, WarmupConfig};
use oslo_lqr::{LqrInstance, Policy, SimRng};

fn main() -> oslo_lqr::Result<()> {
    let inst = LqrInstance::golden();
    let k0 = Policy::scalar(-0.3);
    let cert = strong_stability_certificate(&inst, &k0, None)?;
    let warm = WarmupConfig::from_certificate(k0, &cert, 2000, inst.bounds.sigma)?;

    let res = run_warmup(&inst, &warm, SimRng::new(5))?;
    let report = warmup_guarantee_check(&res, &inst, &warm, 0.1);
    println!(
        "(A0, B0) = ({:.4}, {:.4}), min eig V0 = {:.1}",
        res.a0_b0[(0, 0)],
        res.a0_b0[(0, 1)],
        res.min_eig_v0
    );
    println!("all warm-up bounds hold: {}", report.all_ok());

    let mult = PracticalMultipliers {
        admissible_lambda: true,
        ..Default::default()
    };
    let cfg = OsloConfig::practical(&inst.known(), 16_384, 0.1, inst.theta(), mult)?;
    let run = run_with_warmup(&inst, &warm, &cfg, &mut OptimisticSdp, SimRng::new(5))?;
    println!(
        "T = 16384: total regret {:.1} ({} learner epochs)",
        run.total_regret.last().unwrap(),
        run.learner.epochs.len()
    );
    Ok(())
}
