//! One OSLO run on the golden system with practical constants, plus the
//! good-event monitor and the regret decomposition.

use oslo_lqr::linalg::Vector;
use oslo_lqr::oslo::{
    good_event_monitor, regret_decomposition, run_oslo, OsloConfig, PracticalMultipliers,
};
use oslo_lqr::{LqrInstance, SimRng};

fn main() -> oslo_lqr::Result<()> {
    let inst = LqrInstance::golden();
    let mult = PracticalMultipliers {
        admissible_lambda: true,
        ..Default::default()
    };
    let cfg = OsloConfig::practical(&inst.known(), 4096, 0.1, inst.theta(), mult)?;
    println!(
        "mu = {:.1}, lambda = {:.1}, beta = {:.2}",
        cfg.mu, cfg.lambda, cfg.beta
    );
    let run = run_oslo(&inst, &cfg, &Vector::zeros(1), SimRng::new(1))?;
    for e in &run.epochs {
        println!(
            "epoch from t = {:>4}: K = {:.5}",
            e.start,
            e.policy.k[(0, 0)]
        );
    }
    let flags = good_event_monitor(&run, &inst);
    println!(
        "final regret {:.2}, good event held: {}",
        run.final_regret(),
        flags.survived()
    );
    if flags.survived() {
        let dec = regret_decomposition(&run, &inst, &flags)?;
        println!(
            "terms: telescoping {:.2}, cross {:.2}, noise {:.2}, bonus {:.2}; dominated: {}",
            dec.telescoping.last().unwrap(),
            dec.cross.last().unwrap(),
            dec.noise.last().unwrap(),
            dec.bonus.last().unwrap(),
            dec.dominated()
        );
    }
    Ok(())
}
