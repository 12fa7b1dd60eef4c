//! Roll out the optimal and a cautious gain on the same noise.

use oslo_lqr::linalg::Vector;
use oslo_lqr::riccati::solve_dare;
use oslo_lqr::system::{cumulative_regret, rollout};
use oslo_lqr::{LqrInstance, Policy, SimRng};

fn main() -> oslo_lqr::Result<()> {
    let inst = LqrInstance::golden();
    let ric = solve_dare(&inst, 1e-12)?;
    let horizon = 10_000;
    for (name, mut policy) in [
        ("optimal", ric.policy()),
        ("K0 = -0.3", Policy::scalar(-0.3)),
    ] {
        let traj = rollout(
            &inst,
            &mut policy,
            horizon,
            &Vector::zeros(1),
            &mut SimRng::new(7),
        )?;
        let regret = cumulative_regret(&traj.costs, ric.j_star);
        println!(
            "{name:>10}: R_T = {:>9.2}, R_T / T = {:.4}",
            regret[horizon - 1],
            regret[horizon - 1] / horizon as f64
        );
    }
    Ok(())
}
