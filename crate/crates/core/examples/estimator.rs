//! Least-squares estimation and the determinant-doubling epoch rule under a
//! fixed exploratory policy.

use oslo_lqr::estimator::EstimatorState;
use oslo_lqr::linalg::{joint, Mat, Vector};
use oslo_lqr::system::step;
use oslo_lqr::{LqrInstance, SimRng};

fn main() -> oslo_lqr::Result<()> {
    let inst = LqrInstance::golden();
    let dims = inst.dims();
    let mut est = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 2), dims)?;
    let mut rng = SimRng::new(3);
    let mut x = Vector::zeros(1);
    let mut epochs = 1;
    for t in 1..=4096usize {
        let u = Vector::from_element(1, -0.3 * x[0] + rng.normal());
        let out = step(&inst, &x, &u, &mut rng)?;
        est.update(&joint(&x, &u), &out.x_next)?;
        x = out.x_next;
        if est.epoch_trigger() {
            est.start_epoch();
            epochs += 1;
        }
        if t.is_power_of_two() && t >= 64 {
            est.refresh_estimate()?;
            let diag = est.weighted_error(&inst, 0.1);
            println!(
                "t = {t:>4}: (A, B) ≈ ({:.4}, {:.4}), tr(ΔVΔᵀ) = {:.3} vs bound {:.2}, epochs {epochs}",
                est.theta[(0, 0)],
                est.theta[(0, 1)],
                diag.weighted_error,
                diag.bound
            );
        }
    }
    Ok(())
}
