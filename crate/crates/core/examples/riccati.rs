//! Riccati solution and stability certificate of the golden scalar system.

use oslo_lqr::riccati::{policy_cost, solve_dare, strong_stability_certificate};
use oslo_lqr::{LqrInstance, Policy};

fn main() -> oslo_lqr::Result<()> {
    let inst = LqrInstance::golden();
    let sol = solve_dare(&inst, 1e-12)?;
    println!(
        "P* = {:.12}  K* = {:.12}  J* = {:.12}",
        sol.p_star[(0, 0)],
        sol.k_star[(0, 0)],
        sol.j_star
    );

    let cert = strong_stability_certificate(&inst, &sol.policy(), Some(&sol.p_star))?;
    println!(
        "K* is ({:.3}, {:.3})-strongly stable",
        cert.kappa, cert.gamma
    );

    let k0 = Policy::scalar(-0.3);
    let cost = policy_cost(&inst, &k0)?;
    println!(
        "J(K0 = -0.3) = {:.6}, excess {:.6} per round",
        cost.j,
        cost.j - sol.j_star
    );
    Ok(())
}
