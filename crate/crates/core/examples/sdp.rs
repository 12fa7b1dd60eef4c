//! Exact covariance SDP versus its optimistic relaxation. With `Q = R` the
//! relaxed gain would not move with `V`, so `R = 3` here.

use oslo_lqr::linalg::Mat;
use oslo_lqr::sdp::{
    build_exact_sdp, build_relaxed_sdp, extract_policy, solve_sdp, DEFAULT_PINV_THRESHOLD,
};
use oslo_lqr::LqrInstance;

fn main() -> oslo_lqr::Result<()> {
    let inst = LqrInstance::scalar(1.0, 1.0, 1.0, 3.0, 1.0)?;
    let exact = solve_sdp(&build_exact_sdp(&inst), 1e-10, 200)?.require_optimal()?;
    let k = extract_policy(&exact, DEFAULT_PINV_THRESHOLD)?.policy;
    println!(
        "exact: value {:.8}, K {:.6}, {} iterations",
        exact.value,
        k.k_mat[(0, 0)],
        exact.iterations
    );

    // a slightly wrong estimate with moderate confidence
    let a_hat = Mat::from_element(1, 1, 1.05);
    let b_hat = Mat::from_element(1, 1, 0.95);
    for scale in [1e2, 1e3, 1e4] {
        let v = Mat::identity(2, 2) * scale;
        let prob = build_relaxed_sdp(&a_hat, &b_hat, &v, 5.0, &inst.w, &inst.cost_block())?;
        let sol = solve_sdp(&prob, 1e-8, 200)?.require_optimal()?;
        let k = extract_policy(&sol, DEFAULT_PINV_THRESHOLD)?.policy;
        println!(
            "V = {scale:>6}·I: relaxed value {:.6}, K {:.6}",
            sol.value,
            k.k_mat[(0, 0)]
        );
    }
    Ok(())
}
