use proptest::prelude::*;

use oslo_lqr::bench::{fit_regret_exponent, ExperimentConfig};
use oslo_lqr::estimator::EstimatorState;
use oslo_lqr::linalg::{self, Mat, Vector};
use oslo_lqr::riccati::{dare_residual, solve_dare};
use oslo_lqr::sdp::{
    build_exact_sdp, build_relaxed_sdp, solve_sdp, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use oslo_lqr::system::Dims;
use oslo_lqr::{LqrInstance, SimRng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scalar_riccati(a in -2.0f64..2.0, b in 0.2f64..2.0, q in 0.1f64..3.0, r in 0.1f64..3.0) {
        let inst = LqrInstance::scalar(a, b, q, r, 1.0).unwrap();
        let sol = solve_dare(&inst, 1e-12).unwrap();
        let p = sol.p_star[(0, 0)];
        let expected = q + a * a * p - (a * b * p).powi(2) / (r + b * b * p);
        prop_assert!((p - expected).abs() <= 1e-9 * p.max(1.0));
        prop_assert!(dare_residual(&inst, &sol.p_star).unwrap() <= 1e-8 * p.max(1.0));
        prop_assert!((a + b * sol.k_star[(0, 0)]).abs() < 1.0);
        prop_assert!(p >= q);
    }

    #[test]
    fn relaxed_value_never_exceeds_exact(a in -1.5f64..1.5, b in 0.3f64..1.5, scale in 10.0f64..1e4, mu in 0.0f64..5.0) {
        let inst = LqrInstance::scalar(a, b, 1.0, 1.0, 1.0).unwrap();
        let exact = solve_sdp(&build_exact_sdp(&inst), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap().require_optimal().unwrap();
        let v = Mat::identity(2, 2) * scale;
        let prob = build_relaxed_sdp(&inst.a_star, &inst.b_star, &v, mu, &inst.w, &inst.cost_block()).unwrap();
        let relaxed = solve_sdp(&prob, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap().require_optimal().unwrap();
        prop_assert!(relaxed.value <= exact.value + 1e-6 * exact.value.max(1.0));
    }

    #[test]
    fn estimator_tracks_direct_sums(seed in 0u64..10_000, lambda in 0.5f64..50.0, beta in 0.5f64..20.0, steps in 1usize..60) {
        let dims = Dims::new(2, 1).unwrap();
        let mut rng = SimRng::new(seed);
        let mut est = EstimatorState::new(lambda, beta, Mat::zeros(2, 3), dims).unwrap();
        let mut v = Mat::identity(3, 3) * lambda;
        for _ in 0..steps {
            let z = rng.standard_normal_vec(3);
            let x_next: Vector = rng.standard_normal_vec(2);
            est.update(&z, &x_next).unwrap();
            v += &z * z.transpose() / beta;
        }
        prop_assert!((&est.v - &v).amax() <= 1e-9 * v.amax());
        let direct = linalg::spd_log_det(&v, "V").unwrap();
        prop_assert!((est.log_det - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn exponent_fit_is_exact_on_power_laws(slope in -1.0f64..2.0, c in 0.01f64..100.0) {
        let pts: Vec<(f64, f64)> = (8..15).map(|e| 2f64.powi(e)).map(|t| (t, c * t.powf(slope))).collect();
        let fit = fit_regret_exponent(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-12);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-10);
    }

    #[test]
    fn unknown_config_keys_are_rejected(key in "[a-z]{3,10}") {
        prop_assume!(!["name", "instance", "algorithms", "horizons", "seeds", "delta", "constants", "practical",
            "overrides", "prior", "warmup", "sdp", "output", "fallback_on_sdp_failure"].contains(&key.as_str()));
        let text = format!("{key} = 1\nalgorithms = [\"optimal\"]\nhorizons = [8, 16]\nseeds = [1]\n[instance]\nkind = \"golden\"\n");
        prop_assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
