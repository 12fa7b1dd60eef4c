//! The steady-state covariance SDP for LQR, exact and optimistic (relaxed).
//!
//! Exact program over `Σ ⪰ 0` (n x n):
//!
//! ```text
//! minimize diag(Q,R) • Σ  s.t.  Σxx = Θ Σ Θᵀ + W
//! ```
//!
//! Relaxed program, with `Θ = (Â B̂)` an estimate:
//!
//! ```text
//! minimize diag(Q,R) • Σ  s.t.  Σxx ⪰ Θ Σ Θᵀ + W − μ (Σ • V⁻¹) I
//! ```
//!
//! Its dual variable `P` (d x d) satisfies
//! `diag(Q − P, R) + ΘᵀPΘ − μ tr(P) V⁻¹ ⪰ 0`, `P ⪰ 0`, and the dual value is
//! `P • W`. Both programs are mapped to standard form with the slack
//! `S = Σxx − ΘΣΘᵀ − W + μ(Σ•V⁻¹)I` as a second PSD block and solved by
//! [`ipm`].

pub mod ipm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, hstack, identity_over, inner, op_norm, sym, Mat};
use crate::system::{Dims, LqrInstance, Policy};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Relative pseudo-inverse threshold for `Σxx`, as a multiple of `||Σxx||`.
pub const DEFAULT_PINV_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpKind {
    Exact,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSense {
    Equality,
    Inequality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpProblem {
    pub kind: SdpKind,
    pub dims: Dims,
    #[serde(with = "crate::serde_mat")]
    pub cost_block: Mat,
    #[serde(with = "crate::serde_mat")]
    pub a_hat: Mat,
    #[serde(with = "crate::serde_mat")]
    pub b_hat: Mat,
    #[serde(with = "crate::serde_mat")]
    pub w: Mat,
    pub mu: f64,
    #[serde(with = "crate::serde_mat::opt_mat")]
    pub v_inv: Option<Mat>,
}

impl SdpProblem {
    pub fn constraint_sense(&self) -> ConstraintSense {
        match self.kind {
            SdpKind::Exact => ConstraintSense::Equality,
            SdpKind::Relaxed => ConstraintSense::Inequality,
        }
    }

    pub fn theta(&self) -> Mat {
        hstack(&self.a_hat, &self.b_hat)
    }

    fn validate(&self) -> Result<()> {
        let Dims { d, k } = self.dims;
        let n = d + k;
        let shapes = [
            ("cost_block", self.cost_block.shape(), (n, n)),
            ("a_hat", self.a_hat.shape(), (d, d)),
            ("b_hat", self.b_hat.shape(), (d, k)),
            ("w", self.w.shape(), (d, d)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::dims(name, format!("{want:?}"), format!("{got:?}")));
            }
        }
        if let Some(v_inv) = &self.v_inv {
            if v_inv.shape() != (n, n) {
                return Err(Error::dims(
                    "v_inv",
                    format!("{n}x{n}"),
                    format!("{:?}", v_inv.shape()),
                ));
            }
        }
        if self.kind == SdpKind::Relaxed && self.v_inv.is_none() {
            return Err(Error::InvalidArgument("relaxed SDP needs V⁻¹".into()));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mu must be nonnegative, got {}",
                self.mu
            )));
        }
        Ok(())
    }

    /// `𝒜*(P) = EᵀPE − ΘᵀPΘ + μ tr(P) V⁻¹` on the Σ block.
    pub fn adjoint(&self, p: &Mat) -> Mat {
        let theta = self.theta();
        let mut out =
            block_diag(p, &Mat::zeros(self.dims.k, self.dims.k)) - theta.transpose() * p * &theta;
        if let Some(v_inv) = &self.v_inv {
            out += v_inv * (self.mu * p.trace());
        }
        out
    }

    /// `𝒜(Σ) = Σxx − ΘΣΘᵀ + μ (Σ•V⁻¹) I`.
    pub fn forward(&self, sigma: &Mat) -> Mat {
        let d = self.dims.d;
        let theta = self.theta();
        let mut out = sigma.view((0, 0), (d, d)).into_owned() - &theta * sigma * theta.transpose();
        if let Some(v_inv) = &self.v_inv {
            out += Mat::identity(d, d) * (self.mu * inner(sigma, v_inv));
        }
        out
    }

    fn standard_form(&self) -> (ipm::StandardSdp, Vec<(usize, usize)>) {
        let Dims { d, k } = self.dims;
        let n = d + k;
        let relaxed = self.kind == SdpKind::Relaxed;
        let size = if relaxed { n + d } else { n };
        let mut c = Mat::zeros(size, size);
        c.view_mut((0, 0), (n, n)).copy_from(&self.cost_block);
        let mut basis = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for p in 0..d {
            for q in p..d {
                let mut e = Mat::zeros(d, d);
                e[(p, q)] = 1.0;
                e[(q, p)] = 1.0;
                let mut aj = Mat::zeros(size, size);
                aj.view_mut((0, 0), (n, n)).copy_from(&self.adjoint(&e));
                if relaxed {
                    aj.view_mut((n, n), (d, d)).copy_from(&(-&e));
                }
                b.push(inner(&e, &self.w));
                a.push(aj);
                basis.push((p, q));
            }
        }
        (
            ipm::StandardSdp {
                c: sym(&c),
                a,
                b: linalg::Vector::from_vec(b),
            },
            basis,
        )
    }
}

/// Exact program for the true system.
pub fn build_exact_sdp(instance: &LqrInstance) -> SdpProblem {
    SdpProblem {
        kind: SdpKind::Exact,
        dims: instance.dims(),
        cost_block: instance.cost_block(),
        a_hat: instance.a_star.clone(),
        b_hat: instance.b_star.clone(),
        w: instance.w.clone(),
        mu: 0.0,
        v_inv: None,
    }
}

/// Relaxed program around the estimates `(Â, B̂)` with confidence matrix `V`.
///
/// `mu = 0` is accepted and gives the inequality form of the exact program.
pub fn build_relaxed_sdp(
    a_hat: &Mat,
    b_hat: &Mat,
    v: &Mat,
    mu: f64,
    w: &Mat,
    cost_block: &Mat,
) -> Result<SdpProblem> {
    let d = a_hat.nrows();
    let k = b_hat.ncols();
    let dims = Dims::new(d, k)?;
    if v.shape() != (d + k, d + k) {
        return Err(Error::dims(
            "build_relaxed_sdp: v",
            format!("{0}x{0}", d + k),
            format!("{:?}", v.shape()),
        ));
    }
    let v_inv = linalg::spd_inverse(v, "V")?;
    let problem = SdpProblem {
        kind: SdpKind::Relaxed,
        dims,
        cost_block: cost_block.clone(),
        a_hat: a_hat.clone(),
        b_hat: b_hat.clone(),
        w: w.clone(),
        mu,
        v_inv: Some(v_inv),
    };
    problem.validate()?;
    Ok(problem)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub dims: Dims,
    /// Primal `Σ` (n x n).
    #[serde(with = "crate::serde_mat")]
    pub sigma: Mat,
    /// Dual `P` (d x d).
    #[serde(with = "crate::serde_mat")]
    pub p_dual: Mat,
    /// Primal slack `S` (relaxed only).
    #[serde(with = "crate::serde_mat::opt_mat")]
    pub slack: Option<Mat>,
    /// `diag(Q,R) • Σ`.
    pub value: f64,
    /// `P • W`.
    pub dual_value: f64,
    pub status: SdpStatus,
    pub kkt_residuals: KktResiduals,
    pub iterations: usize,
    pub detail: String,
}

impl SdpSolution {
    pub fn sigma_xx(&self) -> Mat {
        let d = self.dims.d;
        self.sigma.view((0, 0), (d, d)).into_owned()
    }

    pub fn sigma_ux(&self) -> Mat {
        let Dims { d, k } = self.dims;
        self.sigma.view((d, 0), (k, d)).into_owned()
    }

    pub fn sigma_uu(&self) -> Mat {
        let Dims { d, k } = self.dims;
        self.sigma.view((d, d), (k, k)).into_owned()
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Turn a non-optimal status into an error.
    pub fn require_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Sdp {
                status: self.status,
                detail: self.detail,
            })
        }
    }
}

/// Solve with the interior-point method. Infeasibility and iteration
/// exhaustion are reported through `status`, not as errors.
pub fn solve_sdp(problem: &SdpProblem, tol: f64, max_iters: usize) -> Result<SdpSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let (std_form, basis) = problem.standard_form();
    let res = ipm::solve(&std_form, ipm::IpmOptions { tol, max_iters });
    let Dims { d, k } = problem.dims;
    let n = d + k;
    let sigma = res.x.view((0, 0), (n, n)).into_owned();
    let slack = (problem.kind == SdpKind::Relaxed).then(|| res.x.view((n, n), (d, d)).into_owned());
    let mut p = Mat::zeros(d, d);
    for (&(i, j), yj) in basis.iter().zip(res.y.iter()) {
        p[(i, j)] = *yj;
        p[(j, i)] = *yj;
    }
    Ok(SdpSolution {
        dims: problem.dims,
        value: inner(&problem.cost_block, &sigma),
        dual_value: inner(&p, &problem.w),
        sigma,
        p_dual: p,
        slack,
        status: res.status,
        kkt_residuals: KktResiduals {
            primal: res.primal_infeas,
            dual: res.dual_infeas,
            gap: res.gap,
        },
        iterations: res.iterations,
        detail: res.detail,
    })
}

/// A policy read off `Σ`, with a flag when `Σxx` needed a pseudo-inverse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractedPolicy {
    pub policy: Policy,
    pub degenerate: bool,
    pub min_eig_sigma_xx: f64,
}

/// `K = Σux Σxx⁻¹` from an optimal solution.
///
/// `pinv_threshold` is relative: eigenvalues of `Σxx` below
/// `pinv_threshold * ||Σxx||` switch to a pseudo-inverse and set
/// `degenerate`; eigenvalues below minus that amount are an error.
pub fn extract_policy(solution: &SdpSolution, pinv_threshold: f64) -> Result<ExtractedPolicy> {
    if !solution.is_optimal() {
        return Err(Error::Extraction(format!(
            "solution status is {:?}, not optimal",
            solution.status
        )));
    }
    extract_policy_from_sigma(&solution.sigma, solution.dims.d, pinv_threshold)
}

pub fn extract_policy_from_sigma(
    sigma: &Mat,
    d: usize,
    pinv_threshold: f64,
) -> Result<ExtractedPolicy> {
    let n = sigma.nrows();
    if !sigma.is_square() || d == 0 || d >= n {
        return Err(Error::dims(
            "extract_policy",
            format!("square with d < n = {n}"),
            format!("{:?}", sigma.shape()),
        ));
    }
    let sxx = sym(&sigma.view((0, 0), (d, d)).into_owned());
    let sux = sigma.view((d, 0), (n - d, d)).into_owned();
    let (vals, vecs) = linalg::sym_eig(&sxx);
    let lo = vals[0];
    let thresh = pinv_threshold * op_norm(&sxx);
    if lo < -thresh || !(lo.is_finite()) {
        return Err(Error::Extraction(format!(
            "Σxx is indefinite (min eigenvalue {lo:e})"
        )));
    }
    let (k, degenerate) = if lo < thresh || lo <= 0.0 {
        let inv_vals = vals.map(|x| if x > thresh && x > 0.0 { 1.0 / x } else { 0.0 });
        let pinv = &vecs * Mat::from_diagonal(&inv_vals) * vecs.transpose();
        (sux * pinv, true)
    } else {
        let chol = linalg::cholesky(&sxx, "Σxx")?;
        (chol.solve(&sux.transpose()).transpose(), false)
    };
    Ok(ExtractedPolicy {
        policy: Policy::new(k)?,
        degenerate,
        min_eig_sigma_xx: lo,
    })
}

/// Operator norm of `RHS − P` for the identity
/// `P = Q + KᵀRK + (A+BK)ᵀP(A+BK) − μ tr(P) (I;K)ᵀ V⁻¹ (I;K)`,
/// which holds at an optimum of the relaxed program.
pub fn fixed_point_residual(
    p: &Mat,
    policy: &Policy,
    a_hat: &Mat,
    b_hat: &Mat,
    v: &Mat,
    mu: f64,
    cost_block: &Mat,
) -> Result<f64> {
    let v_inv = linalg::spd_inverse(v, "V")?;
    Ok(op_norm(
        &(fixed_point_rhs(p, policy, a_hat, b_hat, &v_inv, mu, cost_block) - p),
    ))
}

/// Right-hand side of the fixed-point identity, given `V⁻¹` directly.
pub fn fixed_point_rhs(
    p: &Mat,
    policy: &Policy,
    a_hat: &Mat,
    b_hat: &Mat,
    v_inv: &Mat,
    mu: f64,
    cost_block: &Mat,
) -> Mat {
    let ik = identity_over(&policy.k_mat);
    let m = a_hat + b_hat * &policy.k_mat;
    let stage = ik.transpose() * cost_block * &ik;
    sym(&(stage + m.transpose() * p * &m - ik.transpose() * v_inv * &ik * (mu * p.trace())))
}

/// `μ ≥ 1 + 2ϑ ||V||^{1/2}`.
pub fn relaxation_admissible(mu: f64, vartheta: f64, v: &Mat) -> bool {
    mu >= 1.0 + 2.0 * vartheta * op_norm(v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{policy_cost, solve_dare};

    const GOLDEN: f64 = 1.618_033_988_749_895;

    #[test]
    fn exact_golden() {
        let inst = LqrInstance::golden();
        let sol = solve_sdp(&build_exact_sdp(&inst), 1e-10, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal, "{}", sol.detail);
        assert!((sol.value - GOLDEN).abs() < 1e-6, "{}", sol.value);
        assert!((sol.p_dual[(0, 0)] - GOLDEN).abs() < 1e-8, "{}", sol.p_dual);
        assert_eq!(linalg::numerical_rank(&sol.sigma, 1e-6), 1);
        let k = extract_policy(&sol, DEFAULT_PINV_THRESHOLD).unwrap();
        assert!((k.policy.k_mat[(0, 0)] + GOLDEN - 1.0).abs() < 1e-4);
        assert!(!k.degenerate);
    }

    #[test]
    fn exact_decoupled() {
        let inst = LqrInstance::scalar(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let sol = solve_sdp(&build_exact_sdp(&inst), DEFAULT_TOL, 200).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.value - 1.0).abs() < 1e-6);
        assert!(
            (sol.sigma.clone() - Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-6
        );
    }

    #[test]
    fn riccati_covariance_is_feasible() {
        let inst = LqrInstance::golden();
        let ric = solve_dare(&inst, 1e-12).unwrap();
        let x = policy_cost(&inst, &ric.policy()).unwrap().x_cov;
        let ik = identity_over(&ric.k_star);
        let e = &ik * &x * ik.transpose();
        let prob = build_exact_sdp(&inst);
        assert!(op_norm(&(prob.forward(&e) - &inst.w)) <= 1e-8);
        assert!((inner(&prob.cost_block, &e) - ric.j_star).abs() < 1e-8);
    }

    #[test]
    fn exact_infeasible() {
        let inst = LqrInstance::scalar(1.1, 0.0, 1.0, 1.0, 1.0).unwrap();
        let sol = solve_sdp(&build_exact_sdp(&inst), DEFAULT_TOL, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible, "{}", sol.detail);
        assert!(extract_policy(&sol, DEFAULT_PINV_THRESHOLD).is_err());
    }

    #[test]
    fn relaxed_limits() {
        let inst = LqrInstance::golden();
        let exact = solve_sdp(&build_exact_sdp(&inst), 1e-10, 200).unwrap();
        let big_v = Mat::identity(2, 2) * 1e8;
        let prob = build_relaxed_sdp(
            &inst.a_star,
            &inst.b_star,
            &big_v,
            3.0,
            &inst.w,
            &inst.cost_block(),
        )
        .unwrap();
        let sol = solve_sdp(&prob, 1e-10, 200).unwrap();
        assert!(sol.is_optimal(), "{}", sol.detail);
        assert!((sol.value - exact.value).abs() < 1e-4);

        let prob0 = build_relaxed_sdp(
            &inst.a_star,
            &inst.b_star,
            &Mat::identity(2, 2),
            0.0,
            &inst.w,
            &inst.cost_block(),
        )
        .unwrap();
        let sol0 = solve_sdp(&prob0, 1e-10, 200).unwrap();
        assert!((sol0.value - exact.value).abs() < 1e-6);

        let v6 = Mat::identity(2, 2) * 1e6;
        let prob = build_relaxed_sdp(
            &inst.a_star,
            &inst.b_star,
            &v6,
            3.0,
            &inst.w,
            &inst.cost_block(),
        )
        .unwrap();
        let sol = solve_sdp(&prob, DEFAULT_TOL, 200).unwrap();
        assert!(op_norm(&(&sol.p_dual - Mat::from_element(1, 1, GOLDEN))) < 1e-3);
        let k = extract_policy(&sol, DEFAULT_PINV_THRESHOLD).unwrap().policy;
        let r = fixed_point_residual(
            &sol.p_dual,
            &k,
            &inst.a_star,
            &inst.b_star,
            &v6,
            3.0,
            &inst.cost_block(),
        )
        .unwrap();
        assert!(r <= 10.0 * DEFAULT_TOL, "{r}");
    }

    #[test]
    fn relaxed_value_below_optimum() {
        let inst = LqrInstance::golden();
        let v = Mat::identity(2, 2) * 4.0;
        let mu = 1.0 + 2.0 * inst.bounds.vartheta * 2.0;
        assert!(relaxation_admissible(mu, inst.bounds.vartheta, &v));
        let prob = build_relaxed_sdp(
            &inst.a_star,
            &inst.b_star,
            &v,
            mu,
            &inst.w,
            &inst.cost_block(),
        )
        .unwrap();
        let sol = solve_sdp(&prob, DEFAULT_TOL, 200).unwrap();
        assert!(sol.is_optimal());
        assert!(sol.value <= GOLDEN + 10.0 * DEFAULT_TOL);
    }

    #[test]
    fn extraction_examples() {
        let s = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 0.5]);
        let e = extract_policy_from_sigma(&s, 1, DEFAULT_PINV_THRESHOLD).unwrap();
        assert!((e.policy.k_mat[(0, 0)] - 0.5).abs() < 1e-15);
        let s = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let e = extract_policy_from_sigma(&s, 1, DEFAULT_PINV_THRESHOLD).unwrap();
        assert_eq!(e.policy.k_mat[(0, 0)], 0.0);
        assert!(!e.degenerate);
        let s = Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 1.0]);
        let e = extract_policy_from_sigma(&s, 2, DEFAULT_PINV_THRESHOLD).unwrap();
        assert!(e.degenerate);
        let s = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(extract_policy_from_sigma(&s, 1, DEFAULT_PINV_THRESHOLD).is_err());
    }

    #[test]
    fn fixed_point_hand_example() {
        // a=0.5, b=1, k=-0.5, q=1.5, r=2, mu=1, V=1.25 I: P = 1 solves the identity
        let a = Mat::from_element(1, 1, 0.5);
        let b = Mat::from_element(1, 1, 1.0);
        let cost = Mat::from_diagonal(&linalg::Vector::from_column_slice(&[1.5, 2.0]));
        let v = Mat::identity(2, 2) * 1.25;
        let k = Policy::scalar(-0.5);
        let p = Mat::from_element(1, 1, 1.0);
        let r = fixed_point_residual(&p, &k, &a, &b, &v, 1.0, &cost).unwrap();
        assert!(r < 1e-15, "{r}");
        let r = fixed_point_residual(&(&p * 1.1), &k, &a, &b, &v, 1.0, &cost).unwrap();
        assert!(r >= 0.05, "{r}");
    }

    #[test]
    fn admissibility_examples() {
        let v = Mat::identity(2, 2) * 4.0;
        assert!(relaxation_admissible(5.0, 1.0, &v));
        assert!(!relaxation_admissible(4.9, 1.0, &v));
        for t in [1.0_f64, 10.0, 1e4] {
            let v = Mat::identity(3, 3) * 4.0 * t;
            assert!(relaxation_admissible(5.0 * t.sqrt(), 1.0, &v));
        }
    }

    #[test]
    fn solution_serde_roundtrip() {
        let sol = solve_sdp(&build_exact_sdp(&LqrInstance::golden()), DEFAULT_TOL, 200).unwrap();
        let s = serde_json::to_string(&sol).unwrap();
        let back: SdpSolution = serde_json::from_str(&s).unwrap();
        assert_eq!(back.sigma, sol.sigma);
        assert_eq!(back.status, sol.status);
    }
}
