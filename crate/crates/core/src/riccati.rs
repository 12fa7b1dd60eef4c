//! Ground truth: the discrete algebraic Riccati equation, Lyapunov
//! equations, policy costs, and strong-stability certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, inner, op_norm, psd_inv_sqrt, psd_sqrt, spectral_radius, sym, Mat};
use crate::system::{LqrInstance, Policy};

/// Iteration budget for [`solve_dare`].
pub const DARE_MAX_ITERS: usize = 200_000;

/// Eigenvalue floor used when taking square roots of cost-to-go matrices.
pub const SQRT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiccatiSolution {
    #[serde(with = "crate::serde_mat")]
    pub p_star: Mat,
    /// Optimal gain, `u = K* x`.
    #[serde(with = "crate::serde_mat")]
    pub k_star: Mat,
    /// `P* • W`.
    pub j_star: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl RiccatiSolution {
    pub fn policy(&self) -> Policy {
        Policy {
            k_mat: self.k_star.clone(),
        }
    }
}

/// One Riccati map application. Returns `(next P, gain K)` with
/// `K = -(R + BᵀPB)⁻¹ BᵀPA`.
fn riccati_map(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> Result<(Mat, Mat)> {
    let bp = b.transpose() * p;
    let gram = r + &bp * b;
    let chol = linalg::cholesky(&gram, "R + BᵀPB")?;
    let k = -chol.solve(&(&bp * a));
    let next = q + a.transpose() * p * a + a.transpose() * bp.transpose() * &k;
    Ok((sym(&next), k))
}

/// Operator norm of `Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA − P`.
pub fn dare_residual(instance: &LqrInstance, p: &Mat) -> Result<f64> {
    let (next, _) = riccati_map(
        &instance.a_star,
        &instance.b_star,
        &instance.q,
        &instance.r,
        p,
    )?;
    Ok(op_norm(&(next - p)))
}

/// Solve the DARE by value iteration from `P = Q`.
///
/// Stops once the residual operator norm is at most `tol * max(1, ||P||)`.
/// Divergence past `1e12` times the problem scale means no stabilizing
/// solution exists.
pub fn solve_dare(instance: &LqrInstance, tol: f64) -> Result<RiccatiSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let (a, b, q, r) = (&instance.a_star, &instance.b_star, &instance.q, &instance.r);
    let scale = op_norm(q).max(op_norm(r)).max(1.0);
    let mut p = q.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=DARE_MAX_ITERS {
        let (next, _) = riccati_map(a, b, q, r, &p)?;
        residual = op_norm(&(&next - &p));
        p = next;
        let p_norm = op_norm(&p);
        if !p_norm.is_finite() || p_norm > 1e12 * scale {
            return Err(Error::NoSolution(format!(
                "value iteration diverged (||P|| = {p_norm:e} after {it} iterations)"
            )));
        }
        if residual <= tol * p_norm.max(1.0) {
            let (_, k) = riccati_map(a, b, q, r, &p)?;
            let rho = spectral_radius(&(a + b * &k))?;
            if rho >= 1.0 {
                return Err(Error::NoSolution(format!(
                    "fixed point is not stabilizing (closed-loop spectral radius {rho})"
                )));
            }
            let residual = dare_residual(instance, &p)?;
            return Ok(RiccatiSolution {
                j_star: inner(&p, &instance.w),
                p_star: p,
                k_star: k,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        what: "Riccati value iteration",
        iterations: DARE_MAX_ITERS,
        residual,
    })
}

/// Which Lyapunov equation to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovForm {
    /// `X = M X Mᵀ + rhs`, the steady-state covariance.
    Forward,
    /// `X = Mᵀ X M + rhs`, the cost-to-go.
    Transposed,
}

/// Solve a discrete Lyapunov equation by Smith doubling.
pub fn solve_lyapunov(m: &Mat, rhs: &Mat, form: LyapunovForm) -> Result<Mat> {
    if !m.is_square() || rhs.shape() != m.shape() {
        return Err(Error::dims(
            "solve_lyapunov",
            format!("{0}x{0} pair", m.nrows()),
            format!("{:?} and {:?}", m.shape(), rhs.shape()),
        ));
    }
    let rho = spectral_radius(m)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let mut a = match form {
        LyapunovForm::Forward => m.clone(),
        LyapunovForm::Transposed => m.transpose(),
    };
    let mut x = rhs.clone();
    for _ in 0..64 {
        let add = &a * &x * a.transpose();
        x += &add;
        a = &a * &a;
        if add.amax() <= f64::EPSILON * x.amax() && a.amax() < 1.0 {
            break;
        }
    }
    let x = sym(&x);
    if !linalg::all_finite(&x) {
        return Err(Error::Unstable(rho));
    }
    Ok(x)
}

/// Residual of `X = M X Mᵀ + rhs` (or the transposed form).
pub fn lyapunov_residual(m: &Mat, rhs: &Mat, x: &Mat, form: LyapunovForm) -> f64 {
    let image = match form {
        LyapunovForm::Forward => m * x * m.transpose(),
        LyapunovForm::Transposed => m.transpose() * x * m,
    };
    op_norm(&(image + rhs - x))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyCost {
    /// Steady-state average cost `J(K)`.
    pub j: f64,
    #[serde(with = "crate::serde_mat")]
    pub x_cov: Mat,
    #[serde(with = "crate::serde_mat")]
    pub p: Mat,
}

/// Steady-state cost, state covariance, and cost-to-go of `u = K x`.
pub fn policy_cost(instance: &LqrInstance, policy: &Policy) -> Result<PolicyCost> {
    let m = instance.closed_loop(policy);
    let stage = &instance.q + policy.k_mat.transpose() * &instance.r * &policy.k_mat;
    let x_cov = solve_lyapunov(&m, &instance.w, LyapunovForm::Forward)?;
    let p = solve_lyapunov(&m, &stage, LyapunovForm::Transposed)?;
    Ok(PolicyCost {
        j: inner(&stage, &x_cov),
        x_cov,
        p,
    })
}

/// Witness that `M = H L H⁻¹` with `||L|| <= 1 - gamma`.
///
/// With a cost-to-go style matrix `P` (one with `MᵀPM ⪯ P`), the contraction
/// is `P^{1/2} M P^{-1/2}`, so `H = P^{-1/2}`; its condition number is the
/// same as that of `P^{1/2}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub kappa: f64,
    pub gamma: f64,
    #[serde(with = "crate::serde_mat")]
    pub h: Mat,
    #[serde(with = "crate::serde_mat")]
    pub l: Mat,
    /// `||H||`.
    pub b0_upper: f64,
    /// `1 / ||H⁻¹||`.
    pub b0_lower: f64,
    /// Where the similarity came from.
    pub source: CertificateSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSource {
    /// Supplied `P` (e.g. an SDP dual).
    Supplied,
    /// The policy's own Lyapunov cost-to-go.
    CostToGo,
    /// An explicit `H`.
    Explicit,
}

impl StabilityCertificate {
    /// `||H_next⁻¹ H_self||`, the sequential-stability ratio.
    pub fn switch_ratio(&self, next: &StabilityCertificate) -> Result<f64> {
        let inv = linalg::spd_inverse(&next.h, "H")?;
        Ok(op_norm(&(inv * &self.h)))
    }
}

/// Certificate from an explicit similarity `H` (positive definite).
pub fn certify_with_h(
    closed_loop: &Mat,
    k_mat: &Mat,
    h: &Mat,
    source: CertificateSource,
) -> Result<StabilityCertificate> {
    let h_inv = linalg::spd_inverse(h, "H")?;
    let l = &h_inv * closed_loop * h;
    let l_norm = op_norm(&l);
    if l_norm >= 1.0 {
        return Err(Error::CertificateFailure(l_norm));
    }
    let b0_upper = op_norm(h);
    let b0_lower = 1.0 / op_norm(&h_inv);
    Ok(StabilityCertificate {
        kappa: op_norm(k_mat).max(b0_upper / b0_lower).max(1.0),
        gamma: 1.0 - l_norm,
        h: h.clone(),
        l,
        b0_upper,
        b0_lower,
        source,
    })
}

/// Certificate from a cost-to-go style matrix `P` with `H = P^{-1/2}`.
pub fn certify_with_p(
    closed_loop: &Mat,
    k_mat: &Mat,
    p: &Mat,
    source: CertificateSource,
) -> Result<StabilityCertificate> {
    if linalg::min_eig(p) <= 0.0 {
        return Err(Error::NotPositiveDefinite("certificate P"));
    }
    let h = psd_inv_sqrt(p, SQRT_FLOOR);
    certify_with_h(closed_loop, k_mat, &h, source)
}

/// Strong-stability certificate for `policy` on `instance`, using `p_opt`
/// when given and the policy's cost-to-go otherwise.
pub fn strong_stability_certificate(
    instance: &LqrInstance,
    policy: &Policy,
    p_opt: Option<&Mat>,
) -> Result<StabilityCertificate> {
    let m = instance.closed_loop(policy);
    let rho = spectral_radius(&m)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    match p_opt {
        Some(p) => certify_with_p(&m, &policy.k_mat, p, CertificateSource::Supplied),
        None => {
            let p = policy_cost(instance, policy)?.p;
            certify_with_p(&m, &policy.k_mat, &p, CertificateSource::CostToGo)
        }
    }
}

/// `P^{1/2}` with the module's eigenvalue floor.
pub fn sqrt_psd(p: &Mat) -> Mat {
    psd_sqrt(p, SQRT_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use crate::system::{random_instance, BoundParams, Dims};

    const GOLDEN: f64 = 1.618_033_988_749_895;

    /// Scalar value iteration written out longhand as an independent oracle.
    fn scalar_oracle(a: f64, b: f64, q: f64, r: f64) -> f64 {
        let mut p = q;
        for _ in 0..10_000 {
            p = q + a * a * p - (a * p * b).powi(2) / (r + b * b * p);
        }
        p
    }

    #[test]
    fn dare_examples() {
        let sol = solve_dare(
            &LqrInstance::scalar(0.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
            1e-12,
        )
        .unwrap();
        assert!((sol.p_star[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(sol.k_star[(0, 0)].abs() < 1e-12);
        assert!((sol.j_star - 1.0).abs() < 1e-12);

        let sol = solve_dare(&LqrInstance::golden(), 1e-12).unwrap();
        assert!((sol.p_star[(0, 0)] - GOLDEN).abs() < 1e-10);
        assert!((sol.p_star[(0, 0)] - scalar_oracle(1.0, 1.0, 1.0, 1.0)).abs() < 1e-10);
        assert!((sol.k_star[(0, 0)] + 0.618_033_988_749_895).abs() < 1e-10);
        assert!((sol.j_star - GOLDEN).abs() < 1e-10);

        let bad = LqrInstance::scalar(1.1, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(solve_dare(&bad, 1e-10), Err(Error::NoSolution(_))));
    }

    #[test]
    fn lyapunov_examples() {
        let rhs = Mat::from_element(1, 1, 1.0);
        let x = solve_lyapunov(&Mat::zeros(1, 1), &rhs, LyapunovForm::Forward).unwrap();
        assert_eq!(x, rhs);
        let x = solve_lyapunov(&Mat::from_element(1, 1, 0.5), &rhs, LyapunovForm::Forward).unwrap();
        assert!((x[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        assert!(matches!(
            solve_lyapunov(&Mat::from_element(1, 1, 1.0), &rhs, LyapunovForm::Forward),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn lyapunov_matches_series() {
        let mut rng = SimRng::new(8);
        for _ in 0..20 {
            let mut m = rng.standard_normal_mat(2, 2);
            let rho = spectral_radius(&m).unwrap();
            m *= 0.9 / rho;
            let g = rng.standard_normal_mat(2, 2);
            let rhs = &g * g.transpose();
            for form in [LyapunovForm::Forward, LyapunovForm::Transposed] {
                let x = solve_lyapunov(&m, &rhs, form).unwrap();
                assert!(lyapunov_residual(&m, &rhs, &x, form) < 1e-10 * x.amax().max(1.0));
                let mut series = Mat::zeros(2, 2);
                let mut pw = Mat::identity(2, 2);
                for _ in 0..1000 {
                    series += match form {
                        LyapunovForm::Forward => &pw * &rhs * pw.transpose(),
                        LyapunovForm::Transposed => pw.transpose() * &rhs * &pw,
                    };
                    pw = &pw * &m;
                }
                assert!((series - &x).amax() < 1e-8 * x.amax().max(1.0));
            }
        }
    }

    #[test]
    fn policy_cost_examples() {
        let gold = LqrInstance::golden();
        let sol = solve_dare(&gold, 1e-12).unwrap();
        let pc = policy_cost(&gold, &sol.policy()).unwrap();
        assert!((pc.j - GOLDEN).abs() < 1e-9);
        assert!((pc.p[(0, 0)] - GOLDEN).abs() < 1e-9);

        let inst = LqrInstance::scalar(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let pc = policy_cost(&inst, &Policy::scalar(0.0)).unwrap();
        assert!((pc.j - 1.0).abs() < 1e-14 && (pc.x_cov[(0, 0)] - 1.0).abs() < 1e-14);

        let inst = LqrInstance::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let pc = policy_cost(&inst, &Policy::scalar(0.0)).unwrap();
        assert!((pc.j - 4.0 / 3.0).abs() < 1e-14);
        assert!((inner(&pc.p, &inst.w) - pc.j).abs() < 1e-12);

        assert!(policy_cost(&gold, &Policy::scalar(0.5)).is_err());
    }

    #[test]
    fn dare_optimality_and_bellman() {
        let bounds = BoundParams {
            alpha0: 0.5,
            alpha1: 2.0,
            sigma: 1.0,
            vartheta: 1.5,
            nu: 1e6,
        };
        let mut rng = SimRng::new(21);
        for trial in 0..50 {
            let dims = Dims::new(1 + trial % 4, 1 + (trial / 4) % 4).unwrap();
            let inst = random_instance(dims, bounds, &mut rng).unwrap();
            let sol = solve_dare(&inst, 1e-12).unwrap();
            for _ in 0..20 {
                let k = &sol.k_star + rng.standard_normal_mat(dims.k, dims.d) * 0.1;
                let policy = Policy { k_mat: k.clone() };
                let m = inst.closed_loop(&policy);
                if spectral_radius(&m).unwrap() >= 1.0 {
                    continue;
                }
                let j = policy_cost(&inst, &policy).unwrap().j;
                assert!(sol.j_star <= j + 1e-9 * j.abs().max(1.0));
                let rhs = &inst.q + k.transpose() * &inst.r * &k + m.transpose() * &sol.p_star * &m;
                assert!(linalg::min_eig(&(rhs - &sol.p_star)) >= -1e-8);
            }
        }
    }

    #[test]
    fn certificate_examples() {
        let inst = LqrInstance::scalar(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let c = strong_stability_certificate(&inst, &Policy::scalar(0.0), None).unwrap();
        assert_eq!(c.l[(0, 0)], 0.0);
        assert_eq!(c.gamma, 1.0);

        let gold = LqrInstance::golden();
        let sol = solve_dare(&gold, 1e-12).unwrap();
        let c = strong_stability_certificate(&gold, &sol.policy(), Some(&sol.p_star)).unwrap();
        let kappa = gold.bounds.kappa();
        assert!(op_norm(&c.l).powi(2) <= 1.0 - kappa.powi(-2));
        let rebuilt = &c.h * &c.l * linalg::spd_inverse(&c.h, "H").unwrap();
        assert!((rebuilt - gold.closed_loop(&sol.policy())).amax() < 1e-12);

        let m = Mat::from_row_slice(2, 2, &[0.5, 0.2, 0.2, -0.3]);
        let c = certify_with_h(
            &m,
            &Mat::zeros(1, 2),
            &Mat::identity(2, 2),
            CertificateSource::Explicit,
        )
        .unwrap();
        assert!((c.gamma - (1.0 - spectral_radius(&m).unwrap())).abs() < 1e-12);

        assert!(matches!(
            strong_stability_certificate(&gold, &Policy::scalar(0.5), None),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn cost_to_go_certificate_contracts() {
        let mut rng = SimRng::new(3);
        let bounds = BoundParams {
            alpha0: 0.5,
            alpha1: 2.0,
            sigma: 1.0,
            vartheta: 1.5,
            nu: 1e6,
        };
        for _ in 0..30 {
            let inst = random_instance(Dims::new(3, 2).unwrap(), bounds, &mut rng).unwrap();
            let sol = solve_dare(&inst, 1e-12).unwrap();
            let c = strong_stability_certificate(&inst, &sol.policy(), None).unwrap();
            assert!(c.gamma > 0.0 && c.kappa >= 1.0);
        }
    }
}
