//! Regularized least squares for `(A B)` with the confidence matrix
//! `V_t = λI + β⁻¹ Σ z_s z_sᵀ` and the determinant-doubling epoch rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::system::{Dims, LqrInstance};

/// Full recomputation of `V⁻¹` and `log det V` every this many updates.
pub const REFRESH_EVERY: usize = 1024;

/// Slack on the strict `det V_t > 2 det V_τ` comparison, in log space.
const TRIGGER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorState {
    pub dims: Dims,
    pub lambda: f64,
    pub beta: f64,
    /// `(A₀ B₀)`.
    #[serde(with = "crate::serde_mat")]
    pub prior: Mat,
    /// `V_t`.
    #[serde(with = "crate::serde_mat")]
    pub v: Mat,
    /// `V_t⁻¹`, kept current by Sherman-Morrison.
    #[serde(with = "crate::serde_mat")]
    v_inv: Mat,
    /// `log det V_t`.
    pub log_det: f64,
    /// `log det V_τ` at the current epoch start.
    pub log_det_anchor: f64,
    /// `Σ x_{s+1} z_sᵀ`.
    #[serde(with = "crate::serde_mat")]
    pub cross_term: Mat,
    /// Current estimate `(A_t B_t)`, refreshed by [`EstimatorState::refresh_estimate`].
    #[serde(with = "crate::serde_mat")]
    pub theta: Mat,
    /// Number of updates so far; the learner is at round `step + 1`.
    pub step: usize,
}

/// `Δ = (A_t B_t) − (A* B*)` and its weighted size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorDiagnostic {
    #[serde(with = "crate::serde_mat")]
    pub delta: Mat,
    /// `trace(Δ V_t Δᵀ)`.
    pub weighted_error: f64,
    /// The concentration bound with `det(V_t) / det(V_1)`.
    pub bound: f64,
    /// The same bound with `det(V_t) / det(β V_1)`.
    pub bound_beta_variant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochCountBound {
    /// `⌊log₂(det V_t / det V_1)⌋`.
    pub doublings: u32,
    /// `2 n log₂ T`.
    pub bound: f64,
    pub within: bool,
}

impl EstimatorState {
    /// `V_1 = λI`, estimates equal to the prior.
    pub fn new(lambda: f64, beta: f64, prior: Mat, dims: Dims) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda and beta must be positive, got {lambda}, {beta}"
            )));
        }
        let n = dims.n();
        if prior.shape() != (dims.d, n) {
            return Err(Error::dims(
                "estimator prior",
                format!("{}x{n}", dims.d),
                format!("{:?}", prior.shape()),
            ));
        }
        let log_det = n as f64 * lambda.ln();
        Ok(EstimatorState {
            dims,
            lambda,
            beta,
            theta: prior.clone(),
            prior,
            v: Mat::identity(n, n) * lambda,
            v_inv: Mat::identity(n, n) / lambda,
            log_det,
            log_det_anchor: log_det,
            cross_term: Mat::zeros(dims.d, n),
            step: 0,
        })
    }

    pub fn v_inv(&self) -> &Mat {
        &self.v_inv
    }

    pub fn det(&self) -> f64 {
        self.log_det.exp()
    }

    pub fn det_anchor(&self) -> f64 {
        self.log_det_anchor.exp()
    }

    /// `log det V_1`.
    pub fn log_det_initial(&self) -> f64 {
        self.dims.n() as f64 * self.lambda.ln()
    }

    /// `zᵀ V_t⁻¹ z` for the current `V_t`.
    pub fn quad_form(&self, z: &Vector) -> f64 {
        z.dot(&(&self.v_inv * z))
    }

    /// Add the pair `(z_t, x_{t+1})`. Returns `z_tᵀ V_t⁻¹ z_t` with `V_t`
    /// taken before the update.
    pub fn update(&mut self, z: &Vector, x_next: &Vector) -> Result<f64> {
        let n = self.dims.n();
        if z.len() != n || x_next.len() != self.dims.d {
            return Err(Error::dims(
                "estimator update",
                format!("z: {n}, x: {}", self.dims.d),
                format!("z: {}, x: {}", z.len(), x_next.len()),
            ));
        }
        if z.iter().chain(x_next.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: self.step + 1,
                what: "estimator input",
            });
        }
        let vz = &self.v_inv * z;
        let q = z.dot(&vz);
        self.v += z * z.transpose() / self.beta;
        self.v_inv -= &vz * vz.transpose() / (self.beta + q);
        self.log_det += (q / self.beta).ln_1p();
        self.cross_term += x_next * z.transpose();
        self.step += 1;
        if self.step % REFRESH_EVERY == 0 {
            self.refresh()?;
        }
        Ok(q)
    }

    /// Recompute `V⁻¹` and `log det V` from scratch.
    pub fn refresh(&mut self) -> Result<()> {
        let chol = linalg::cholesky(&self.v, "V")?;
        self.v_inv = linalg::sym(&chol.inverse());
        self.log_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        Ok(())
    }

    /// `(λΘ₀ + β⁻¹ Σ x_{s+1} z_sᵀ) V_t⁻¹`, via a Cholesky solve.
    pub fn least_squares(&self) -> Result<Mat> {
        let rhs = &self.prior * self.lambda + &self.cross_term / self.beta;
        let chol = linalg::cholesky(&self.v, "V")?;
        Ok(chol.solve(&rhs.transpose()).transpose())
    }

    /// Recompute the least-squares estimate and store it in `theta`.
    pub fn refresh_estimate(&mut self) -> Result<&Mat> {
        self.theta = self.least_squares()?;
        Ok(&self.theta)
    }

    pub fn a_hat(&self) -> Mat {
        self.theta.columns(0, self.dims.d).into_owned()
    }

    pub fn b_hat(&self) -> Mat {
        self.theta.columns(self.dims.d, self.dims.k).into_owned()
    }

    /// True at the first round and whenever `det V_t > 2 det V_τ`.
    pub fn epoch_trigger(&self) -> bool {
        self.step == 0
            || self.log_det - self.log_det_anchor > std::f64::consts::LN_2 + TRIGGER_SLACK
    }

    /// Reset the anchor to the current determinant.
    pub fn start_epoch(&mut self) {
        self.log_det_anchor = self.log_det;
    }

    /// Error of the stored estimate against the truth, plus the concentration
    /// bound at confidence `delta`.
    pub fn weighted_error(&self, truth: &LqrInstance, delta: f64) -> ErrorDiagnostic {
        weighted_error_of(&self.theta, &self.v, truth, self, delta)
    }

    /// Concentration bound `(4σ²d/β) log((d/δ) det V_t / det V_1) + 2λ||Δ₀||²_F`.
    pub fn concentration_bound(
        &self,
        sigma: f64,
        delta: f64,
        prior_error_fro_sq: f64,
        beta_variant: bool,
    ) -> f64 {
        let d = self.dims.d as f64;
        let mut log_ratio = self.log_det - self.log_det_initial();
        if beta_variant {
            log_ratio -= self.dims.n() as f64 * self.beta.ln();
        }
        let log_term = (d / delta).ln() + log_ratio;
        4.0 * sigma * sigma * d / self.beta * log_term + 2.0 * self.lambda * prior_error_fro_sq
    }

    pub fn epoch_count_bound(&self, horizon: usize) -> EpochCountBound {
        let ratio = (self.log_det - self.log_det_initial()) / std::f64::consts::LN_2;
        let doublings = ratio.max(0.0).floor() as u32;
        let bound = 2.0 * self.dims.n() as f64 * (horizon as f64).log2();
        EpochCountBound {
            doublings,
            bound,
            within: doublings as f64 <= bound,
        }
    }
}

/// `trace(Δ V Δᵀ)` for an arbitrary estimate and weighting matrix.
pub fn weighted_error_of(
    theta: &Mat,
    v: &Mat,
    truth: &LqrInstance,
    state: &EstimatorState,
    delta: f64,
) -> ErrorDiagnostic {
    let diff = theta - truth.theta();
    let prior_err = (&state.prior - truth.theta()).norm_squared();
    let sigma = truth.bounds.sigma;
    ErrorDiagnostic {
        weighted_error: (&diff * v * diff.transpose()).trace().max(0.0),
        bound: state.concentration_bound(sigma, delta, prior_err, false),
        bound_beta_variant: state.concentration_bound(sigma, delta, prior_err, true),
        delta: diff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn dims11() -> Dims {
        Dims::new(1, 1).unwrap()
    }

    #[test]
    fn init_examples() {
        let s = EstimatorState::new(2.0, 1.0, Mat::zeros(1, 2), dims11()).unwrap();
        assert!((s.det_anchor() - 4.0).abs() < 1e-12);
        let prior = Mat::from_row_slice(1, 2, &[0.3, -0.7]);
        let s = EstimatorState::new(5.0, 3.0, prior.clone(), dims11()).unwrap();
        assert_eq!(s.least_squares().unwrap(), prior);
        let s = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 2), dims11()).unwrap();
        assert_eq!(s.v, Mat::identity(2, 2));
        assert!(EstimatorState::new(0.0, 1.0, Mat::zeros(1, 2), dims11()).is_err());
        assert!(EstimatorState::new(1.0, -1.0, Mat::zeros(1, 2), dims11()).is_err());
    }

    #[test]
    fn update_examples() {
        let mut s = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 2), dims11()).unwrap();
        s.update(
            &Vector::from_column_slice(&[1.0, 0.0]),
            &Vector::from_column_slice(&[1.0]),
        )
        .unwrap();
        assert_eq!(s.v, Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert!((s.det() - 2.0).abs() < 1e-12);
        let theta = s.least_squares().unwrap();
        assert!((theta - Mat::from_row_slice(1, 2, &[0.5, 0.0])).amax() < 1e-15);

        let before = s.clone();
        s.update(&Vector::zeros(2), &Vector::from_column_slice(&[4.0]))
            .unwrap();
        assert_eq!(s.v, before.v);
        assert_eq!(s.log_det, before.log_det);
        assert_eq!(s.step, before.step + 1);
    }

    #[test]
    fn incremental_determinant_tracks_direct() {
        let dims = Dims::new(2, 1).unwrap();
        let mut s = EstimatorState::new(1.0, 2.0, Mat::zeros(2, 3), dims).unwrap();
        let mut rng = SimRng::new(5);
        for i in 0..1000 {
            let z = rng.standard_normal_vec(3);
            let x = rng.standard_normal_vec(2);
            s.update(&z, &x).unwrap();
            if i % 97 == 0 {
                let direct = linalg::spd_log_det(&s.v, "V").unwrap();
                assert!(((s.log_det - direct).exp() - 1.0).abs() < 1e-6);
                assert!((s.v_inv() * &s.v - Mat::identity(3, 3)).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn noiseless_recovery() {
        let dims = Dims::new(2, 1).unwrap();
        let truth = Mat::from_row_slice(2, 3, &[0.5, 0.1, 1.0, -0.2, 0.3, 0.0]);
        let mut s = EstimatorState::new(1e-8, 1.0, Mat::zeros(2, 3), dims).unwrap();
        let mut rng = SimRng::new(1);
        for _ in 0..10 {
            let z = rng.standard_normal_vec(3);
            let x = &truth * &z;
            s.update(&z, &x).unwrap();
        }
        assert!((s.least_squares().unwrap() - truth).amax() < 1e-5);
    }

    #[test]
    fn normal_equations_hold() {
        let dims = Dims::new(2, 2).unwrap();
        let prior = Mat::from_row_slice(2, 4, &[0.1, 0.2, 0.3, 0.4, -0.1, 0.0, 0.5, 1.0]);
        let mut s = EstimatorState::new(3.0, 2.0, prior.clone(), dims).unwrap();
        let mut rng = SimRng::new(2);
        for _ in 0..300 {
            s.update(&rng.standard_normal_vec(4), &rng.standard_normal_vec(2))
                .unwrap();
        }
        let theta = s.least_squares().unwrap();
        let rhs = &prior * 3.0 + &s.cross_term / 2.0;
        assert!((theta * &s.v - &rhs).amax() <= 1e-10 * rhs.amax().max(1.0));
    }

    #[test]
    fn trigger_examples() {
        let z = |a: f64| Vector::from_column_slice(&[a, 0.0]);
        let x = Vector::from_column_slice(&[0.0]);
        let mut s = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 2), dims11()).unwrap();
        assert!(s.epoch_trigger());
        s.start_epoch();
        s.update(&z(0.5_f64.sqrt()), &x).unwrap();
        assert!(!s.epoch_trigger(), "det 1.5");
        let mut s2 = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 2), dims11()).unwrap();
        s2.update(&z(1.0), &x).unwrap();
        assert!(!s2.epoch_trigger(), "det exactly 2");
        let mut s3 = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 2), dims11()).unwrap();
        s3.update(&z(2.0_f64.sqrt()), &x).unwrap();
        assert!(s3.epoch_trigger(), "det 3");
        s3.start_epoch();
        assert!(!s3.epoch_trigger());
    }

    #[test]
    fn weighted_error_examples() {
        let truth = LqrInstance::golden();
        let mut s = EstimatorState::new(1.0, 1.0, truth.theta(), dims11()).unwrap();
        assert_eq!(s.weighted_error(&truth, 0.1).weighted_error, 0.0);
        s.theta = truth.theta() + Mat::from_row_slice(1, 2, &[0.1, 0.0]);
        let diag = weighted_error_of(
            &s.theta,
            &Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]),
            &truth,
            &s,
            0.1,
        );
        assert!((diag.weighted_error - 0.04).abs() < 1e-15);
    }

    #[test]
    fn epoch_count_examples() {
        let s = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 2), dims11()).unwrap();
        assert_eq!(s.epoch_count_bound(100).doublings, 0);
        let mut s = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 1), Dims { d: 1, k: 0 }).unwrap();
        s.update(
            &Vector::from_column_slice(&[7.0_f64.sqrt()]),
            &Vector::zeros(1),
        )
        .unwrap();
        assert_eq!(s.epoch_count_bound(100).doublings, 3);
    }

    #[test]
    fn monotone_v() {
        let mut s = EstimatorState::new(1.0, 1.0, Mat::zeros(1, 2), dims11()).unwrap();
        let mut rng = SimRng::new(3);
        let mut prev = s.v.clone();
        let mut prev_det = s.log_det;
        for _ in 0..100 {
            s.update(&rng.standard_normal_vec(2), &rng.standard_normal_vec(1))
                .unwrap();
            assert!(linalg::min_eig(&(&s.v - &prev)) >= -1e-12);
            assert!(s.log_det >= prev_det);
            prev = s.v.clone();
            prev_det = s.log_det;
        }
    }
}
