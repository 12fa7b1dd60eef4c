//! The optimistic learning loop.
//!
//! Each round: observe `x_t`; on an epoch trigger re-estimate `(A B)`, solve
//! the relaxed SDP around the estimate with the current `V_t`, and extract
//! `K_t`; otherwise keep `K_{t-1}`. Play `u_t = K_t x_t` and feed `(z_t,
//! x_{t+1})` to the estimator.
//!
//! The learner only ever sees a [`Plant`]; evaluation code owns the truth.

pub mod monitor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorState;
use crate::linalg::{self, joint, Mat, Vector};
use crate::riccati::solve_dare;
use crate::rng::SimRng;
use crate::sdp::{
    self, build_relaxed_sdp, extract_policy, relaxation_admissible, solve_sdp, SdpStatus,
};
use crate::system::{
    cumulative_regret, BoundParams, Dims, KnownParams, LqrInstance, Plant, SimulatedPlant,
    Trajectory,
};

pub use monitor::{
    failure_allowance, good_event_failure_fraction, good_event_monitor, regret_decomposition,
    GoodEventFlags, RegretDecomposition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsMode {
    Theory,
    Practical,
}

impl std::str::FromStr for ConstantsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(ConstantsMode::Theory),
            "practical" => Ok(ConstantsMode::Practical),
            other => Err(Error::Config(format!("unknown constants mode {other:?}"))),
        }
    }
}

/// `μ, λ, β` and the prior error budget `ε = 1/(4λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub mu: f64,
    pub lambda: f64,
    pub beta: f64,
    pub epsilon_budget: f64,
}

fn check_horizon(horizon: usize, delta: f64) -> Result<()> {
    if horizon < 2 {
        return Err(Error::InvalidArgument(format!(
            "horizon must be at least 2, got {horizon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// The analysis constants:
/// `μ = 5ϑ√T`, `λ = 2¹¹ν⁵ϑ√T/(α₀⁵σ¹⁰)`, `β = 2¹⁸ν⁴n² log(T/δ)/(α₀⁴σ⁶)`.
pub fn theory_params(
    bounds: &BoundParams,
    dims: Dims,
    horizon: usize,
    delta: f64,
) -> Result<Constants> {
    check_horizon(horizon, delta)?;
    bounds.validate()?;
    let BoundParams {
        alpha0,
        sigma,
        vartheta,
        nu,
        ..
    } = *bounds;
    let sqrt_t = (horizon as f64).sqrt();
    let n = dims.n() as f64;
    let lambda = 2f64.powi(11) * nu.powi(5) * vartheta * sqrt_t / (alpha0.powi(5) * sigma.powi(10));
    let beta = 2f64.powi(18) * nu.powi(4) * n * n * (horizon as f64 / delta).ln()
        / (alpha0.powi(4) * sigma.powi(6));
    Ok(Constants {
        mu: 5.0 * vartheta * sqrt_t,
        lambda,
        beta,
        epsilon_budget: 1.0 / (4.0 * lambda),
    })
}

/// [`theory_params`] for a concrete noise covariance; refuses `W ≠ σ²I`.
pub fn theory_params_for(known: &KnownParams, horizon: usize, delta: f64) -> Result<Constants> {
    let s2 = known.bounds.sigma.powi(2);
    let target = Mat::identity(known.dims.d, known.dims.d) * s2;
    if (&known.w - target).amax() > 1e-12 * s2.max(1.0) {
        return Err(Error::InvalidArgument(
            "theory constants assume W = sigma^2 I; this W is not spherical".into(),
        ));
    }
    theory_params(&known.bounds, known.dims, horizon, delta)
}

/// Scalar multipliers for practical mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PracticalMultipliers {
    pub c_mu: f64,
    pub c_lambda: f64,
    pub c_beta: f64,
    /// Raise `λ` to `νμ/(α₀σ²)` so that `V_t ⪰ λI` meets the hypothesis of
    /// the policy-extraction identity from the first round.
    pub admissible_lambda: bool,
}

impl Default for PracticalMultipliers {
    fn default() -> Self {
        PracticalMultipliers {
            c_mu: 1.0,
            c_lambda: 1.0,
            c_beta: 1.0,
            admissible_lambda: false,
        }
    }
}

/// `μ = c_μ ϑ√T`, `λ = c_λ √T`, `β = c_β n log(T/δ)`, with the optional
/// floor `λ ≥ νμ/(α₀σ²)`.
pub fn practical_params(
    bounds: &BoundParams,
    dims: Dims,
    horizon: usize,
    delta: f64,
    mult: PracticalMultipliers,
) -> Result<Constants> {
    check_horizon(horizon, delta)?;
    let sqrt_t = (horizon as f64).sqrt();
    let mu = mult.c_mu * bounds.vartheta * sqrt_t;
    let mut lambda = mult.c_lambda * sqrt_t;
    if mult.admissible_lambda {
        lambda = lambda.max(bounds.nu * mu / (bounds.alpha0 * bounds.sigma.powi(2)));
    }
    Ok(Constants {
        mu,
        lambda,
        beta: mult.c_beta * dims.n() as f64 * (horizon as f64 / delta).ln(),
        epsilon_budget: 1.0 / (4.0 * lambda),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsloConfig {
    pub horizon: usize,
    pub delta: f64,
    pub constants_mode: ConstantsMode,
    pub mu: f64,
    pub lambda: f64,
    pub beta: f64,
    /// `(A₀ B₀)`.
    #[serde(with = "crate::serde_mat")]
    pub prior: Mat,
    pub prior_error_budget: f64,
    pub bounds: BoundParams,
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
    /// Relative threshold for the `Σxx` pseudo-inverse.
    pub pinv_threshold: f64,
    /// Practical mode only: keep the previous gain when an epoch's SDP fails.
    pub fallback_on_sdp_failure: bool,
    /// Names of the constants replaced by explicit overrides.
    pub overrides: Vec<String>,
}

impl OsloConfig {
    fn from_constants(
        mode: ConstantsMode,
        c: Constants,
        bounds: BoundParams,
        horizon: usize,
        delta: f64,
        prior: Mat,
    ) -> Self {
        OsloConfig {
            horizon,
            delta,
            constants_mode: mode,
            mu: c.mu,
            lambda: c.lambda,
            beta: c.beta,
            prior,
            prior_error_budget: c.epsilon_budget,
            bounds,
            sdp_tol: sdp::DEFAULT_TOL,
            sdp_max_iters: sdp::DEFAULT_MAX_ITERS,
            pinv_threshold: sdp::DEFAULT_PINV_THRESHOLD,
            fallback_on_sdp_failure: false,
            overrides: Vec::new(),
        }
    }

    pub fn theory(known: &KnownParams, horizon: usize, delta: f64, prior: Mat) -> Result<Self> {
        let c = theory_params_for(known, horizon, delta)?;
        let cfg = Self::from_constants(
            ConstantsMode::Theory,
            c,
            known.bounds,
            horizon,
            delta,
            prior,
        );
        cfg.validate(known.dims)?;
        Ok(cfg)
    }

    pub fn practical(
        known: &KnownParams,
        horizon: usize,
        delta: f64,
        prior: Mat,
        mult: PracticalMultipliers,
    ) -> Result<Self> {
        let c = practical_params(&known.bounds, known.dims, horizon, delta, mult)?;
        let cfg = Self::from_constants(
            ConstantsMode::Practical,
            c,
            known.bounds,
            horizon,
            delta,
            prior,
        );
        cfg.validate(known.dims)?;
        Ok(cfg)
    }

    fn mark(&mut self, name: &str) {
        if !self.overrides.iter().any(|o| o == name) {
            self.overrides.push(name.to_string());
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self.mark("mu");
        self
    }

    /// Also moves the prior error budget to `1/(4λ)`.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self.prior_error_budget = 1.0 / (4.0 * lambda);
        self.mark("lambda");
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self.mark("beta");
        self
    }

    pub fn validate(&self, dims: Dims) -> Result<()> {
        check_horizon(self.horizon, self.delta)?;
        self.bounds.validate()?;
        for (name, v) in [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("beta", self.beta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.prior.shape() != (dims.d, dims.n()) {
            return Err(Error::dims(
                "prior",
                format!("{}x{}", dims.d, dims.n()),
                format!("{:?}", self.prior.shape()),
            ));
        }
        if !(self.sdp_tol > 0.0) || self.sdp_max_iters == 0 {
            return Err(Error::Config(
                "SDP tolerance and iteration budget must be positive".into(),
            ));
        }
        if self.constants_mode == ConstantsMode::Theory {
            if !self.overrides.is_empty() {
                return Err(Error::Config(format!(
                    "theory mode does not accept overrides ({})",
                    self.overrides.join(", ")
                )));
            }
            if self.lambda < 1.0 || self.beta < 1.0 {
                return Err(Error::Config(
                    "theory mode needs lambda >= 1 and beta >= 1".into(),
                ));
            }
            if self.fallback_on_sdp_failure {
                return Err(Error::Config(
                    "SDP fallback is a practical-mode option".into(),
                ));
            }
        }
        Ok(())
    }

    /// Non-binding checks of the horizon conditions the analysis relies on.
    pub fn advisories(&self) -> Vec<String> {
        let mut out = Vec::new();
        let t = self.horizon as f64;
        if t < self.lambda {
            out.push(format!(
                "advisory: T = {t} is below lambda = {:.3e}",
                self.lambda
            ));
        }
        if t < self.bounds.vartheta.powi(-2) {
            out.push(format!("advisory: T = {t} is below vartheta^-2"));
        }
        if t < self.prior.nrows() as f64 {
            out.push(format!("advisory: T = {t} is below d"));
        }
        if !self.overrides.is_empty() {
            out.push(format!(
                "practical overrides: {}",
                self.overrides.join(", ")
            ));
        }
        out
    }
}

/// The policy chosen at an epoch start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochPolicy {
    #[serde(with = "crate::serde_mat")]
    pub k: Mat,
    #[serde(with = "crate::serde_mat::opt_mat")]
    pub p: Option<Mat>,
    #[serde(with = "crate::serde_mat::opt_mat")]
    pub sigma: Option<Mat>,
    pub value: Option<f64>,
    pub status: Option<SdpStatus>,
    pub degenerate: bool,
    pub fixed_point_residual: Option<f64>,
}

/// How a gain is computed from the estimator at an epoch start.
pub trait PolicyRule {
    fn name(&self) -> &'static str;
    fn compute(
        &mut self,
        est: &EstimatorState,
        known: &KnownParams,
        cfg: &OsloConfig,
    ) -> Result<EpochPolicy>;
}

/// The relaxed SDP around the least-squares estimate.
#[derive(Debug, Default, Clone, Copy)]
pub struct OptimisticSdp;

impl PolicyRule for OptimisticSdp {
    fn name(&self) -> &'static str {
        "oslo"
    }

    fn compute(
        &mut self,
        est: &EstimatorState,
        known: &KnownParams,
        cfg: &OsloConfig,
    ) -> Result<EpochPolicy> {
        let (a, b) = (est.a_hat(), est.b_hat());
        let cost = known.cost_block();
        let problem = build_relaxed_sdp(&a, &b, &est.v, cfg.mu, &known.w, &cost)?;
        let sol = solve_sdp(&problem, cfg.sdp_tol, cfg.sdp_max_iters)?.require_optimal()?;
        let extracted = extract_policy(&sol, cfg.pinv_threshold)?;
        if extracted.degenerate {
            return Err(Error::Extraction(format!(
                "Σxx is numerically singular (min eigenvalue {:e})",
                extracted.min_eig_sigma_xx
            )));
        }
        let v_inv = est.v_inv();
        let rhs =
            sdp::fixed_point_rhs(&sol.p_dual, &extracted.policy, &a, &b, v_inv, cfg.mu, &cost);
        let residual = linalg::op_norm(&(rhs - &sol.p_dual));
        Ok(EpochPolicy {
            k: extracted.policy.k_mat,
            p: Some(sol.p_dual),
            sigma: Some(sol.sigma),
            value: Some(sol.value),
            status: Some(sol.status),
            degenerate: false,
            fixed_point_residual: Some(residual),
        })
    }
}

/// Plan with the point estimate as if it were exact.
#[derive(Debug, Default, Clone)]
pub struct CertaintyEquivalence {
    last: Option<EpochPolicy>,
}

impl PolicyRule for CertaintyEquivalence {
    fn name(&self) -> &'static str {
        "certainty_equivalence"
    }

    fn compute(
        &mut self,
        est: &EstimatorState,
        known: &KnownParams,
        _cfg: &OsloConfig,
    ) -> Result<EpochPolicy> {
        let inst = LqrInstance::new(
            est.a_hat(),
            est.b_hat(),
            known.q.clone(),
            known.r.clone(),
            known.w.clone(),
            known.bounds,
        );
        let attempt = inst.and_then(|inst| solve_dare(&inst, 1e-10));
        match attempt {
            Ok(sol) => {
                let out = EpochPolicy {
                    value: Some(sol.j_star),
                    k: sol.k_star,
                    p: Some(sol.p_star),
                    sigma: None,
                    status: None,
                    degenerate: false,
                    fixed_point_residual: None,
                };
                self.last = Some(out.clone());
                Ok(out)
            }
            Err(e) => {
                let prev = self.last.clone().unwrap_or_else(|| EpochPolicy {
                    k: Mat::zeros(known.dims.k, known.dims.d),
                    p: None,
                    sigma: None,
                    value: None,
                    status: None,
                    degenerate: false,
                    fixed_point_residual: None,
                });
                log::warn!("certainty equivalence: Riccati solve failed on estimates ({e}); keeping previous gain");
                Ok(prev)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// First round of the epoch (1-based).
    pub start: usize,
    /// `(A_τ B_τ)`.
    #[serde(with = "crate::serde_mat")]
    pub theta: Mat,
    /// `V_τ`.
    #[serde(with = "crate::serde_mat")]
    pub v: Mat,
    pub policy: EpochPolicy,
    /// `μ ≥ 1 + 2ϑ||V_τ||^{1/2}`.
    pub admissible: bool,
    /// The gain was carried over after a failed solve.
    pub fell_back: bool,
}

/// What the learner itself produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerLog {
    pub epochs: Vec<EpochRecord>,
    /// `z_tᵀ V_t⁻¹ z_t` before the update at round t.
    pub quad_v_t: Vec<f64>,
    /// `z_tᵀ V_τ⁻¹ z_t` with `τ` the epoch start.
    pub quad_v_tau: Vec<f64>,
    pub halted: Option<String>,
    pub diagnostics: Vec<String>,
}

/// Run the learner for `cfg.horizon` rounds against `plant`.
///
/// Failures inside the loop halt the run and are reported in
/// [`LearnerLog::halted`]; only invalid configuration is an error.
pub fn run_learner(
    plant: &mut dyn Plant,
    cfg: &OsloConfig,
    rule: &mut dyn PolicyRule,
) -> Result<LearnerLog> {
    let known = plant.known().clone();
    cfg.validate(known.dims)?;
    let mut est = EstimatorState::new(cfg.lambda, cfg.beta, cfg.prior.clone(), known.dims)?;
    let mut log = LearnerLog {
        epochs: Vec::new(),
        quad_v_t: Vec::with_capacity(cfg.horizon),
        quad_v_tau: Vec::with_capacity(cfg.horizon),
        halted: None,
        diagnostics: cfg.advisories(),
    };
    if plant.state().iter().any(|v| *v != 0.0) {
        log.diagnostics.push("x1 is nonzero".into());
    }
    let mut k = Mat::zeros(known.dims.k, known.dims.d);
    let mut v_tau_inv = est.v_inv().clone();
    for t in 1..=cfg.horizon {
        let x = plant.state().clone();
        if est.epoch_trigger() {
            if let Err(e) = est.refresh_estimate() {
                log.halted = Some(format!("round {t}: estimation failed: {e}"));
                break;
            }
            let admissible = relaxation_admissible(cfg.mu, cfg.bounds.vartheta, &est.v);
            match rule.compute(&est, &known, cfg) {
                Ok(policy) => {
                    k = policy.k.clone();
                    log.epochs.push(EpochRecord {
                        start: t,
                        theta: est.theta.clone(),
                        v: est.v.clone(),
                        policy,
                        admissible,
                        fell_back: false,
                    });
                }
                Err(e) if cfg.fallback_on_sdp_failure && !log.epochs.is_empty() => {
                    log::warn!("round {t}: policy computation failed ({e}); keeping previous gain");
                    log.diagnostics
                        .push(format!("round {t}: fallback after: {e}"));
                    let mut policy = log.epochs.last().expect("nonempty").policy.clone();
                    policy.k = k.clone();
                    log.epochs.push(EpochRecord {
                        start: t,
                        theta: est.theta.clone(),
                        v: est.v.clone(),
                        policy,
                        admissible,
                        fell_back: true,
                    });
                }
                Err(e) => {
                    log.halted = Some(format!("round {t}: policy computation failed: {e}"));
                    break;
                }
            }
            est.start_epoch();
            v_tau_inv = est.v_inv().clone();
        }
        let u = &k * &x;
        let x_next = match plant.apply(&u) {
            Ok(x) => x,
            Err(e) => {
                log.halted = Some(format!("round {t}: {e}"));
                break;
            }
        };
        let z = joint(&x, &u);
        log.quad_v_tau.push(z.dot(&(&v_tau_inv * &z)));
        match est.update(&z, &x_next) {
            Ok(q) => log.quad_v_t.push(q),
            Err(e) => {
                log.halted = Some(format!("round {t}: {e}"));
                break;
            }
        }
    }
    if let Some(h) = &log.halted {
        log::warn!("run halted: {h}");
    }
    Ok(log)
}

/// A complete evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    pub constants_mode: ConstantsMode,
    pub config: OsloConfig,
    #[serde(with = "crate::serde_mat::vector")]
    pub x1: Vector,
    pub trajectory: Trajectory,
    pub epochs: Vec<EpochRecord>,
    pub quad_v_t: Vec<f64>,
    pub quad_v_tau: Vec<f64>,
    pub j_star: f64,
    pub regret: Vec<f64>,
    pub halted: Option<String>,
    pub diagnostics: Vec<String>,
}

impl RunRecord {
    pub fn epoch_starts(&self) -> Vec<usize> {
        self.epochs.iter().map(|e| e.start).collect()
    }

    /// Index into `epochs` of the epoch containing round `t` (1-based).
    pub fn epoch_index(&self, t: usize) -> usize {
        self.epochs
            .partition_point(|e| e.start <= t)
            .saturating_sub(1)
    }

    /// Rounds actually played.
    pub fn rounds(&self) -> usize {
        self.trajectory.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }

    pub fn completed(&self) -> bool {
        self.halted.is_none() && self.rounds() == self.config.horizon
    }
}

/// Run a learner with `rule` on a simulated copy of `instance`, then score it.
pub fn run_with_rule(
    instance: &LqrInstance,
    cfg: &OsloConfig,
    rule: &mut dyn PolicyRule,
    x1: &Vector,
    rng: SimRng,
) -> Result<RunRecord> {
    let seed = rng.seed();
    let mut plant = SimulatedPlant::new(instance.clone(), x1.clone(), rng)?;
    let log = run_learner(&mut plant, cfg, rule)?;
    score(
        instance,
        cfg,
        rule.name(),
        seed,
        x1,
        log,
        plant.into_trajectory(),
    )
}

/// Attach the trajectory and regret to a learner log.
pub(crate) fn score(
    instance: &LqrInstance,
    cfg: &OsloConfig,
    algorithm: &str,
    seed: u64,
    x1: &Vector,
    log: LearnerLog,
    trajectory: Trajectory,
) -> Result<RunRecord> {
    let j_star = solve_dare(instance, 1e-12)?.j_star;
    let regret = cumulative_regret(&trajectory.costs, j_star);
    Ok(RunRecord {
        algorithm: algorithm.to_string(),
        seed,
        constants_mode: cfg.constants_mode,
        config: cfg.clone(),
        x1: x1.clone(),
        trajectory,
        epochs: log.epochs,
        quad_v_t: log.quad_v_t,
        quad_v_tau: log.quad_v_tau,
        j_star,
        regret,
        halted: log.halted,
        diagnostics: log.diagnostics,
    })
}

/// OSLO on a simulated copy of `instance`.
pub fn run_oslo(
    instance: &LqrInstance,
    cfg: &OsloConfig,
    x1: &Vector,
    rng: SimRng,
) -> Result<RunRecord> {
    run_with_rule(instance, cfg, &mut OptimisticSdp, x1, rng)
}

/// The same loop with certainty-equivalent planning.
pub fn certainty_equivalence_baseline(
    instance: &LqrInstance,
    cfg: &OsloConfig,
    x1: &Vector,
    rng: SimRng,
) -> Result<RunRecord> {
    run_with_rule(instance, cfg, &mut CertaintyEquivalence::default(), x1, rng)
}

/// `||(A₀ B₀) − (A* B*)||²_F`, for checking the prior against its budget.
pub fn prior_error(cfg: &OsloConfig, truth: &LqrInstance) -> f64 {
    (&cfg.prior - truth.theta()).norm_squared()
}
