//! Exploration with a known strongly-stable policy before the learner starts.
//!
//! From `x₁ = 0`, play `u_t ~ N(K₀x_t, 2σ²κ₀² I)` for `T₀` rounds, collect
//! `V₀ = Σ z_t z_tᵀ`, and form the ridge estimate
//! `(A₀ B₀) = Σ_{t<T₀} x_{t+1} z_tᵀ (V₀ + σ²ϑ⁻² I)⁻¹`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, joint, Mat, Vector};
use crate::oslo::{self, OsloConfig, PolicyRule, RunRecord};
use crate::riccati::StabilityCertificate;
use crate::rng::SimRng;
use crate::system::{
    cumulative_regret, BoundParams, Dims, LqrInstance, Plant, Policy, SimulatedPlant,
};

/// Abort once a state exceeds this multiple of the high-probability bound.
const ABORT_FACTOR: f64 = 1e6;
/// Confidence used for the abort threshold only.
const ABORT_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupConfig {
    pub k0: Policy,
    pub kappa0: f64,
    pub gamma0: f64,
    pub t0: usize,
    pub sigma: f64,
}

impl WarmupConfig {
    /// Take `κ₀, γ₀` from a certificate for `K₀`.
    pub fn from_certificate(
        k0: Policy,
        cert: &StabilityCertificate,
        t0: usize,
        sigma: f64,
    ) -> Result<Self> {
        let cfg = WarmupConfig {
            k0,
            kappa0: cert.kappa,
            gamma0: cert.gamma.min(1.0),
            t0,
            sigma,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0 >= 1.0) || !self.kappa0.is_finite() {
            return Err(Error::Config(format!(
                "kappa0 must be at least 1, got {}",
                self.kappa0
            )));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 <= 1.0) {
            return Err(Error::Config(format!(
                "gamma0 must lie in (0, 1], got {}",
                self.gamma0
            )));
        }
        if self.t0 < 2 {
            return Err(Error::Config(format!(
                "warm-up needs at least 2 rounds, got {}",
                self.t0
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// `(d + kϑ²κ₀²)`, the effective dimension in the warm-up bounds.
    fn effective_dim(&self, dims: Dims, vartheta: f64) -> f64 {
        dims.d as f64 + dims.k as f64 * vartheta.powi(2) * self.kappa0.powi(2)
    }

    /// High-probability bound on `max_t ||x_t||`.
    pub fn state_norm_bound(&self, dims: Dims, vartheta: f64, delta: f64) -> f64 {
        4.0 * self.sigma * self.kappa0 / self.gamma0
            * (self.effective_dim(dims, vartheta) * (self.t0 as f64 / delta).ln().max(1.0)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupResult {
    /// `Σ_{t≤T₀} z_t z_tᵀ`.
    #[serde(with = "crate::serde_mat")]
    pub v0: Mat,
    #[serde(with = "crate::serde_mat")]
    pub a0_b0: Mat,
    /// `x_{T₀}`.
    #[serde(with = "crate::serde_mat::vector")]
    pub x_final: Vector,
    /// `x_{T₀+1}`, where the next phase starts.
    #[serde(with = "crate::serde_mat::vector")]
    pub handoff_state: Vector,
    pub trace_v0: f64,
    pub min_eig_v0: f64,
    /// `tr(Δ₀VΔ₀ᵀ)` with `V = V₀ + σ²ϑ⁻²I`, when the truth was available.
    pub est_error_weighted: Option<f64>,
    /// `x_1 .. x_{T₀+1}`.
    #[serde(with = "crate::serde_mat::vec_vector")]
    pub states: Vec<Vector>,
    #[serde(with = "crate::serde_mat::vec_vector")]
    pub actions: Vec<Vector>,
    /// `ϑ` used in the ridge offset.
    pub vartheta: f64,
    pub sigma: f64,
}

impl WarmupResult {
    pub fn t0(&self) -> usize {
        self.actions.len()
    }

    /// `V₀ + σ²ϑ⁻² I`.
    pub fn ridge_v(&self) -> Mat {
        let n = self.v0.nrows();
        &self.v0 + Mat::identity(n, n) * (self.sigma / self.vartheta).powi(2)
    }

    /// Rebuild `V₀` and `(A₀ B₀)` from the stored states and actions.
    pub fn recompute(&self) -> Result<(Mat, Mat)> {
        let z: Vec<Vector> = self
            .states
            .iter()
            .zip(&self.actions)
            .map(|(x, u)| joint(x, u))
            .collect();
        let n = self.v0.nrows();
        let d = self.a0_b0.nrows();
        let mut v0 = Mat::zeros(n, n);
        let mut cross = Mat::zeros(d, n);
        for (t, zt) in z.iter().enumerate() {
            v0.ger(1.0, zt, zt, 1.0);
            if t + 1 < z.len() {
                cross.ger(1.0, &self.states[t + 1], zt, 1.0);
            }
        }
        let v = &v0 + Mat::identity(n, n) * (self.sigma / self.vartheta).powi(2);
        let est = ridge_solve(&cross, &v)?;
        Ok((v0, est))
    }
}

fn ridge_solve(cross: &Mat, v: &Mat) -> Result<Mat> {
    let chol = linalg::cholesky(v, "warm-up V")?;
    Ok(chol.solve(&cross.transpose()).transpose())
}

/// Run the warm-up against `plant`, which must start at `x₁ = 0`.
/// `rng` drives the exploration noise only.
pub fn run_warmup_on(
    plant: &mut dyn Plant,
    cfg: &WarmupConfig,
    rng: &mut SimRng,
) -> Result<WarmupResult> {
    cfg.validate()?;
    let known = plant.known().clone();
    let dims = known.dims;
    if cfg.k0.k_mat.shape() != (dims.k, dims.d) {
        return Err(Error::dims(
            "warm-up K0",
            format!("{}x{}", dims.k, dims.d),
            format!("{:?}", cfg.k0.k_mat.shape()),
        ));
    }
    if plant.state().iter().any(|v| *v != 0.0) {
        return Err(Error::InvalidArgument(
            "warm-up must start from x1 = 0".into(),
        ));
    }
    let vartheta = known.bounds.vartheta;
    let limit = ABORT_FACTOR * cfg.state_norm_bound(dims, vartheta, ABORT_DELTA);
    let noise_scale = (2.0f64).sqrt() * cfg.sigma * cfg.kappa0;
    let n = dims.n();
    let mut v0 = Mat::zeros(n, n);
    let mut cross = Mat::zeros(dims.d, n);
    let mut states = Vec::with_capacity(cfg.t0 + 1);
    let mut actions = Vec::with_capacity(cfg.t0);
    for t in 1..=cfg.t0 {
        let x = plant.state().clone();
        if x.norm() > limit {
            return Err(Error::Aborted {
                step: t,
                reason: format!(
                    "state norm {:.3e} exceeds {limit:.3e}; K0 is likely not stabilizing",
                    x.norm()
                ),
            });
        }
        let u = cfg.k0.act(&x) + rng.standard_normal_vec(dims.k) * noise_scale;
        let z = joint(&x, &u);
        let x_next = plant.apply(&u)?;
        v0.ger(1.0, &z, &z, 1.0);
        if t < cfg.t0 {
            cross.ger(1.0, &x_next, &z, 1.0);
        }
        states.push(x);
        actions.push(u);
    }
    let handoff = plant.state().clone();
    let x_final = states.last().cloned().expect("t0 >= 2");
    states.push(handoff.clone());
    let v = &v0 + Mat::identity(n, n) * (cfg.sigma / vartheta).powi(2);
    let a0_b0 = ridge_solve(&cross, &v)?;
    Ok(WarmupResult {
        trace_v0: v0.trace(),
        min_eig_v0: linalg::min_eig(&v0),
        v0,
        a0_b0,
        x_final,
        handoff_state: handoff,
        est_error_weighted: None,
        states,
        actions,
        vartheta,
        sigma: cfg.sigma,
    })
}

/// Warm-up on a simulated copy of `instance`, with the weighted estimation
/// error filled in.
pub fn run_warmup(instance: &LqrInstance, cfg: &WarmupConfig, rng: SimRng) -> Result<WarmupResult> {
    let mut explore = rng.fork(1);
    let mut plant = SimulatedPlant::new(instance.clone(), Vector::zeros(instance.dims().d), rng)?;
    let mut res = run_warmup_on(&mut plant, cfg, &mut explore)?;
    res.est_error_weighted = Some(weighted_error(&res, instance));
    Ok(res)
}

fn weighted_error(res: &WarmupResult, truth: &LqrInstance) -> f64 {
    let delta = &res.a0_b0 - truth.theta();
    (&delta * res.ridge_v() * delta.transpose()).trace()
}

/// Warm-up length `c · n²ν⁵ϑ/(α₀⁵σ¹⁰) · √(T log²(T/δ))`, rounded up.
pub fn warmup_length_with(
    bounds: &BoundParams,
    dims: Dims,
    horizon: usize,
    delta: f64,
    constant: f64,
) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let BoundParams {
        alpha0,
        sigma,
        vartheta,
        nu,
        ..
    } = *bounds;
    let n = dims.n() as f64;
    let t = horizon as f64;
    let scale = n * n * nu.powi(5) * vartheta / (alpha0.powi(5) * sigma.powi(10));
    Ok((constant * scale * (t * (t / delta).ln().powi(2)).sqrt()).ceil() as usize)
}

/// [`warmup_length_with`] with constant 1.
pub fn warmup_length(
    bounds: &BoundParams,
    dims: Dims,
    horizon: usize,
    delta: f64,
) -> Result<usize> {
    warmup_length_with(bounds, dims, horizon, delta, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupReport {
    pub trace_v0: f64,
    pub trace_bound: f64,
    pub trace_ok: bool,
    pub final_state_sq: f64,
    pub final_state_bound: f64,
    pub final_state_ok: bool,
    pub min_eig_v0: f64,
    pub min_eig_bound: f64,
    pub min_eig_ok: bool,
    pub est_error: f64,
    pub est_error_bound: f64,
    pub est_error_ok: bool,
    pub max_state_norm: f64,
    pub max_state_bound: f64,
    pub max_state_ok: bool,
    /// `T₀ ≥ 400 (n + log(1/δ))`, our stand-in for the unspecified
    /// polynomial threshold.
    pub precondition_met: bool,
}

impl WarmupReport {
    pub fn all_ok(&self) -> bool {
        self.trace_ok && self.final_state_ok && self.min_eig_ok && self.est_error_ok
    }
}

pub fn warmup_guarantee_check(
    res: &WarmupResult,
    truth: &LqrInstance,
    cfg: &WarmupConfig,
    delta: f64,
) -> WarmupReport {
    let dims = truth.dims();
    let n = dims.n() as f64;
    let t0 = res.t0() as f64;
    let s2 = cfg.sigma.powi(2);
    let log = (t0 / delta).ln();
    let eff = cfg.effective_dim(dims, truth.bounds.vartheta);
    let k4 = cfg.kappa0.powi(4);
    let trace_bound = t0 * 300.0 * s2 * k4 / cfg.gamma0.powi(2)
        * (n + dims.k as f64 * truth.bounds.vartheta.powi(2) * cfg.kappa0.powi(2))
        * log;
    let final_state_bound = 150.0 * s2 * cfg.kappa0.powi(2) / cfg.gamma0
        * (n + dims.k as f64 * truth.bounds.vartheta.powi(2) * cfg.kappa0.powi(2))
        * log;
    let min_eig_bound = t0 * s2 / 80.0;
    let est_error = res
        .est_error_weighted
        .unwrap_or_else(|| weighted_error(res, truth));
    let est_error_bound = 20.0 * n * n * s2 * log;
    let max_state_norm = res.states[..res.t0()]
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    let max_state_bound = 4.0 * cfg.sigma * cfg.kappa0 / cfg.gamma0 * (eff * log).sqrt();
    let final_state_sq = res.x_final.norm_squared();
    WarmupReport {
        trace_v0: res.trace_v0,
        trace_bound,
        trace_ok: res.trace_v0 <= trace_bound,
        final_state_sq,
        final_state_bound,
        final_state_ok: final_state_sq <= final_state_bound,
        min_eig_v0: res.min_eig_v0,
        min_eig_bound,
        min_eig_ok: res.min_eig_v0 >= min_eig_bound,
        est_error,
        est_error_bound,
        est_error_ok: est_error <= est_error_bound,
        max_state_norm,
        max_state_bound,
        max_state_ok: max_state_norm <= max_state_bound,
        precondition_met: t0 >= 400.0 * (n + (1.0 / delta).ln()),
    }
}

/// A warm-up followed by the learner on the same plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartRun {
    pub warmup: WarmupResult,
    /// The learner's segment; its rounds are offset by `T₀`.
    pub learner: RunRecord,
    /// Regret over all `T` rounds, warm-up included.
    pub total_regret: Vec<f64>,
}

/// Warm up for `warm.t0` rounds, then run `rule` for the remaining
/// `cfg.horizon − T₀` rounds starting from the warm-up estimate.
pub fn run_with_warmup(
    instance: &LqrInstance,
    warm: &WarmupConfig,
    cfg: &OsloConfig,
    rule: &mut dyn PolicyRule,
    rng: SimRng,
) -> Result<WarmStartRun> {
    if warm.t0 + 2 > cfg.horizon {
        return Err(Error::Config(format!(
            "warm-up length {} leaves fewer than 2 rounds of a {}-round horizon",
            warm.t0, cfg.horizon
        )));
    }
    let seed = rng.seed();
    let mut explore = rng.fork(1);
    let mut plant = SimulatedPlant::new(instance.clone(), Vector::zeros(instance.dims().d), rng)?;
    let mut warmup = run_warmup_on(&mut plant, warm, &mut explore)?;
    warmup.est_error_weighted = Some(weighted_error(&warmup, instance));
    let mut learner_cfg = cfg.clone();
    learner_cfg.horizon = cfg.horizon - warm.t0;
    learner_cfg.prior = warmup.a0_b0.clone();
    let log = oslo::run_learner(&mut plant, &learner_cfg, rule)?;
    let full = plant.into_trajectory();
    let learner = oslo::score(
        instance,
        &learner_cfg,
        rule.name(),
        seed,
        &warmup.handoff_state,
        log,
        full.tail(warm.t0),
    )?;
    let total_regret = cumulative_regret(&full.costs, learner.j_star);
    Ok(WarmStartRun {
        warmup,
        learner,
        total_regret,
    })
}
