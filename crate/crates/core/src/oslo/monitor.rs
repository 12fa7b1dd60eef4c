//! Evaluation-side instrumentation. Everything here reads the truth, so none
//! of it is reachable from the learner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::system::LqrInstance;

use super::RunRecord;

/// Per-round components of the good event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodEventFlags {
    /// `tr(Δ_s V_s Δ_sᵀ)` with `Δ_s` the error of the estimate in force.
    pub conf_value: Vec<f64>,
    pub conf_ok: Vec<bool>,
    /// `||z_s||² ≤ 4κ⁴ e^{−γ(s−1)} ||x₁||² + β`.
    pub norm_ok: Vec<bool>,
    /// `E_t`: both conditions for every `s ≤ t`.
    pub e_t: Vec<bool>,
}

impl GoodEventFlags {
    /// `E_T` over the rounds played.
    pub fn survived(&self) -> bool {
        self.e_t.last().copied().unwrap_or(true)
    }

    /// First round (1-based) at which `E_t` fails.
    pub fn first_failure(&self) -> Option<usize> {
        self.e_t.iter().position(|ok| !ok).map(|i| i + 1)
    }
}

/// Walk `V_s = λI + β⁻¹ Σ_{r<s} z_r z_rᵀ` along the run.
fn for_each_v(run: &RunRecord, mut f: impl FnMut(usize, &Mat, &Vector)) {
    let n = run.config.prior.ncols();
    let mut v = Mat::identity(n, n) * run.config.lambda;
    for (i, z) in run.trajectory.joint.iter().enumerate() {
        f(i + 1, &v, z);
        v.ger(1.0 / run.config.beta, z, z, 1.0);
    }
}

pub fn good_event_monitor(run: &RunRecord, truth: &LqrInstance) -> GoodEventFlags {
    let theta_star = truth.theta();
    let kappa = run.config.bounds.kappa();
    let gamma = run.config.bounds.gamma();
    let beta = run.config.beta;
    let x1_sq = run.x1.norm_squared();
    let rounds = run.rounds();
    let mut out = GoodEventFlags {
        conf_value: Vec::with_capacity(rounds),
        conf_ok: Vec::with_capacity(rounds),
        norm_ok: Vec::with_capacity(rounds),
        e_t: Vec::with_capacity(rounds),
    };
    let mut alive = true;
    for_each_v(run, |s, v, z| {
        let delta = &run.epochs[run.epoch_index(s)].theta - &theta_star;
        let conf = (&delta * v * delta.transpose()).trace();
        let radius = 4.0 * kappa.powi(4) * (-gamma * (s - 1) as f64).exp() * x1_sq + beta;
        let conf_ok = conf <= 1.0;
        let norm_ok = z.norm_squared() <= radius;
        alive &= conf_ok && norm_ok;
        out.conf_value.push(conf);
        out.conf_ok.push(conf_ok);
        out.norm_ok.push(norm_ok);
        out.e_t.push(alive);
    });
    out
}

/// Fraction of runs whose good event failed before the end.
pub fn good_event_failure_fraction(flags: &[GoodEventFlags]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|f| !f.survived()).count() as f64 / flags.len() as f64
}

/// Failures tolerated among `runs` independent runs for a `δ`-probability
/// event: `δN` plus three binomial standard deviations.
pub fn failure_allowance(delta: f64, runs: usize) -> f64 {
    let n = runs as f64;
    delta * n + 3.0 * (n * delta * (1.0 - delta)).sqrt()
}

/// The four-term upper bound on the good-event regret, as cumulative sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretDecomposition {
    /// `Σ (c_t − J*) 1{E_t}`.
    pub regret: Vec<f64>,
    /// `Σ (x_tᵀP_tx_t − x_{t+1}ᵀP_tx_{t+1}) 1{E_t}`.
    pub telescoping: Vec<f64>,
    /// `Σ 2 w_tᵀ P_t (A*+B*K_t) x_t 1{E_t}`.
    pub cross: Vec<f64>,
    /// `Σ (w_tᵀP_tw_t − P_t•W) 1{E_t}`.
    pub noise: Vec<f64>,
    /// `(4νμ/σ²) Σ z_tᵀV_t⁻¹z_t 1{E_t}`.
    pub bonus: Vec<f64>,
    /// `Σ z_tᵀV_t⁻¹z_t 1{E_t}`.
    pub quad_sum: f64,
    pub telescoping_bound: f64,
    pub quad_sum_bound: f64,
    pub cross_bound: f64,
    pub noise_bound: f64,
    /// Numerical allowance added to the four terms.
    pub slack: f64,
    /// Smallest value of `terms + slack − regret` over all prefixes.
    pub worst_margin: f64,
}

impl RegretDecomposition {
    pub fn dominated(&self) -> bool {
        self.worst_margin >= 0.0
    }

    pub fn terms_total(&self) -> f64 {
        let last = |v: &Vec<f64>| v.last().copied().unwrap_or(0.0);
        last(&self.telescoping) + last(&self.cross) + last(&self.noise) + last(&self.bonus)
    }

    pub fn quad_sum_within_bound(&self) -> bool {
        self.quad_sum <= self.quad_sum_bound
    }
}

/// Instrument a run. Needs a dual certificate `P` on every epoch.
pub fn regret_decomposition(
    run: &RunRecord,
    truth: &LqrInstance,
    flags: &GoodEventFlags,
) -> Result<RegretDecomposition> {
    let cfg = &run.config;
    let b = &cfg.bounds;
    let horizon = run.rounds().max(2) as f64;
    let n = cfg.prior.ncols() as f64;
    let log_t = horizon.ln();
    let bonus_scale = 4.0 * b.nu * cfg.mu / b.sigma.powi(2);
    let mut ps = Vec::with_capacity(run.epochs.len());
    for (i, e) in run.epochs.iter().enumerate() {
        let p =
            e.policy.p.clone().ok_or_else(|| {
                Error::InvalidArgument(format!("epoch {i} has no cost-to-go matrix"))
            })?;
        ps.push(p);
    }
    let traj = &run.trajectory;
    let mut out = RegretDecomposition {
        regret: Vec::with_capacity(traj.len()),
        telescoping: Vec::with_capacity(traj.len()),
        cross: Vec::with_capacity(traj.len()),
        noise: Vec::with_capacity(traj.len()),
        bonus: Vec::with_capacity(traj.len()),
        quad_sum: 0.0,
        telescoping_bound: 4.0 * b.nu / b.sigma.powi(2)
            * (4.0 * b.kappa().powi(4) * run.x1.norm_squared() + cfg.beta)
            * n
            * log_t,
        quad_sum_bound: 4.0 * cfg.beta * n * log_t,
        cross_bound: 2.0 * b.nu * b.vartheta / b.sigma
            * (3.0 * cfg.beta * horizon * (4.0 / cfg.delta).ln()).sqrt(),
        noise_bound: 8.0 * b.nu * (horizon * (4.0 * horizon / cfg.delta).ln().powi(3)).sqrt(),
        slack: 1e-6 * horizon * run.j_star.max(1.0),
        worst_margin: f64::INFINITY,
    };
    let (mut r, mut tel, mut cr, mut no, mut bo) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut slack = out.slack;
    for t in 0..traj.len() {
        if flags.e_t[t] {
            let e = run.epoch_index(t + 1);
            let p = &ps[e];
            let x = &traj.states[t];
            let x_next = &traj.states[t + 1];
            let w = &traj.noises[t];
            let z = &traj.joint[t];
            let m_star_x = &truth.a_star * x + &truth.b_star * &traj.actions[t];
            r += traj.costs[t] - run.j_star;
            tel += x.dot(&(p * x)) - x_next.dot(&(p * x_next));
            cr += 2.0 * w.dot(&(p * m_star_x));
            no += w.dot(&(p * w)) - crate::linalg::inner(p, &truth.w);
            bo += bonus_scale * run.quad_v_t[t];
            out.quad_sum += run.quad_v_t[t];
            // solver inexactness enters through the fixed-point identity
            if let Some(res) = run.epochs[e].policy.fixed_point_residual {
                slack += 10.0 * res * z.norm_squared();
            }
        }
        out.regret.push(r);
        out.telescoping.push(tel);
        out.cross.push(cr);
        out.noise.push(no);
        out.bonus.push(bo);
        out.worst_margin = out.worst_margin.min(tel + cr + no + bo + slack - r);
    }
    out.slack = slack;
    Ok(out)
}
