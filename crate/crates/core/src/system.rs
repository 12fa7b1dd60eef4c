//! Domain types, the simulator, and regret accounting.
//!
//! Sign convention: actions are `u = K x` and the closed loop is `A + B K`,
//! so a stabilizing gain for `A = B = 1` is negative.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, hstack, max_eig, min_eig, op_norm, Mat, Vector};
use crate::rng::{covariance_factor, SimRng};

/// State and action dimensions. `n = d + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d: usize,
    pub k: usize,
}

impl Dims {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive, got d={d}, k={k}"
            )));
        }
        Ok(Dims { d, k })
    }

    pub fn n(&self) -> usize {
        self.d + self.k
    }
}

/// The known constants `alpha0, alpha1, sigma, vartheta, nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub sigma: f64,
    pub vartheta: f64,
    pub nu: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha0, self.alpha1, self.sigma, self.vartheta, self.nu];
        if all.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bound parameters must be positive and finite: {self:?}"
            )));
        }
        if self.alpha0 > self.alpha1 {
            return Err(Error::InvalidArgument(format!(
                "alpha0 = {} exceeds alpha1 = {}",
                self.alpha0, self.alpha1
            )));
        }
        // J* >= alpha0 sigma^2 always, so a smaller nu cannot bound J*.
        if self.nu < self.alpha0 * self.sigma * self.sigma * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "nu = {} is below alpha0 sigma^2 = {}",
                self.nu,
                self.alpha0 * self.sigma * self.sigma
            )));
        }
        Ok(())
    }

    /// `kappa = sqrt(2 nu / (alpha0 sigma^2))`.
    pub fn kappa(&self) -> f64 {
        (2.0 * self.nu / (self.alpha0 * self.sigma * self.sigma)).sqrt()
    }

    /// `gamma = 1 / (2 kappa^2)`.
    pub fn gamma(&self) -> f64 {
        1.0 / (2.0 * self.kappa().powi(2))
    }

    /// Smallest bounds consistent with the given matrices. `nu` is `j_star`
    /// when known, otherwise `alpha0 sigma^2`.
    pub fn tight(a: &Mat, b: &Mat, q: &Mat, r: &Mat, w: &Mat, j_star: Option<f64>) -> Self {
        let alpha0 = min_eig(q).min(min_eig(r));
        let alpha1 = max_eig(q).max(max_eig(r));
        let sigma = min_eig(w).max(0.0).sqrt();
        let vartheta = op_norm(&hstack(a, b)).max(f64::MIN_POSITIVE);
        let floor = alpha0 * sigma * sigma;
        BoundParams {
            alpha0,
            alpha1,
            sigma,
            vartheta,
            nu: j_star.unwrap_or(floor).max(floor),
        }
    }
}

/// The hidden system plus its known bound parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrInstance {
    #[serde(with = "crate::serde_mat::flexible")]
    pub a_star: Mat,
    #[serde(with = "crate::serde_mat::flexible")]
    pub b_star: Mat,
    #[serde(with = "crate::serde_mat::flexible")]
    pub q: Mat,
    #[serde(with = "crate::serde_mat::flexible")]
    pub r: Mat,
    #[serde(with = "crate::serde_mat::flexible")]
    pub w: Mat,
    pub bounds: BoundParams,
    #[serde(skip)]
    w_factor: OnceLock<Mat>,
}

impl PartialEq for LqrInstance {
    fn eq(&self, other: &Self) -> bool {
        self.a_star == other.a_star
            && self.b_star == other.b_star
            && self.q == other.q
            && self.r == other.r
            && self.w == other.w
            && self.bounds == other.bounds
    }
}

fn check_square(m: &Mat, n: usize, name: &'static str) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::dims(
            name,
            format!("{n}x{n}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn check_spd(m: &Mat, name: &'static str) -> Result<()> {
    if !linalg::all_finite(m) {
        return Err(Error::InvalidArgument(format!(
            "{name} has non-finite entries"
        )));
    }
    if (m - m.transpose()).amax() > 1e-10 * m.amax().max(1.0) {
        return Err(Error::InvalidArgument(format!("{name} is not symmetric")));
    }
    if min_eig(m) <= 0.0 {
        return Err(Error::NotPositiveDefinite(name));
    }
    Ok(())
}

impl LqrInstance {
    /// Structural validation only: shapes, symmetry, and positive
    /// definiteness of `Q, R, W`. See [`LqrInstance::assumption_violations`]
    /// for the bound and controllability checks.
    pub fn new(
        a_star: Mat,
        b_star: Mat,
        q: Mat,
        r: Mat,
        w: Mat,
        bounds: BoundParams,
    ) -> Result<Self> {
        let inst = LqrInstance {
            a_star,
            b_star,
            q,
            r,
            w,
            bounds,
            w_factor: OnceLock::new(),
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Build an instance with the tightest bound parameters, taking `nu` from
    /// the Riccati solution when one exists.
    pub fn with_tight_bounds(a_star: Mat, b_star: Mat, q: Mat, r: Mat, w: Mat) -> Result<Self> {
        let mut bounds = BoundParams::tight(&a_star, &b_star, &q, &r, &w, None);
        // placeholder bounds so structural validation can run
        bounds.nu = bounds.nu.max(f64::MIN_POSITIVE);
        let mut inst = Self::new(a_star, b_star, q, r, w, bounds)?;
        if let Ok(sol) = crate::riccati::solve_dare(&inst, 1e-12) {
            inst.bounds.nu = inst.bounds.nu.max(sol.j_star);
        }
        Ok(inst)
    }

    /// Scalar instance with tight bounds.
    pub fn scalar(a: f64, b: f64, q: f64, r: f64, w: f64) -> Result<Self> {
        let s = |x| Mat::from_element(1, 1, x);
        Self::with_tight_bounds(s(a), s(b), s(q), s(r), s(w))
    }

    /// `A = B = Q = R = W = 1`, whose cost-to-go is the golden ratio.
    pub fn golden() -> Self {
        Self::scalar(1.0, 1.0, 1.0, 1.0, 1.0).expect("golden instance is well formed")
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.a_star.nrows();
        let k = self.b_star.ncols();
        Dims::new(d, k)?;
        check_square(&self.a_star, d, "a_star")?;
        if self.b_star.nrows() != d {
            return Err(Error::dims(
                "b_star",
                format!("{d} rows"),
                self.b_star.nrows(),
            ));
        }
        check_square(&self.q, d, "q")?;
        check_square(&self.r, k, "r")?;
        check_square(&self.w, d, "w")?;
        if !linalg::all_finite(&self.a_star) || !linalg::all_finite(&self.b_star) {
            return Err(Error::InvalidArgument(
                "dynamics have non-finite entries".into(),
            ));
        }
        check_spd(&self.q, "q")?;
        check_spd(&self.r, "r")?;
        check_spd(&self.w, "w")?;
        self.bounds.validate()
    }

    pub fn dims(&self) -> Dims {
        Dims {
            d: self.a_star.nrows(),
            k: self.b_star.ncols(),
        }
    }

    /// `(A B)`, the d x n parameter matrix.
    pub fn theta(&self) -> Mat {
        hstack(&self.a_star, &self.b_star)
    }

    /// `diag(Q, R)`.
    pub fn cost_block(&self) -> Mat {
        block_diag(&self.q, &self.r)
    }

    pub fn closed_loop(&self, policy: &Policy) -> Mat {
        &self.a_star + &self.b_star * &policy.k_mat
    }

    /// Symmetric square root of `W`, computed once.
    pub fn noise_factor(&self) -> &Mat {
        self.w_factor.get_or_init(|| covariance_factor(&self.w))
    }

    /// Whether `W = sigma^2 I` to within `1e-12` relative.
    pub fn noise_is_spherical(&self) -> bool {
        let s2 = self.w[(0, 0)];
        let target = Mat::identity(self.w.nrows(), self.w.ncols()) * s2;
        (&self.w - target).amax() <= 1e-12 * s2.abs().max(1.0)
    }

    pub fn known(&self) -> KnownParams {
        KnownParams {
            dims: self.dims(),
            q: self.q.clone(),
            r: self.r.clone(),
            w: self.w.clone(),
            bounds: self.bounds,
        }
    }

    /// Every violated standing assumption, as human-readable strings. Empty
    /// means the instance satisfies all of them.
    pub fn assumption_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let b = &self.bounds;
        let slack = 1e-9;
        for (name, m) in [("q", &self.q), ("r", &self.r)] {
            let (lo, hi) = (min_eig(m), max_eig(m));
            if lo < b.alpha0 * (1.0 - slack) {
                out.push(format!("{name}: min eigenvalue {lo} < alpha0 {}", b.alpha0));
            }
            if hi > b.alpha1 * (1.0 + slack) {
                out.push(format!("{name}: max eigenvalue {hi} > alpha1 {}", b.alpha1));
            }
        }
        let norm = op_norm(&self.theta());
        if norm > b.vartheta * (1.0 + slack) {
            out.push(format!("||(A B)|| = {norm} > vartheta {}", b.vartheta));
        }
        if min_eig(&self.w) < b.sigma * b.sigma * (1.0 - slack) {
            out.push(format!(
                "W has eigenvalue below sigma^2 = {}",
                b.sigma * b.sigma
            ));
        }
        if !check_controllable(self) {
            out.push("(A, B) is not controllable".into());
        } else {
            match crate::riccati::solve_dare(self, 1e-10) {
                Ok(sol) if sol.j_star > b.nu * (1.0 + slack) => {
                    out.push(format!("J* = {} > nu {}", sol.j_star, b.nu))
                }
                Ok(_) => {}
                Err(e) => out.push(format!("Riccati solve failed: {e}")),
            }
        }
        out
    }
}

/// What a learner is allowed to see: costs, noise covariance, bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnownParams {
    pub dims: Dims,
    #[serde(with = "crate::serde_mat")]
    pub q: Mat,
    #[serde(with = "crate::serde_mat")]
    pub r: Mat,
    #[serde(with = "crate::serde_mat")]
    pub w: Mat,
    pub bounds: BoundParams,
}

impl KnownParams {
    pub fn cost_block(&self) -> Mat {
        block_diag(&self.q, &self.r)
    }

    pub fn cost(&self, x: &Vector, u: &Vector) -> f64 {
        quad(&self.q, x) + quad(&self.r, u)
    }
}

/// A linear state-feedback policy `u = K x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    #[serde(with = "crate::serde_mat::flexible")]
    pub k_mat: Mat,
}

impl Policy {
    pub fn new(k_mat: Mat) -> Result<Self> {
        if !linalg::all_finite(&k_mat) {
            return Err(Error::InvalidArgument(
                "policy gain has non-finite entries".into(),
            ));
        }
        Ok(Policy { k_mat })
    }

    pub fn zero(dims: Dims) -> Self {
        Policy {
            k_mat: Mat::zeros(dims.k, dims.d),
        }
    }

    pub fn scalar(k: f64) -> Self {
        Policy {
            k_mat: Mat::from_element(1, 1, k),
        }
    }

    pub fn act(&self, x: &Vector) -> Vector {
        &self.k_mat * x
    }
}

fn quad(m: &Mat, x: &Vector) -> f64 {
    x.dot(&(m * x))
}

/// A length-T run. `states` has T + 1 entries: `x_1 .. x_T` and the final
/// successor `x_{T+1}`. All other sequences have T entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(with = "crate::serde_mat::vec_vector")]
    pub states: Vec<Vector>,
    #[serde(with = "crate::serde_mat::vec_vector")]
    pub actions: Vec<Vector>,
    #[serde(with = "crate::serde_mat::vec_vector")]
    pub noises: Vec<Vector>,
    pub costs: Vec<f64>,
    #[serde(with = "crate::serde_mat::vec_vector")]
    pub joint: Vec<Vector>,
}

impl Trajectory {
    pub fn with_capacity(horizon: usize) -> Self {
        Trajectory {
            states: Vec::with_capacity(horizon + 1),
            actions: Vec::with_capacity(horizon),
            noises: Vec::with_capacity(horizon),
            costs: Vec::with_capacity(horizon),
            joint: Vec::with_capacity(horizon),
        }
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn final_state(&self) -> Option<&Vector> {
        self.states.last()
    }

    /// The rounds from `start` (0-based) on, as a trajectory of their own.
    pub fn tail(&self, start: usize) -> Trajectory {
        let start = start.min(self.len());
        Trajectory {
            states: self
                .states
                .get(start..)
                .map(<[Vector]>::to_vec)
                .unwrap_or_default(),
            actions: self.actions[start..].to_vec(),
            noises: self.noises[start..].to_vec(),
            costs: self.costs[start..].to_vec(),
            joint: self.joint[start..].to_vec(),
        }
    }

    pub(crate) fn push(&mut self, x: &Vector, u: &Vector, w: Vector, cost: f64, x_next: Vector) {
        if self.states.is_empty() {
            self.states.push(x.clone());
        }
        self.joint.push(linalg::joint(x, u));
        self.actions.push(u.clone());
        self.noises.push(w);
        self.costs.push(cost);
        self.states.push(x_next);
    }

    /// Largest `|x_{t+1} - (A x_t + B u_t + w_t)|` over the run. Zero when
    /// the trajectory was produced by `instance`.
    pub fn replay_error(&self, instance: &LqrInstance) -> f64 {
        (0..self.len())
            .map(|t| {
                let x_next =
                    step_with_noise(instance, &self.states[t], &self.actions[t], &self.noises[t]).0;
                (x_next - &self.states[t + 1]).amax()
            })
            .fold(0.0, f64::max)
    }
}

/// One transition with a given noise draw: `(x_next, cost)`.
pub fn step_with_noise(
    instance: &LqrInstance,
    x: &Vector,
    u: &Vector,
    w: &Vector,
) -> (Vector, f64) {
    let x_next = &instance.a_star * x + &instance.b_star * u + w;
    let cost = quad(&instance.q, x) + quad(&instance.r, u);
    (x_next, cost)
}

/// Result of [`step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x_next: Vector,
    pub cost: f64,
    pub w: Vector,
}

/// Advance the system one step with `w ~ N(0, W)` drawn from `rng`.
pub fn step(
    instance: &LqrInstance,
    x: &Vector,
    u: &Vector,
    rng: &mut SimRng,
) -> Result<StepOutcome> {
    let dims = instance.dims();
    if x.len() != dims.d {
        return Err(Error::dims("step: x", dims.d, x.len()));
    }
    if u.len() != dims.k {
        return Err(Error::dims("step: u", dims.k, u.len()));
    }
    let w = rng.gaussian(instance.noise_factor());
    let (x_next, cost) = step_with_noise(instance, x, u, &w);
    Ok(StepOutcome { x_next, cost, w })
}

/// A per-step action rule. `t` is 1-based.
pub trait Controller {
    fn act(&mut self, t: usize, x: &Vector) -> Vector;
}

impl Controller for Policy {
    fn act(&mut self, _t: usize, x: &Vector) -> Vector {
        Policy::act(self, x)
    }
}

/// Adapts a closure into a [`Controller`].
pub struct FnController<F>(pub F);

impl<F: FnMut(usize, &Vector) -> Vector> Controller for FnController<F> {
    fn act(&mut self, t: usize, x: &Vector) -> Vector {
        (self.0)(t, x)
    }
}

/// Simulate `horizon` steps from `x1`.
pub fn rollout(
    instance: &LqrInstance,
    controller: &mut dyn Controller,
    horizon: usize,
    x1: &Vector,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let dims = instance.dims();
    if x1.len() != dims.d {
        return Err(Error::dims("rollout: x1", dims.d, x1.len()));
    }
    let mut traj = Trajectory::with_capacity(horizon);
    let mut x = x1.clone();
    for t in 1..=horizon {
        let u = controller.act(t, &x);
        if u.len() != dims.k {
            return Err(Error::dims("rollout: controller output", dims.k, u.len()));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Aborted {
                step: t,
                reason: "controller returned a non-finite action".into(),
            });
        }
        let out = step(instance, &x, &u, rng)?;
        if out.x_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: t,
                what: "state",
            });
        }
        traj.push(&x, &u, out.w, out.cost, out.x_next.clone());
        x = out.x_next;
    }
    Ok(traj)
}

/// Running sums of `c_t - J*`.
pub fn cumulative_regret(costs: &[f64], j_star: f64) -> Vec<f64> {
    costs
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c - j_star;
            Some(*acc)
        })
        .collect()
}

pub fn regret_series(traj: &Trajectory, j_star: f64) -> Vec<f64> {
    cumulative_regret(&traj.costs, j_star)
}

pub use crate::linalg::spectral_radius;

/// `(B, AB, ..., A^{d-1} B)`.
pub fn controllability_matrix(a: &Mat, b: &Mat) -> Mat {
    let d = a.nrows();
    let k = b.ncols();
    let mut out = Mat::zeros(d, d * k);
    let mut block = b.clone();
    for i in 0..d {
        out.view_mut((0, i * k), (d, k)).copy_from(&block);
        block = a * block;
    }
    out
}

/// Singular values above `1e-9` times the largest count toward the rank.
pub const CONTROLLABILITY_RANK_TOL: f64 = 1e-9;

pub fn is_controllable(a: &Mat, b: &Mat) -> bool {
    linalg::numerical_rank(&controllability_matrix(a, b), CONTROLLABILITY_RANK_TOL) == a.nrows()
}

pub fn check_controllable(instance: &LqrInstance) -> bool {
    is_controllable(&instance.a_star, &instance.b_star)
}

/// Options for [`random_instance_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomInstanceOptions {
    /// Rescale `A` so that its spectral radius is at most this. `None` leaves
    /// `A` as drawn (after the `vartheta` scaling).
    pub max_spectral_radius: Option<f64>,
    /// Rejection-sampling budget.
    pub max_attempts: usize,
    /// Raise `nu` to `J*` when the drawn instance has a larger optimal cost.
    pub fit_nu: bool,
}

impl Default for RandomInstanceOptions {
    fn default() -> Self {
        RandomInstanceOptions {
            max_spectral_radius: Some(0.95),
            max_attempts: 100,
            fit_nu: true,
        }
    }
}

pub fn random_instance(dims: Dims, bounds: BoundParams, rng: &mut SimRng) -> Result<LqrInstance> {
    random_instance_with(dims, bounds, RandomInstanceOptions::default(), rng)
}

fn random_orthogonal(n: usize, rng: &mut SimRng) -> Mat {
    rng.standard_normal_mat(n, n).qr().q()
}

fn random_spd(n: usize, lo: f64, hi: f64, rng: &mut SimRng) -> Mat {
    let u = random_orthogonal(n, rng);
    let eig = Vector::from_fn(n, |_, _| lo + (hi - lo) * rng.uniform());
    linalg::sym(&(&u * Mat::from_diagonal(&eig) * u.transpose()))
}

/// Draw a controllable instance satisfying the standing assumptions.
///
/// `Q` and `R` get eigenvalues uniform in `[alpha0, alpha1]` in a random
/// basis, `W = sigma^2 I`, and `(A B)` is Gaussian scaled so that
/// `||(A B)|| <= vartheta` with a random margin.
pub fn random_instance_with(
    dims: Dims,
    bounds: BoundParams,
    opts: RandomInstanceOptions,
    rng: &mut SimRng,
) -> Result<LqrInstance> {
    bounds.validate()?;
    let Dims { d, k } = dims;
    for _ in 0..opts.max_attempts {
        let mut a = rng.standard_normal_mat(d, d);
        let b = rng.standard_normal_mat(d, k);
        if let Some(rho_max) = opts.max_spectral_radius {
            let rho = spectral_radius(&a)?;
            let target = rho_max * (0.3 + 0.7 * rng.uniform());
            if rho > target {
                a *= target / rho;
            }
        }
        let mut theta = hstack(&a, &b);
        let norm = op_norm(&theta);
        let target = bounds.vartheta * (0.5 + 0.5 * rng.uniform());
        if norm > target {
            theta *= target / norm;
        }
        let a = theta.columns(0, d).into_owned();
        let b = theta.columns(d, k).into_owned();
        let q = random_spd(d, bounds.alpha0, bounds.alpha1, rng);
        let r = random_spd(k, bounds.alpha0, bounds.alpha1, rng);
        let w = Mat::identity(d, d) * bounds.sigma.powi(2);
        if !is_controllable(&a, &b) {
            continue;
        }
        let mut inst = LqrInstance::new(a, b, q, r, w, bounds)?;
        match crate::riccati::solve_dare(&inst, 1e-12) {
            Ok(sol) if sol.j_star <= bounds.nu => return Ok(inst),
            Ok(sol) if opts.fit_nu => {
                inst.bounds.nu = sol.j_star;
                return Ok(inst);
            }
            _ => continue,
        }
    }
    Err(Error::GenerationFailed(opts.max_attempts))
}

/// Simulator behind a narrow interface. A learner holding a `&mut dyn Plant`
/// sees states and the known parameters, never `A*` or `B*`.
pub trait Plant {
    fn known(&self) -> &KnownParams;
    /// Current state `x_t`.
    fn state(&self) -> &Vector;
    /// Play `u_t`, returning `x_{t+1}`.
    fn apply(&mut self, u: &Vector) -> Result<Vector>;
}

/// The standard [`Plant`]: an [`LqrInstance`] plus a noise stream, logging the
/// trajectory for evaluation code.
pub struct SimulatedPlant {
    instance: LqrInstance,
    known: KnownParams,
    x: Vector,
    rng: SimRng,
    traj: Trajectory,
}

impl SimulatedPlant {
    pub fn new(instance: LqrInstance, x1: Vector, rng: SimRng) -> Result<Self> {
        if x1.len() != instance.dims().d {
            return Err(Error::dims("plant: x1", instance.dims().d, x1.len()));
        }
        Ok(SimulatedPlant {
            known: instance.known(),
            instance,
            x: x1,
            rng,
            traj: Trajectory::with_capacity(0),
        })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.traj
    }
}

impl Plant for SimulatedPlant {
    fn known(&self) -> &KnownParams {
        &self.known
    }

    fn state(&self) -> &Vector {
        &self.x
    }

    fn apply(&mut self, u: &Vector) -> Result<Vector> {
        let t = self.traj.len() + 1;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: t,
                what: "action",
            });
        }
        let out = step(&self.instance, &self.x, u, &mut self.rng)?;
        if out.x_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: t,
                what: "state",
            });
        }
        self.traj
            .push(&self.x, u, out.w, out.cost, out.x_next.clone());
        self.x = out.x_next.clone();
        Ok(out.x_next)
    }
}
