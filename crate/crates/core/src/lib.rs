//! Optimistic adaptive control of an unknown linear-quadratic system.
//!
//! The learner estimates `(A B)` by regularized least squares, and at each
//! determinant-doubling epoch solves a relaxed steady-state covariance SDP
//! whose optimum is a lower bound on the true optimal cost. The extracted
//! gain is played until the next epoch.
//!
//! Modules, bottom up:
//!
//! - [`system`]: instances, simulation, regret accounting
//! - [`riccati`]: Riccati/Lyapunov ground truth and stability certificates
//! - [`sdp`]: exact and relaxed SDPs with a dense interior-point solver
//! - [`estimator`]: least squares, confidence matrix, epoch trigger
//! - [`oslo`]: the learning loop and its diagnostics
//! - [`warmup`]: exploration with a known stabilizing policy
//! - [`bench`]: multi-seed experiments, exponent fitting, CSV/JSON output
//!
//! Runnable examples live in `crates/core/examples/`.

pub mod bench;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod oslo;
pub mod riccati;
pub mod rng;
pub mod sdp;
pub mod serde_mat;
pub mod system;
pub mod warmup;

pub use error::{Error, Result};
pub use rng::SimRng;
pub use system::{BoundParams, Dims, LqrInstance, Policy, Trajectory};
