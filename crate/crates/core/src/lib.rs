//! Onsager-Machlup action functionals and most probable transition
//! pathways (MPTPs) for two-dimensional degenerate stochastic systems
//!
//! ```text
//! dX = g(X, Y) dt
//! dY = f(X, Y) dt + c dW + dL
//! ```
//!
//! where `W` is Brownian motion and `L` an asymmetric α-stable jump
//! process with `α ∈ (0, 1)` (bounded variation). The crate provides:
//!
//! * [`levy`] — arithmetic and sampling for the jump measure `ν_{α,β}`,
//! * [`model`] — model definitions, the OM function and its action,
//! * [`pathways`] — MPTP solvers: Hamilton-Pontryagin and fourth-order
//!   Euler-Lagrange boundary value problems, analytic quadratic-potential
//!   solutions, and boundary-velocity optimization,
//! * [`simulate`] — Euler-Maruyama simulation, endpoint-conditioned
//!   ensembles, and Monte Carlo tube-probability estimation,
//! * [`acceptance`] — the built-in validation suite behind `validate`.

pub mod acceptance;
mod fd;
pub mod levy;
pub mod model;
mod ode;
pub mod path;
pub mod pathways;
pub mod rng;
pub mod simulate;
pub mod special;

pub use levy::{k_alpha, AlphaStableMeasure, JumpTrain, LevyError};
pub use model::{DegenerateModel, LangevinModel, ModelError};
pub use path::Path;
pub use pathways::{
    BoundaryProblem, HpState, QuadraticMptp, SolveError, SolverConfig, VelocityOptimum,
};
pub use simulate::{SamplePath, SimError, TubeEstimate};
