//! Damped fixed-point power control for utilities that are concave in the
//! log-SINR, with an independent log-domain convex oracle.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

pub mod error;
pub mod io;
pub mod linalg;
pub mod problem;
pub mod random;
pub mod scalar;
pub mod solver;
pub mod spectral;
pub mod utility;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{InterferenceOperator, LinearOperator, Matrix};
pub use problem::{LinkGains, NormalizedProblem, PowerBounds, SinrState};
pub use scalar::{Scalar, POWER_FLOOR_W};
pub use solver::{solve, SolveOutput, SolverConfig, SolverMode, SolverTrace, Sweep, InitialPower};
pub use utility::{LogRate, RelayRoute, RelayUtility, SumLogSinr, SumSinr, Utility};

pub type Problem = NormalizedProblem<f64>;
pub type Problem32 = NormalizedProblem<f32>;
pub type Gains = LinkGains<f64>;
pub type Gains32 = LinkGains<f32>;
pub type Bounds = PowerBounds<f64>;
pub type State = SinrState<f64>;
pub type Config = SolverConfig<f64>;
pub type Trace = SolverTrace<f64>;
pub type DenseMatrix = Matrix<f64>;
