//! Newton-type proximal gradient method for multiobjective composite problems
//! `min (f_1 + g, …, f_m + g)` with strongly convex smooth parts, plus a
//! first-order baseline and diagnostics for its convergence behavior.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common double-precision case.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod scalar;
pub mod subproblem;
pub mod trace_io;
pub mod zoo;

pub use driver::{
    npgmo_solve, pgmo_solve, solve, SolveTrace, SolverConfig, TerminalStatus, Variant,
};
pub use error::{Error, Result};
pub use problem::{NonsmoothTerm, ProblemInstance, SmoothObjective};
pub use scalar::Scalar;
pub use subproblem::{solve_direction, DirectionOptions, DirectionResult};
pub use zoo::{Family, InstanceSpec};

pub type ProblemF64 = ProblemInstance<f64>;
pub type ProblemF32 = ProblemInstance<f32>;
pub type SolverConfigF64 = SolverConfig<f64>;
pub type SolverConfigF32 = SolverConfig<f32>;
pub type TraceF64 = SolveTrace<f64>;
pub type TraceF32 = SolveTrace<f32>;
pub type DirectionResultF64 = DirectionResult<f64>;
pub type MatrixF64 = linalg::Matrix<f64>;
