//! Solver for nonlocal functional equations with vanishing delays,
//!
//! ```text
//! u(x) = φ(x)·u(φ₁(x)) + (1 − φ(x))·u(φ₂(x)) + f(x),   x ∈ [0, 1],
//! ```
//!
//! by piecewise-linear collocation, with Picard-iteration oracles and a
//! convergence/cost analysis harness.

pub mod analysis;
pub mod collocation;
pub mod error;
pub mod expr;
pub mod lu;
pub mod models;
pub mod output;
pub mod picard;
pub mod problem;
pub mod problem_file;
pub mod sampling;

pub use collocation::{assemble, collocate, project, solve, Grid, PiecewiseLinear, SolveReport};
pub use error::{Error, Result};
pub use problem::{homogenize, validate, Coefficient, Problem, ValidationReport};
