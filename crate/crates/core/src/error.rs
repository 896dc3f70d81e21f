use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{0}")]
    Expr(#[from] ExprError),

    /// A coefficient (or other named callable) failed to evaluate at `x`.
    #[error("evaluating `{name}` at x = {x}: {source}")]
    Eval {
        name: String,
        x: f64,
        #[source]
        source: ExprError,
    },

    #[error("argument {t} lies outside [0, 1]")]
    OutOfDomain { t: f64 },

    /// The collocation matrix has a pivot below the absolute singularity threshold.
    #[error("singular collocation system: pivot {pivot:e} in column {column} is below {threshold:e}")]
    SingularSystem {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("problem `{0}` has nonzero boundary values; homogenize it first")]
    NotHomogeneous(String),

    #[error("recursion depth {depth} exceeds the cap of {cap}")]
    DepthCap { depth: u32, cap: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
