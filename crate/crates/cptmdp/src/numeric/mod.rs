//! Dense linear algebra and linear programming.

mod linalg;
mod lp;

pub use linalg::{solve_linear, LinearSystem, SINGULAR_PIVOT};
pub use lp::{solve_lp, solve_lp_with, Constraint, LinearProgram, LpOutcome, LpTolerances, Relation};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("matrix is numerically singular")]
    SingularMatrix,
    #[error("simplex iteration limit reached after {0} pivots")]
    IterationLimit(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
