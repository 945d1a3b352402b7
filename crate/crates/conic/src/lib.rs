//! Sparse first-order conic solver for mixed zero / nonnegative / second-order /
//! PSD / exponential cone programs, plus the Hermitian helpers needed to
//! lower complex semidefinite relaxations onto it.

pub mod cone;
pub mod hermitian;
pub mod problem;
pub mod solver;

pub use cone::{project_exp, project_psd, project_soc, Cone};
pub use hermitian::{extract_rank1, realify_hermitian, HermitianBlock, Rank1};
pub use problem::{ConicProblem, ProblemBuilder};
pub use solver::{solve, solve_warm, ConicSolution, Settings, Status, WarmStart};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (skew norm {0:e})")]
    NotHermitian(f64),
    #[error("matrix trace {0:e} is too small to extract a rank-1 factor")]
    ZeroMatrix(f64),
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("linear system factorization failed")]
    Factorization,
    #[error("parse error: {0}")]
    Parse(String),
}
