//! Sparse storage, direct solve and 2-norm condition estimation.

mod cond;
mod csr;
mod solve;

pub use cond::condition_number_2;
pub use csr::{write_vector_matrix_market, SparseMatrix};
pub use solve::{solve, SolveReport, SparseLu};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinAlgError {
    #[error("matrix must be square, got {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular or numerically rank deficient")]
    Singular,
    #[error("solve did not reach the requested tolerance: residual {residual:.3e} > {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("tolerance {0} out of range (0, 1e-6]")]
    BadTolerance(f64),
    #[error("singular-value iteration did not converge; partial estimate {partial:.6e}")]
    IterationStalled { partial: f64 },
    #[error("matrix contains a non-finite value")]
    NonFinite,
    #[error("dimension mismatch: matrix is {n}, vector is {len}")]
    DimensionMismatch { n: usize, len: usize },
    #[error("invalid matrix market data: {0}")]
    BadMatrixMarket(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
