//! Direct sparse solve via LU with partial pivoting.
//!
//! The factorization is delegated to `faer`'s sparse LU (fill-reducing
//! ordering, partial pivoting). Parallelism is pinned to sequential so
//! results are reproducible bit for bit.

use std::sync::Once;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use super::csr::norm2;
use super::{LinAlgError, SparseMatrix};

static PIN_SEQUENTIAL: Once = Once::new();

fn pin_sequential() {
    PIN_SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Outcome of a direct solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// relative residual ‖Ax − b‖₂ / ‖b‖₂ (absolute when b = 0)
    pub residual: f64,
    pub n: usize,
    pub nnz: usize,
}

/// A reusable LU factorization of a square sparse matrix.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self, LinAlgError> {
        if a.n_rows() != a.n_cols() {
            return Err(LinAlgError::NotSquare {
                rows: a.n_rows(),
                cols: a.n_cols(),
            });
        }
        if !a.all_finite() {
            return Err(LinAlgError::NonFinite);
        }
        pin_sequential();
        let n = a.n_rows();
        let mut triplets = Vec::with_capacity(a.nnz());
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push(Triplet::new(r, *c, *v));
            }
        }
        let mat = SparseColMat::try_new_from_triplets(n, n, &triplets)
            .map_err(|_| LinAlgError::Singular)?;
        let lu = mat.sp_lu().map_err(|_| LinAlgError::Singular)?;
        Ok(Self { lu, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_transpose_vec(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve_transpose(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Solve `A x = b` to a relative residual of at most `tol`.
pub fn solve(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<SolveReport, LinAlgError> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(LinAlgError::BadTolerance(tol));
    }
    if b.len() != a.n_rows() {
        return Err(LinAlgError::DimensionMismatch {
            n: a.n_rows(),
            len: b.len(),
        });
    }
    let lu = SparseLu::factor(a)?;
    let x = lu.solve_vec(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinAlgError::Singular);
    }
    let mut ax = vec![0.0; b.len()];
    a.matvec(&x, &mut ax);
    for (axi, bi) in ax.iter_mut().zip(b) {
        *axi -= bi;
    }
    let bnorm = norm2(b);
    let residual = if bnorm > 0.0 {
        norm2(&ax) / bnorm
    } else {
        norm2(&ax)
    };
    if !residual.is_finite() || residual > tol {
        return Err(LinAlgError::ResidualTooLarge { residual, tol });
    }
    Ok(SolveReport {
        solution: x,
        residual,
        n: a.n_rows(),
        nnz: a.nnz(),
    })
}
