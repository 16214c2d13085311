//! 2-norm condition number estimation.
//!
//! σ_max comes from power iteration on AᵀA; σ_min from inverse power
//! iteration on AᵀA, which costs one pair of triangular solves per step
//! against a single LU factorization of A. Both iterations watch the
//! Rayleigh quotient and stop when its relative change is far below the
//! requested accuracy.

use super::csr::norm2;
use super::{LinAlgError, SparseLu, SparseMatrix};

const MAX_ITERATIONS: usize = 10_000;

/// deterministic start vector with no special alignment
fn start_vector(n: usize) -> Vec<f64> {
    let mut state = 0x853c49e6748fea9bu64;
    (0..n)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    for x in v.iter_mut() {
        *x /= n;
    }
    n
}

/// Estimate κ₂(A) = σ_max / σ_min to relative accuracy `tol`.
pub fn condition_number_2(a: &SparseMatrix, tol: f64) -> Result<f64, LinAlgError> {
    if a.n_rows() != a.n_cols() {
        return Err(LinAlgError::NotSquare {
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    let n = a.n_rows();
    if n == 0 {
        return Err(LinAlgError::Singular);
    }
    let tol = if tol > 0.0 { tol } else { 1e-4 };
    // quotient changes by ~q^2 per step near convergence; demand a margin
    let stop = tol * 1e-2;

    // largest singular value via v <- normalize(Aᵀ A v)
    let mut v = start_vector(n);
    normalize(&mut v);
    let mut av = vec![0.0; n];
    let mut sigma_max2 = 0.0f64;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        a.matvec(&v, &mut av);
        let rq = av.iter().map(|x| x * x).sum::<f64>();
        a.matvec_transpose(&av, &mut v);
        let nv = normalize(&mut v);
        if !nv.is_finite() || nv == 0.0 {
            return Err(LinAlgError::NonFinite);
        }
        if (rq - sigma_max2).abs() <= stop * rq.max(f64::MIN_POSITIVE) {
            sigma_max2 = rq;
            converged = true;
            break;
        }
        sigma_max2 = rq;
    }
    if !converged {
        return Err(LinAlgError::IterationStalled {
            partial: sigma_max2.sqrt(),
        });
    }

    // smallest singular value: inverse iteration on AᵀA through the LU of A
    let lu = SparseLu::factor(a)?;
    let mut v = start_vector(n);
    normalize(&mut v);
    let mut inv_sigma_min2 = 0.0f64;
    converged = false;
    for _ in 0..MAX_ITERATIONS {
        let t = lu.solve_transpose_vec(&v);
        let x = lu.solve_vec(&t);
        if x.iter().any(|y| !y.is_finite()) {
            return Err(LinAlgError::Singular);
        }
        // Rayleigh quotient of (AᵀA)⁻¹ at the normalized v
        let rq: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
        let done = (rq - inv_sigma_min2).abs() <= stop * rq.abs().max(f64::MIN_POSITIVE);
        inv_sigma_min2 = rq;
        v = x;
        let nv = normalize(&mut v);
        if nv == 0.0 || !nv.is_finite() {
            return Err(LinAlgError::Singular);
        }
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinAlgError::IterationStalled {
            partial: (sigma_max2 * inv_sigma_min2.abs()).sqrt(),
        });
    }
    if inv_sigma_min2 <= 0.0 {
        return Err(LinAlgError::Singular);
    }
    Ok((sigma_max2 * inv_sigma_min2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{jacobi_singular_values, Rng};

    #[test]
    fn identity_has_condition_one() {
        let n = 12;
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        let a = SparseMatrix::from_triplets(n, n, &triplets);
        let k = condition_number_2(&a, 1e-4).unwrap();
        assert!((k - 1.0).abs() < 1e-8, "{k}");
    }

    #[test]
    fn diagonal_condition() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 0.5)]);
        let k = condition_number_2(&a, 1e-6).unwrap();
        assert!((k - 4.0).abs() < 1e-4 * 4.0, "{k}");
    }

    fn random_dense(n: usize, seed: u64) -> (Vec<Vec<f64>>, SparseMatrix) {
        let mut rng = Rng::new(seed);
        let mut dense = vec![vec![0.0; n]; n];
        let mut triplets = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = rng.next_f64() * 2.0 - 1.0;
                dense[r][c] = v;
                triplets.push((r, c, v));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &triplets);
        (dense, a)
    }

    #[test]
    fn matches_dense_svd_oracle() {
        for seed in [3u64, 17, 99] {
            let (dense, a) = random_dense(30, seed);
            let sv = jacobi_singular_values(&dense);
            let expected = sv[0] / sv[sv.len() - 1];
            let got = condition_number_2(&a, 1e-5).unwrap();
            let rel = (got - expected).abs() / expected;
            assert!(rel < 1e-3, "seed {seed}: got {got}, oracle {expected}, rel {rel}");
        }
    }

    #[test]
    fn invariant_under_symmetric_permutation_and_scaling() {
        let (_, a) = random_dense(24, 5);
        let k0 = condition_number_2(&a, 1e-5).unwrap();
        // symmetric permutation: reverse the index order
        let n = 24;
        let mut permuted = Vec::new();
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (c, v) in cols.iter().zip(vals) {
                permuted.push((n - 1 - r, n - 1 - c, *v));
            }
        }
        let p = SparseMatrix::from_triplets(n, n, &permuted);
        let k1 = condition_number_2(&p, 1e-5).unwrap();
        assert!((k1 - k0).abs() / k0 < 1e-3, "{k0} vs {k1}");
        // scaling invariance
        let mut s = a.clone();
        s.scale(-3.25);
        let k2 = condition_number_2(&s, 1e-5).unwrap();
        assert!((k2 - k0).abs() / k0 < 1e-3, "{k0} vs {k2}");
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0)]);
        assert!(condition_number_2(&a, 1e-4).is_err());
    }
}
