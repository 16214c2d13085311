//! Compressed-row sparse matrices with MatrixMarket import/export.

use std::io::{BufRead, Write};

use super::LinAlgError;

/// CSR matrix. Column indices are sorted and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            assert!(r < n_rows && c < n_cols, "triplet out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] = col_idx.len();
                last = Some((r, c));
            }
        }
        // forward-fill empty rows
        for r in 0..n_rows {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Build from a fixed sparsity pattern with all-zero values.
    /// `pattern` holds sorted, unique (row, col) pairs.
    pub fn from_pattern(n_rows: usize, n_cols: usize, pattern: &[(usize, usize)]) -> Self {
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(pattern.len());
        for &(r, c) in pattern {
            debug_assert!(r < n_rows && c < n_cols);
            col_idx.push(c);
            row_ptr[r + 1] = col_idx.len();
        }
        for r in 0..n_rows {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(i) => vals[i],
            Err(_) => 0.0,
        }
    }

    /// Add `v` to the stored entry (r, c); the entry must be in the pattern.
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        let cols = &self.col_idx[span.clone()];
        let i = cols
            .binary_search(&c)
            .unwrap_or_else(|_| panic!("entry ({r}, {c}) outside the symbolic pattern"));
        self.values[span.start + i] += v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c];
            }
            y[r] = s;
        }
    }

    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        y.fill(0.0);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[r];
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((*c, r, *v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, &triplets)
    }

    /// Entrywise sum over the union pattern.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for r in 0..m.n_rows {
                let (cols, vals) = m.row(r);
                for (c, v) in cols.iter().zip(vals) {
                    triplets.push((r, *c, *v));
                }
            }
        }
        Self::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Largest absolute entrywise difference against another matrix over the
    /// union of both patterns.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m = 0.0f64;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                m = m.max((v - other.get(r, *c)).abs());
            }
            let (cols, vals) = other.row(r);
            for (c, v) in cols.iter().zip(vals) {
                m = m.max((v - self.get(r, *c)).abs());
            }
        }
        m
    }

    /// MatrixMarket coordinate format, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(r: &mut R) -> Result<Self, LinAlgError> {
        let bad = |msg: &str| LinAlgError::BadMatrixMarket(msg.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        if !header.starts_with("%%MatrixMarket matrix coordinate real") {
            return Err(bad("expected: coordinate real header"));
        }
        let mut sizes: Option<(usize, usize, usize)> = None;
        let mut triplets = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let mut it = t.split_whitespace();
            match sizes {
                None => {
                    let n: usize = it.next().ok_or_else(|| bad("sizes"))?.parse().map_err(|_| bad("sizes"))?;
                    let m: usize = it.next().ok_or_else(|| bad("sizes"))?.parse().map_err(|_| bad("sizes"))?;
                    let nnz: usize = it.next().ok_or_else(|| bad("sizes"))?.parse().map_err(|_| bad("sizes"))?;
                    sizes = Some((n, m, nnz));
                    triplets.reserve(nnz);
                }
                Some(_) => {
                    let r1: usize = it.next().ok_or_else(|| bad("entry"))?.parse().map_err(|_| bad("entry"))?;
                    let c1: usize = it.next().ok_or_else(|| bad("entry"))?.parse().map_err(|_| bad("entry"))?;
                    let v: f64 = it.next().ok_or_else(|| bad("entry"))?.parse().map_err(|_| bad("entry"))?;
                    if r1 == 0 || c1 == 0 {
                        return Err(bad("indices are 1-based"));
                    }
                    triplets.push((r1 - 1, c1 - 1, v));
                }
            }
        }
        let (n, m, nnz) = sizes.ok_or_else(|| bad("missing size line"))?;
        if triplets.len() != nnz {
            return Err(bad("entry count does not match header"));
        }
        Ok(Self::from_triplets(n, m, &triplets))
    }
}

/// MatrixMarket array format for dense vectors.
pub fn write_vector_matrix_market<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{:.17e}", x)?;
    }
    Ok(())
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
