//! Exact integer sparse matrices (CSR) for path-instance counting.

use crate::{Error, Result};

/// Row-major compressed sparse matrix of `u64` counts. Column indices are
/// strictly increasing within each row and stored values are nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<u64>,
}

/// Below this many dense cells the product runs on a dense buffer.
const DENSE_CELLS: usize = 1_000 * 1_000;

impl CountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col)` coordinates; repeated coordinates add up.
    pub fn from_coords(rows: usize, cols: usize, coords: &[(usize, usize)]) -> Self {
        let mut per_row: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for &(r, c) in coords {
            assert!(r < rows && c < cols, "coordinate ({r}, {c}) outside {rows}x{cols}");
            per_row[r].push(c);
        }
        let mut m = Self::zeros(rows, cols);
        for (r, mut cs) in per_row.into_iter().enumerate() {
            cs.sort_unstable();
            let mut i = 0;
            while i < cs.len() {
                let mut j = i;
                while j < cs.len() && cs[j] == cs[i] {
                    j += 1;
                }
                m.indices.push(cs[i]);
                m.values.push((j - i) as u64);
                i = j;
            }
            m.indptr[r + 1] = m.indices.len();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let k = next[c];
                indices[k] = r;
                values[k] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr: counts,
            indices,
            values,
        }
    }

    /// Sum of all entries, checked.
    pub fn total(&self) -> Result<u64> {
        self.values.iter().try_fold(0u64, |acc, &v| {
            acc.checked_add(v)
                .ok_or_else(|| Error::CountOverflow("matrix total".into()))
        })
    }

    /// Exact product. Picks a dense accumulator path for small outputs and a
    /// row-wise sparse accumulator (Gustavson) otherwise; both give identical
    /// results.
    pub fn matmul(&self, other: &CountMatrix) -> Result<CountMatrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "count matmul",
                &[self.rows, self.cols],
                &[other.rows, other.cols],
            ));
        }
        if self.rows * other.cols <= DENSE_CELLS {
            self.matmul_dense(other)
        } else {
            self.matmul_sparse(other)
        }
    }

    pub fn matmul_sparse(&self, other: &CountMatrix) -> Result<CountMatrix> {
        let mut out = Self::zeros(self.rows, other.cols);
        let mut acc = vec![0u64; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if acc[c] == 0 {
                        touched.push(c);
                    }
                    let p = a.checked_mul(b).ok_or_else(overflow)?;
                    acc[c] = acc[c].checked_add(p).ok_or_else(overflow)?;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                out.indices.push(c);
                out.values.push(acc[c]);
                acc[c] = 0;
            }
            touched.clear();
            out.indptr[r + 1] = out.indices.len();
        }
        Ok(out)
    }

    pub fn matmul_dense(&self, other: &CountMatrix) -> Result<CountMatrix> {
        let mut out = Self::zeros(self.rows, other.cols);
        let mut row = vec![0u64; other.cols];
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    let p = a.checked_mul(b).ok_or_else(overflow)?;
                    row[c] = row[c].checked_add(p).ok_or_else(overflow)?;
                }
            }
            for (c, v) in row.iter_mut().enumerate() {
                if *v != 0 {
                    out.indices.push(c);
                    out.values.push(*v);
                    *v = 0;
                }
            }
            out.indptr[r + 1] = out.indices.len();
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let mut d = vec![vec![0; self.cols]; self.rows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }
}

fn overflow() -> Error {
    Error::CountOverflow("commuting product".into())
}
