use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triples. Duplicated
    /// coordinates and out-of-range indices are rejected.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::validation(format!(
                "entry ({r}, {c}) outside a {rows}x{cols} matrix"
            )));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::validation(format!(
                "duplicate entry at ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_ptr = vec![0; rows + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx: entries.iter().map(|&(_, c, _)| c as u32).collect(),
            values: entries.iter().map(|&(_, _, v)| v).collect(),
        })
    }

    /// Binary matrix with a one at every `(row, col)` in `rows_cols`.
    pub fn binary(rows: usize, cols: usize, rows_cols: &[Vec<u32>]) -> Result<Self> {
        let entries = rows_cols
            .iter()
            .enumerate()
            .flat_map(|(r, cs)| cs.iter().map(move |&c| (r, c as usize, 1.0)))
            .collect();
        Self::from_triplets(rows, cols, entries)
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

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    /// `self * x` for a dense `cols x k` matrix.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.cols, "dimension mismatch");
        let mut out = DMatrix::zeros(self.rows, x.ncols());
        for (r, c, v) in self.iter() {
            for k in 0..x.ncols() {
                out[(r, k)] += v * x[(c, k)];
            }
        }
        out
    }

    /// `self^T * x` for a dense `rows x k` matrix.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.rows, "dimension mismatch");
        let mut out = DMatrix::zeros(self.cols, x.ncols());
        for (r, c, v) in self.iter() {
            for k in 0..x.ncols() {
                out[(c, k)] += v * x[(r, k)];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            out[(r, c)] = v;
        }
        out
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Copy with every non-zero row scaled to unit Euclidean norm.
    pub fn l2_normalize_rows(&self) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            let range = self.row_ptr[r]..self.row_ptr[r + 1];
            let norm = out.values[range.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.values[range].iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_csr() {
        let m = SparseMatrix::from_triplets(3, 4, vec![(2, 1, 5.0), (0, 3, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0), (&[0u32, 3][..], &[2.0, 1.0][..]));
        assert_eq!(m.row(1).0.len(), 0);
        assert_eq!(m.to_dense()[(2, 1)], 5.0);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(1, 1, 1.0), (1, 1, 2.0)]).is_err());
    }

    #[test]
    fn products_match_dense() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.mul_dense(&x), m.to_dense() * &x);
        let y = DMatrix::from_row_slice(2, 1, &[1.0, -2.0]);
        assert_eq!(m.tr_mul_dense(&y), m.to_dense().transpose() * &y);
    }

    #[test]
    fn row_normalisation() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 3.0), (0, 1, 4.0)]).unwrap();
        let n = m.l2_normalize_rows();
        assert_eq!(n.row(0).1, &[0.6, 0.8]);
        assert!(n.row(1).1.is_empty());
    }
}
