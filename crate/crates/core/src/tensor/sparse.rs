use rayon::prelude::*;

use super::dense::{axpy_slice, DenseMatrix, ROW_CHUNK};
use crate::error::{config_err, data_err, Result};

/// Compressed sparse row matrix with strictly increasing column indices per
/// row and no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn try_new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return data_err(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            ));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != col_indices.len() {
            return data_err("row_offsets must start at 0 and end at nnz");
        }
        if col_indices.len() != values.len() {
            return data_err("col_indices and values differ in length");
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return data_err(format!("row_offsets decreases at row {i}"));
            }
            let cols = &col_indices[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return data_err(format!("column indices of row {i} not strictly increasing"));
            }
            if cols.last().is_some_and(|&c| c >= n_cols) {
                return data_err(format!("column index out of range in row {i}"));
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return data_err("values must be finite and nonzero");
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from per-row `(column, value)` lists. Entries are sorted, zeros
    /// dropped; duplicate columns within a row are an error.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return data_err(format!("duplicate column index in row {i}"));
            }
            for (c, v) in row {
                if c >= n_cols {
                    return data_err(format!("column {c} out of range ({n_cols}) in row {i}"));
                }
                if !v.is_finite() {
                    return data_err(format!("non-finite value in row {i}"));
                }
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            n_rows: row_offsets.len() - 1,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Binary matrix from per-row label lists (order and duplicates ignored).
    pub fn from_label_sets(n_cols: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let rows = sets
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort_unstable();
                s.dedup();
                s.into_iter().map(|j| (j, 1.0)).collect()
            })
            .collect();
        Self::from_rows(n_cols, rows)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let rows = (0..m.rows())
            .map(|i| m.row(i).iter().copied().enumerate().filter(|e| e.1 != 0.0).collect())
            .collect();
        Self::from_rows(m.cols(), rows).expect("dense matrix entries are finite")
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out.set(i, c, v);
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let p = next[c];
                col_indices[p] = i;
                values[p] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(idx.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for &i in idx {
            let (c, v) = self.row(i);
            col_indices.extend_from_slice(c);
            values.extend_from_slice(v);
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Same entries, wider or equal column space.
    pub fn with_n_cols(mut self, n_cols: usize) -> Result<SparseMatrix> {
        if self.col_indices.iter().any(|&c| c >= n_cols) {
            return data_err(format!("column index exceeds requested width {n_cols}"));
        }
        self.n_cols = n_cols;
        Ok(self)
    }

    /// Multiplies every stored value in column `j` by `scale[j]`, dropping
    /// entries that become zero.
    pub fn scale_columns(&self, scale: &[f64]) -> SparseMatrix {
        let rows = (0..self.n_rows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&c, &v)| (c, v * scale[c])).collect()
            })
            .collect();
        Self::from_rows(self.n_cols, rows).expect("scaled entries stay valid")
    }

    /// Labels of row `i` as column indices.
    pub fn row_indices(&self, i: usize) -> &[usize] {
        self.row(i).0
    }

    /// `self * b`
    pub fn spmm(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != b.rows() {
            return config_err(format!(
                "spmm: {}x{} sparse times {}x{} dense",
                self.n_rows,
                self.n_cols,
                b.rows(),
                b.cols()
            ));
        }
        let m = b.cols();
        let mut out = DenseMatrix::zeros(self.n_rows, m);
        if m == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(m * ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                for (r, out_row) in block.chunks_mut(m).enumerate() {
                    let (cols, vals) = self.row(chunk * ROW_CHUNK + r);
                    for (&c, &v) in cols.iter().zip(vals) {
                        axpy_slice(out_row, v, b.row(c));
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ * b`. Builds the transpose; hold on to [`SparseMatrix::transpose`]
    /// when doing this repeatedly.
    pub fn spmm_t(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != b.rows() {
            return config_err(format!(
                "spmm_t: {}x{} sparse (transposed) times {}x{} dense",
                self.n_rows,
                self.n_cols,
                b.rows(),
                b.cols()
            ));
        }
        self.transpose().spmm(b)
    }

    /// Squared column norms, i.e. the diagonal of `selfᵀ self`.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (&c, &v) in self.col_indices.iter().zip(&self.values) {
            out[c] += v * v;
        }
        out
    }
}
