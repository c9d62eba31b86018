use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

/// Row-major dense `f64` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

// Rows per rayon task for row-parallel kernels. Output rows are always
// produced by a single task, so results do not depend on the thread count.
pub(crate) const ROW_CHUNK: usize = 64;

impl DenseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return config_err(format!(
                "dense matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return config_err("ragged rows");
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Columns `[start, end)`.
    pub fn columns(&self, start: usize, end: usize) -> DenseMatrix {
        let w = end - start;
        let mut data = Vec::with_capacity(self.rows * w);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        DenseMatrix::from_vec_unchecked(self.rows, w, data)
    }

    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix::from_vec_unchecked(idx.len(), self.cols, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(x, y)| *x += a * y);
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    fn check_inner(&self, other_rows: usize, what: &str) -> Result<()> {
        if self.cols != other_rows {
            return config_err(format!(
                "{what}: inner dimensions disagree ({}x{} vs {} rows)",
                self.rows, self.cols, other_rows
            ));
        }
        Ok(())
    }

    /// `self * other`
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_inner(other.rows, "matmul")?;
        let n = other.cols;
        let mut out = DenseMatrix::zeros(self.rows, n);
        if n == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(n * ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                for (r, out_row) in block.chunks_mut(n).enumerate() {
                    let i = chunk * ROW_CHUNK + r;
                    for (t, &a) in self.row(i).iter().enumerate() {
                        if a != 0.0 {
                            axpy_slice(out_row, a, other.row(t));
                        }
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ * other`
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return config_err(format!(
                "t_matmul: row counts disagree ({} vs {})",
                self.rows, other.rows
            ));
        }
        let n = other.cols;
        let mut out = DenseMatrix::zeros(self.cols, n);
        if n == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(t, out_row)| {
                for i in 0..self.rows {
                    let a = self.data[i * self.cols + t];
                    if a != 0.0 {
                        axpy_slice(out_row, a, other.row(i));
                    }
                }
            });
        Ok(out)
    }

    /// Max entrywise deviation from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub(crate) fn symmetrize(&mut self) {
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }
}

#[inline]
pub(crate) fn axpy_slice(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn matmul_small() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[2.0, 1.0, 4.0, 3.0]);
        let d = a.t_matmul(&a).unwrap();
        assert_eq!(d.as_slice(), &[10.0, 14.0, 14.0, 20.0]);
        assert!(a.matmul(&DenseMatrix::zeros(3, 1)).is_err());
    }
}
