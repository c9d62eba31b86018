//! Ridge least squares, column orthonormalization and small symmetric
//! eigendecomposition.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::dense::{axpy_slice, dot, DenseMatrix};
use super::sparse::SparseMatrix;
use crate::error::{config_err, Error, Result};
use crate::rng::Rng;

/// Largest feature dimension solved by dense Cholesky under [`RidgeMethod::Auto`].
pub const DIRECT_SOLVE_MAX_DIM: usize = 2000;

/// Relative tolerance on the normal-equation residual, measured against `‖AᵀB‖_F`.
pub const RIDGE_TOL: f64 = 1e-8;

/// Relative column norm below which [`orthonormalize`] treats a column as dependent.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RidgeMethod {
    /// Cholesky up to [`DIRECT_SOLVE_MAX_DIM`] features, conjugate gradient above.
    Auto,
    Cholesky,
    ConjugateGradient,
}

/// Lower-triangular Cholesky factor of a dense SPD matrix.
#[derive(Clone, Debug)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub(crate) fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.rows();
        let mut l = a.as_slice().to_vec();
        let max_diag = (0..n).map(|i| a.get(i, i)).fold(0.0f64, f64::max);
        let floor = max_diag * 1e-13;
        for j in 0..n {
            let (head, tail) = l.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            for k in 0..j {
                let row_k = &head[k * n..(k + 1) * n];
                let s = row_j[k] - dot(&row_j[..k], &row_k[..k]);
                row_j[k] = s / row_k[k];
            }
            let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            if !(d > floor) || d <= 0.0 {
                return Err(Error::IllConditioned(format!(
                    "normal matrix is numerically singular (pivot {d:.3e} at column {j}); \
                     use a positive regularization"
                )));
            }
            row_j[j] = d.sqrt();
            row_j[j + 1..].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(Cholesky { n, l })
    }

    /// Solves `L Lᵀ X = B` for every column of `b`.
    pub(crate) fn solve(&self, b: &DenseMatrix) -> DenseMatrix {
        let (n, m) = (self.n, b.cols());
        let mut x = b.clone();
        for i in 0..n {
            let li = &self.l[i * n..(i + 1) * n];
            let (done, rest) = x.as_mut_slice().split_at_mut(i * m);
            let xi = &mut rest[..m];
            for k in 0..i {
                if li[k] != 0.0 {
                    axpy_slice(xi, -li[k], &done[k * m..(k + 1) * m]);
                }
            }
            let d = li[i];
            xi.iter_mut().for_each(|v| *v /= d);
        }
        for i in (0..n).rev() {
            let (head, rest) = x.as_mut_slice().split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            for k in (i + 1)..n {
                let lki = self.l[k * n + i];
                if lki != 0.0 {
                    axpy_slice(xi, -lki, &rest[(k - i - 1) * m..(k - i) * m]);
                }
            }
            let d = self.l[i * n + i];
            xi.iter_mut().for_each(|v| *v /= d);
        }
        x
    }
}

enum Backend {
    Direct(Cholesky),
    Iterative { inv_diag: Vec<f64> },
}

/// Reusable ridge system `min_Z ‖B − AZ‖²_F + λ‖Z‖²_F` for a fixed sparse `A`.
///
/// Factorizes (or prepares the preconditioner) once; each [`RidgeSystem::solve`]
/// only pays for the right-hand side.
pub struct RidgeSystem<'a> {
    a: &'a SparseMatrix,
    at: SparseMatrix,
    lambda: f64,
    backend: Backend,
    max_iterations: Option<usize>,
}

impl<'a> RidgeSystem<'a> {
    pub fn new(a: &'a SparseMatrix, lambda: f64) -> Result<Self> {
        Self::with_method(a, lambda, RidgeMethod::Auto)
    }

    pub fn with_method(a: &'a SparseMatrix, lambda: f64, method: RidgeMethod) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return config_err(format!("ridge lambda must be finite and >= 0, got {lambda}"));
        }
        let at = a.transpose();
        let d = a.n_cols();
        let direct = match method {
            RidgeMethod::Auto => d <= DIRECT_SOLVE_MAX_DIM,
            RidgeMethod::Cholesky => true,
            RidgeMethod::ConjugateGradient => false,
        };
        let backend = if direct {
            let mut gram = sparse_gram(a, &at);
            for j in 0..d {
                let v = gram.get(j, j) + lambda;
                gram.set(j, j, v);
            }
            Backend::Direct(Cholesky::factor(&gram)?)
        } else {
            let diag = a.column_sq_norms();
            let inv_diag = diag
                .iter()
                .map(|&v| {
                    let v = v + lambda;
                    if v > 0.0 {
                        1.0 / v
                    } else {
                        1.0
                    }
                })
                .collect();
            Backend::Iterative { inv_diag }
        };
        Ok(RidgeSystem {
            a,
            at,
            lambda,
            backend,
            max_iterations: None,
        })
    }

    #[cfg(test)]
    fn with_iteration_cap(mut self, cap: usize) -> Self {
        self.max_iterations = Some(cap);
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Cached transpose of the design matrix.
    pub fn design_t(&self) -> &SparseMatrix {
        &self.at
    }

    // (AᵀA + λI) z
    fn apply_normal(&self, z: &DenseMatrix) -> DenseMatrix {
        let az = self.a.spmm(z).expect("shapes checked");
        let mut out = self.at.spmm(&az).expect("shapes checked");
        if self.lambda != 0.0 {
            out.axpy(self.lambda, z);
        }
        out
    }

    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows() != self.a.n_rows() {
            return config_err(format!(
                "ridge: design has {} rows, targets have {}",
                self.a.n_rows(),
                b.rows()
            ));
        }
        let rhs = self.at.spmm(b)?;
        let rhs_norm = rhs.frobenius_norm();
        if rhs_norm == 0.0 {
            return Ok(DenseMatrix::zeros(self.a.n_cols(), b.cols()));
        }
        match &self.backend {
            Backend::Direct(chol) => self.solve_direct(chol, &rhs, rhs_norm),
            Backend::Iterative { inv_diag } => self.solve_cg(inv_diag, &rhs, rhs_norm),
        }
    }

    fn solve_direct(&self, chol: &Cholesky, rhs: &DenseMatrix, rhs_norm: f64) -> Result<DenseMatrix> {
        let mut z = chol.solve(rhs);
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let resid = rhs.sub(&self.apply_normal(&z));
            rel = resid.frobenius_norm() / rhs_norm;
            if rel <= RIDGE_TOL {
                return Ok(z);
            }
            z.axpy(1.0, &chol.solve(&resid));
        }
        Err(Error::IllConditioned(format!(
            "direct ridge solve reached relative residual {rel:.3e} > {RIDGE_TOL:e}; \
             increase the regularization"
        )))
    }

    fn solve_cg(&self, inv_diag: &[f64], rhs: &DenseMatrix, rhs_norm: f64) -> Result<DenseMatrix> {
        let (d, m) = rhs.shape();
        let cap = self.max_iterations.unwrap_or(10 * d.max(1));
        let target = RIDGE_TOL * rhs_norm;
        let mut z = DenseMatrix::zeros(d, m);
        let mut r = rhs.clone();
        let mut iterations = 0;
        loop {
            // Preconditioned CG on all columns at once, one step size per column.
            let mut s = precondition(&r, inv_diag);
            let mut p = s.clone();
            let mut rs = col_dots(&r, &s);
            let mut converged = false;
            while iterations < cap {
                let ap = self.apply_normal(&p);
                let pap = col_dots(&p, &ap);
                let alpha: Vec<f64> = rs
                    .iter()
                    .zip(&pap)
                    .map(|(&a, &b)| if b > 0.0 { a / b } else { 0.0 })
                    .collect();
                update_cols(&mut z, &alpha, &p, 1.0);
                update_cols(&mut r, &alpha, &ap, -1.0);
                iterations += 1;
                if r.frobenius_norm() <= target {
                    converged = true;
                    break;
                }
                s = precondition(&r, inv_diag);
                let rs_new = col_dots(&r, &s);
                let beta: Vec<f64> = rs_new
                    .iter()
                    .zip(&rs)
                    .map(|(&a, &b)| if b > 0.0 { a / b } else { 0.0 })
                    .collect();
                rs = rs_new;
                // p = s + beta p
                p.as_mut_slice()
                    .par_chunks_mut(m)
                    .zip(s.as_slice().par_chunks(m))
                    .for_each(|(pr, sr)| {
                        for ((pv, &sv), &bv) in pr.iter_mut().zip(sr).zip(&beta) {
                            *pv = sv + bv * *pv;
                        }
                    });
            }
            // Recurrence residuals drift; confirm against the true residual.
            let true_r = rhs.sub(&self.apply_normal(&z));
            let rel = true_r.frobenius_norm() / rhs_norm;
            if rel <= RIDGE_TOL {
                return Ok(z);
            }
            if !converged || iterations >= cap {
                return Err(Error::NotConverged {
                    iterations,
                    residual: rel,
                });
            }
            r = true_r;
        }
    }
}

fn sparse_gram(a: &SparseMatrix, at: &SparseMatrix) -> DenseMatrix {
    let d = a.n_cols();
    let mut gram = DenseMatrix::zeros(d, d);
    if d == 0 {
        return gram;
    }
    gram.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(j, out)| {
            let (rows, vals) = at.row(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let (cols, avals) = a.row(i);
                for (&c, &w) in cols.iter().zip(avals) {
                    out[c] += v * w;
                }
            }
        });
    gram
}

const DOT_BLOCK: usize = 1024;

/// Per-column inner products of two equally shaped row-major matrices, with a
/// fixed blocked summation order.
fn col_dots(a: &DenseMatrix, b: &DenseMatrix) -> Vec<f64> {
    let m = a.cols();
    if m == 0 {
        return Vec::new();
    }
    let partials: Vec<Vec<f64>> = a
        .as_slice()
        .par_chunks(m * DOT_BLOCK)
        .zip(b.as_slice().par_chunks(m * DOT_BLOCK))
        .map(|(ab, bb)| {
            let mut acc = vec![0.0; m];
            for (ar, br) in ab.chunks(m).zip(bb.chunks(m)) {
                for ((s, x), y) in acc.iter_mut().zip(ar).zip(br) {
                    *s += x * y;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; m];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

fn precondition(r: &DenseMatrix, inv_diag: &[f64]) -> DenseMatrix {
    let m = r.cols();
    let mut s = r.clone();
    if m == 0 {
        return s;
    }
    s.as_mut_slice()
        .par_chunks_mut(m)
        .zip(inv_diag.par_iter())
        .for_each(|(row, &w)| row.iter_mut().for_each(|v| *v *= w));
    s
}

// y[:, j] += sign * coef[j] * x[:, j]
fn update_cols(y: &mut DenseMatrix, coef: &[f64], x: &DenseMatrix, sign: f64) {
    let m = y.cols();
    if m == 0 {
        return;
    }
    y.as_mut_slice()
        .par_chunks_mut(m)
        .zip(x.as_slice().par_chunks(m))
        .for_each(|(yr, xr)| {
            for ((yv, &xv), &c) in yr.iter_mut().zip(xr).zip(coef) {
                *yv += sign * c * xv;
            }
        });
}

/// `argmin_Z ‖B − AZ‖²_F + λ‖Z‖²_F` for sparse `A`.
pub fn ridge_solve(a: &SparseMatrix, b: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    RidgeSystem::new(a, lambda)?.solve(b)
}

/// Dense counterpart of [`ridge_solve`] through the normal equations.
pub fn dense_ridge_solve(a: &DenseMatrix, b: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return config_err(format!(
            "ridge: design has {} rows, targets have {}",
            a.rows(),
            b.rows()
        ));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return config_err(format!("ridge lambda must be finite and >= 0, got {lambda}"));
    }
    let mut gram = a.t_matmul(a)?;
    for j in 0..a.cols() {
        let v = gram.get(j, j) + lambda;
        gram.set(j, j, v);
    }
    let rhs = a.t_matmul(b)?;
    let rhs_norm = rhs.frobenius_norm();
    if rhs_norm == 0.0 {
        return Ok(DenseMatrix::zeros(a.cols(), b.cols()));
    }
    let chol = Cholesky::factor(&gram)?;
    // gram already carries λ on its diagonal
    let apply = |z: &DenseMatrix| gram.matmul(z).expect("square");
    let mut z = chol.solve(&rhs);
    let mut rel = f64::INFINITY;
    for _ in 0..4 {
        let resid = rhs.sub(&apply(&z));
        rel = resid.frobenius_norm() / rhs_norm;
        if rel <= RIDGE_TOL {
            return Ok(z);
        }
        z.axpy(1.0, &chol.solve(&resid));
    }
    Err(Error::IllConditioned(format!(
        "dense ridge solve reached relative residual {rel:.3e}"
    )))
}

/// Orthonormal basis for the range of `m` by Householder QR, dropping columns
/// whose projected norm is at most [`RANK_TOL`] times the largest column norm.
///
/// Each kept basis vector is signed so that it has a positive inner product
/// with the column that produced it.
pub fn orthonormalize(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (c, k) = m.shape();
    if k > c {
        return config_err(format!("orthonormalize: {k} columns exceed {c} rows"));
    }
    let max_norm = (0..k)
        .map(|j| m.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    if max_norm == 0.0 {
        return Err(Error::Numerical("orthonormalize: matrix has empty range".into()));
    }
    // (householder vector over rows start.., start, sign of R diagonal)
    let mut reflectors: Vec<(Vec<f64>, usize, f64)> = Vec::new();
    for j in 0..k {
        let mut x = m.column(j);
        for (v, start, _) in &reflectors {
            apply_reflector(&mut x, v, *start);
        }
        let r = reflectors.len();
        let tail = &x[r..];
        let norm = tail.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOL * max_norm {
            continue;
        }
        let alpha = if tail[0] >= 0.0 { -norm } else { norm };
        let mut v = tail.to_vec();
        v[0] -= alpha;
        let vn = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v.iter_mut().for_each(|t| *t /= vn);
        reflectors.push((v, r, alpha.signum()));
    }
    let rank = reflectors.len();
    let mut q = DenseMatrix::zeros(c, rank);
    for t in 0..rank {
        let mut e = vec![0.0; c];
        e[t] = 1.0;
        for (v, start, _) in reflectors.iter().rev() {
            apply_reflector(&mut e, v, *start);
        }
        let sign = reflectors[t].2;
        for i in 0..c {
            q.set(i, t, sign * e[i]);
        }
    }
    Ok(q)
}

#[inline]
fn apply_reflector(x: &mut [f64], v: &[f64], start: usize) {
    let seg = &mut x[start..];
    let p = 2.0 * dot(v, seg);
    axpy_slice(seg, -p, v);
}

/// Leading `k` eigenpairs of a symmetric positive semidefinite matrix, by
/// cyclic Jacobi rotations. Eigenvalues are returned descending and clamped
/// at zero.
pub fn sym_eig_topk(f: &DenseMatrix, k: usize) -> Result<(DenseMatrix, Vec<f64>)> {
    let (vecs, vals) = sym_eig(f)?;
    if k > vals.len() {
        return config_err(format!("requested {k} eigenpairs of a {}x{} matrix", vals.len(), vals.len()));
    }
    Ok((vecs.columns(0, k), vals[..k].iter().map(|v| v.max(0.0)).collect()))
}

/// Full symmetric eigendecomposition, eigenvalues descending (unclamped).
pub fn sym_eig(f: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
    let n = f.rows();
    if f.cols() != n {
        return config_err("eigendecomposition needs a square matrix");
    }
    let scale = f.max_abs().max(1.0);
    if f.asymmetry() > 1e-10 * scale {
        return Err(Error::Numerical(format!(
            "matrix is not symmetric (max deviation {:.3e})",
            f.asymmetry()
        )));
    }
    let mut a = f.clone();
    a.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let fro = a.frobenius_norm();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * fro || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a.get(r, p);
                    let arq = a.get(r, q);
                    a.set(r, p, c * arp - s * arq);
                    a.set(r, q, s * arp + c * arq);
                }
                for r in 0..n {
                    let apr = a.get(p, r);
                    let aqr = a.get(q, r);
                    a.set(p, r, c * apr - s * aqr);
                    a.set(q, r, s * apr + c * aqr);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for r in 0..n {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, c * vrp - s * vrq);
                    v.set(r, q, s * vrp + c * vrq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)).then(i.cmp(&j)));
    let vals = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        // deterministic sign: largest-magnitude component positive
        let col = v.column(src);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vecs.set(r, dst, sign * col[r]);
        }
    }
    Ok((vecs, vals))
}

/// I.i.d. standard normal entries, drawn row by row.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    DenseMatrix::from_vec_unchecked(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ridge_identity_returns_targets() {
        let b = DenseMatrix::from_fn(4, 2, |i, j| i as f64 - j as f64 * 0.5);
        let z = ridge_solve(&SparseMatrix::identity(4), &b, 0.0).unwrap();
        for (x, y) in z.as_slice().iter().zip(b.as_slice()) {
            assert!(close(*x, *y, 1e-14));
        }
    }

    #[test]
    fn ridge_huge_lambda_shrinks_to_zero() {
        let a = SparseMatrix::from_rows(3, vec![vec![(0, 1.0), (2, 0.5)], vec![(1, -1.0)], vec![(2, 1.0)]]).unwrap();
        let b = DenseMatrix::from_fn(3, 2, |i, j| 0.3 * (i + j) as f64 - 0.2);
        let z = ridge_solve(&a, &b, 1e12).unwrap();
        assert!(z.frobenius_norm() <= 1e-10);
        let z = RidgeSystem::with_method(&a, 1e12, RidgeMethod::ConjugateGradient)
            .unwrap()
            .solve(&b)
            .unwrap();
        assert!(z.frobenius_norm() <= 1e-10);
    }

    #[test]
    fn ridge_rank_deficient_without_regularization_fails() {
        let a = SparseMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]]).unwrap();
        let b = DenseMatrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let err = ridge_solve(&a, &b, 0.0).unwrap_err();
        assert!(matches!(err, Error::IllConditioned(_)), "{err}");
        assert!(ridge_solve(&a, &b, 0.1).is_ok());
        let err = RidgeSystem::with_method(&a, -1.0, RidgeMethod::Auto).err().unwrap();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn cg_reports_non_convergence_with_residual() {
        let mut rng = Rng::new(3);
        let a = SparseMatrix::from_dense(&gaussian_matrix(&mut rng, 30, 20));
        let b = gaussian_matrix(&mut rng, 30, 2);
        let err = RidgeSystem::with_method(&a, 0.0, RidgeMethod::ConjugateGradient)
            .unwrap()
            .with_iteration_cap(3)
            .solve(&b)
            .unwrap_err();
        match err {
            Error::NotConverged { residual, .. } => assert!(residual > RIDGE_TOL),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn cg_solves_consistent_singular_system() {
        let a = SparseMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]]).unwrap();
        let b = DenseMatrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let z = RidgeSystem::with_method(&a, 0.0, RidgeMethod::ConjugateGradient)
            .unwrap()
            .solve(&b)
            .unwrap();
        assert!((z.get(0, 0) - 0.1).abs() < 1e-12 && (z.get(1, 0) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_hand_case() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let q = orthonormalize(&m).unwrap();
        assert_eq!(q.shape(), (3, 2));
        let want = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        for (x, y) in q.as_slice().iter().zip(want) {
            assert!(close(*x, y, 1e-15));
        }
    }

    #[test]
    fn orthonormalize_rank_one_collapse() {
        let v = [1.0, -2.0, 0.5, 3.0];
        let m = DenseMatrix::from_fn(4, 2, |i, j| v[i] * (j + 1) as f64);
        let q = orthonormalize(&m).unwrap();
        assert_eq!(q.cols(), 1);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..4 {
            assert!(close(q.get(i, 0), v[i] / n, 1e-14));
        }
        assert!(orthonormalize(&DenseMatrix::zeros(3, 2)).is_err());
        assert!(orthonormalize(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn eig_diagonal_and_2x2() {
        let f = DenseMatrix::from_rows(&[vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        let (u, vals) = sym_eig_topk(&f, 2).unwrap();
        assert_eq!(vals, vec![3.0, 2.0]);
        assert!(close(u.get(0, 0).abs(), 1.0, 1e-15));
        assert!(close(u.get(2, 1).abs(), 1.0, 1e-15));

        let f = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (_, vals) = sym_eig_topk(&f, 2).unwrap();
        assert!(close(vals[0], 3.0, 1e-14) && close(vals[1], 1.0, 1e-14));

        let (u, vals) = sym_eig_topk(&DenseMatrix::identity(5), 3).unwrap();
        assert_eq!(vals, vec![1.0; 3]);
        let g = u.t_matmul(&u).unwrap();
        assert!(g.sub(&DenseMatrix::identity(3)).max_abs() <= 1e-12);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let f = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(sym_eig_topk(&f, 1).is_err());
    }
}
