//! Learning the link weights `V` on top of featurized activations.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, data_err, Error, Result};
use crate::rng::Rng;
use crate::tensor::{axpy_slice, dense_ridge_solve, DenseMatrix, SparseMatrix, ROW_CHUNK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `½‖y − a‖²` per example.
    Squared,
    /// Softmax cross-entropy; exactly one label per example.
    MulticlassLogistic,
    /// Sum of independent binary logistic losses.
    PerClassLogistic,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Squared => "squared",
            LossKind::MulticlassLogistic => "logistic",
            LossKind::PerClassLogistic => "per-class-logistic",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "logistic" | "multiclass-logistic" => Ok(LossKind::MulticlassLogistic),
            "per-class-logistic" => Ok(LossKind::PerClassLogistic),
            other => config_err(format!("unknown loss '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Multiplicative learning-rate factor applied once per pass.
    pub lr_decay: f64,
    pub momentum: f64,
    pub passes: usize,
    pub batch_size: usize,
    pub precond_epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.1,
            lr_decay: 1.0,
            momentum: 0.9,
            passes: 10,
            batch_size: 1,
            precond_epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return config_err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return config_err(format!("learning rate decay must be in (0, 1], got {}", self.lr_decay));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return config_err(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return config_err("batch size must be at least 1");
        }
        if !(self.precond_epsilon > 0.0) {
            return config_err("preconditioner epsilon must be positive");
        }
        Ok(())
    }
}

/// Weights plus the AdaGrad accumulator and momentum buffer.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub weights: DenseMatrix,
    pub velocity: DenseMatrix,
    pub precond_accum: DenseMatrix,
    pub pass_index: usize,
}

impl OptimizerState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        OptimizerState {
            weights: DenseMatrix::zeros(rows, cols),
            velocity: DenseMatrix::zeros(rows, cols),
            precond_accum: DenseMatrix::zeros(rows, cols),
            pass_index: 0,
        }
    }
}

/// One preconditioned momentum step, in place.
pub fn sgd_step(state: &mut OptimizerState, grad: &DenseMatrix, config: &OptimizerConfig) {
    assert_eq!(state.weights.shape(), grad.shape(), "gradient shape");
    let lr = config.learning_rate * config.lr_decay.powi(state.pass_index as i32);
    let (mu, eps) = (config.momentum, config.precond_epsilon);
    const CHUNK: usize = 4096;
    state
        .weights
        .as_mut_slice()
        .par_chunks_mut(CHUNK)
        .zip(state.velocity.as_mut_slice().par_chunks_mut(CHUNK))
        .zip(state.precond_accum.as_mut_slice().par_chunks_mut(CHUNK))
        .zip(grad.as_slice().par_chunks(CHUNK))
        .for_each(|(((w, v), acc), g)| {
            for i in 0..w.len() {
                let gi = g[i];
                acc[i] += gi * gi;
                v[i] = mu * v[i] - lr * gi / (acc[i] + eps).sqrt();
                w[i] += v[i];
            }
        });
}

/// Row-addressable design matrix feeding the link fit.
pub trait Design: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// `D[rows, :] · V`
    fn rows_times(&self, rows: &[usize], v: &DenseMatrix) -> DenseMatrix;
    /// `D[rows, :]ᵀ · G`
    fn rows_t_times(&self, rows: &[usize], g: &DenseMatrix) -> DenseMatrix;
}

impl Design for DenseMatrix {
    fn n_rows(&self) -> usize {
        self.rows()
    }

    fn n_cols(&self) -> usize {
        self.cols()
    }

    fn rows_times(&self, rows: &[usize], v: &DenseMatrix) -> DenseMatrix {
        let c = v.cols();
        let mut out = DenseMatrix::zeros(rows.len(), c);
        if c == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(c)
            .zip(rows.par_iter())
            .for_each(|(o, &i)| {
                for (t, &a) in self.row(i).iter().enumerate() {
                    if a != 0.0 {
                        axpy_slice(o, a, v.row(t));
                    }
                }
            });
        out
    }

    fn rows_t_times(&self, rows: &[usize], g: &DenseMatrix) -> DenseMatrix {
        let c = g.cols();
        let mut out = DenseMatrix::zeros(self.cols(), c);
        if c == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(c)
            .enumerate()
            .for_each(|(t, o)| {
                for (r, &i) in rows.iter().enumerate() {
                    let a = self.get(i, t);
                    if a != 0.0 {
                        axpy_slice(o, a, g.row(r));
                    }
                }
            });
        out
    }
}

impl Design for SparseMatrix {
    fn n_rows(&self) -> usize {
        SparseMatrix::n_rows(self)
    }

    fn n_cols(&self) -> usize {
        SparseMatrix::n_cols(self)
    }

    fn rows_times(&self, rows: &[usize], v: &DenseMatrix) -> DenseMatrix {
        let c = v.cols();
        let mut out = DenseMatrix::zeros(rows.len(), c);
        if c == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(c)
            .zip(rows.par_iter())
            .for_each(|(o, &i)| {
                let (cols, vals) = self.row(i);
                for (&t, &a) in cols.iter().zip(vals) {
                    axpy_slice(o, a, v.row(t));
                }
            });
        out
    }

    fn rows_t_times(&self, rows: &[usize], g: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(SparseMatrix::n_cols(self), g.cols());
        for (r, &i) in rows.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&t, &a) in cols.iter().zip(vals) {
                axpy_slice(out.row_mut(t), a, g.row(r));
            }
        }
        out
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_multiclass(y: &SparseMatrix, rows: impl Iterator<Item = usize>) -> Result<()> {
    for i in rows {
        if y.row_nnz(i) != 1 {
            return data_err(format!(
                "multiclass loss needs exactly one label per example; example {i} has {}",
                y.row_nnz(i)
            ));
        }
    }
    Ok(())
}

// Overwrites `scores` with d(loss)/d(scores) scaled by `inv_m`; returns the
// summed per-row loss.
fn loss_and_score_grad(
    scores: &mut DenseMatrix,
    y: &SparseMatrix,
    rows: &[usize],
    loss: LossKind,
    inv_m: f64,
) -> f64 {
    let c = scores.cols();
    if c == 0 {
        return 0.0;
    }
    let per_row: Vec<f64> = scores
        .as_mut_slice()
        .par_chunks_mut(c)
        .zip(rows.par_iter())
        .map(|(a, &i)| {
            let (labels, vals) = y.row(i);
            match loss {
                LossKind::Squared => {
                    let mut l = 0.0;
                    let mut next = 0;
                    for (j, aj) in a.iter_mut().enumerate() {
                        let target = if next < labels.len() && labels[next] == j {
                            next += 1;
                            vals[next - 1]
                        } else {
                            0.0
                        };
                        let r = *aj - target;
                        l += 0.5 * r * r;
                        *aj = r * inv_m;
                    }
                    l
                }
                LossKind::PerClassLogistic => {
                    let mut l = 0.0;
                    let mut next = 0;
                    for (j, aj) in a.iter_mut().enumerate() {
                        let positive = next < labels.len() && labels[next] == j;
                        if positive {
                            next += 1;
                        }
                        let s = *aj;
                        let (margin, target) = if positive { (s, 1.0) } else { (-s, 0.0) };
                        l += softplus(-margin);
                        *aj = (sigmoid(s) - target) * inv_m;
                    }
                    l
                }
                LossKind::MulticlassLogistic => {
                    let label = labels[0];
                    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = a.iter().map(|v| (v - max).exp()).sum();
                    let lse = max + z.ln();
                    let l = lse - a[label];
                    for (j, aj) in a.iter_mut().enumerate() {
                        let p = (*aj - lse).exp();
                        *aj = (p - if j == label { 1.0 } else { 0.0 }) * inv_m;
                    }
                    l
                }
            }
        })
        .collect();
    per_row.iter().sum()
}

fn batch_value_grad<D: Design + ?Sized>(
    design: &D,
    rows: &[usize],
    y: &SparseMatrix,
    v: &DenseMatrix,
    loss: LossKind,
    lambda_v: f64,
) -> (f64, DenseMatrix) {
    let inv_m = 1.0 / rows.len() as f64;
    let mut scores = design.rows_times(rows, v);
    let total = loss_and_score_grad(&mut scores, y, rows, loss, inv_m);
    let mut grad = design.rows_t_times(rows, &scores);
    let mut value = total * inv_m;
    if lambda_v != 0.0 {
        value += lambda_v * v.as_slice().iter().map(|x| x * x).sum::<f64>();
        grad.axpy(2.0 * lambda_v, v);
    }
    (value, grad)
}

/// Mean loss over the batch plus `λ_v‖V‖²_F`, and its exact gradient in `V`.
pub fn loss_value_grad(
    v: &DenseMatrix,
    phi_batch: &DenseMatrix,
    y_batch: &SparseMatrix,
    loss: LossKind,
    lambda_v: f64,
) -> Result<(f64, DenseMatrix)> {
    if phi_batch.rows() != y_batch.n_rows() {
        return config_err("feature and label batches differ in length");
    }
    if phi_batch.cols() != v.rows() || y_batch.n_cols() != v.cols() {
        return config_err(format!(
            "weights are {}x{}, features have {} columns and labels {}",
            v.rows(),
            v.cols(),
            phi_batch.cols(),
            y_batch.n_cols()
        ));
    }
    if phi_batch.rows() == 0 {
        return config_err("empty batch");
    }
    if loss == LossKind::MulticlassLogistic {
        check_multiclass(y_batch, 0..y_batch.n_rows())?;
    }
    let rows: Vec<usize> = (0..phi_batch.rows()).collect();
    Ok(batch_value_grad(phi_batch, &rows, y_batch, v, loss, lambda_v))
}

/// Trained link weights `V` (`s × c`).
#[derive(Clone, Debug, PartialEq)]
pub struct LinkModel {
    pub weights: DenseMatrix,
    pub loss: LossKind,
    pub lambda_v: f64,
}

impl LinkModel {
    /// Raw scores `Φ V`.
    pub fn scores<D: Design + ?Sized>(&self, design: &D) -> Result<DenseMatrix> {
        if design.n_cols() != self.weights.rows() {
            return config_err(format!(
                "link expects {} inputs, got {}",
                self.weights.rows(),
                design.n_cols()
            ));
        }
        let rows: Vec<usize> = (0..design.n_rows()).collect();
        Ok(design.rows_times(&rows, &self.weights))
    }
}

/// Objective trace of a fit.
#[derive(Clone, Debug, Default)]
pub struct FitTrace {
    pub initial_objective: f64,
    /// Running mean of minibatch objectives during each pass.
    pub pass_objectives: Vec<f64>,
}

fn objective_at_zero(y: &SparseMatrix, loss: LossKind) -> f64 {
    let n = y.n_rows().max(1) as f64;
    match loss {
        LossKind::Squared => 0.5 * y.values().iter().map(|v| v * v).sum::<f64>() / n,
        LossKind::PerClassLogistic => y.n_cols() as f64 * std::f64::consts::LN_2,
        LossKind::MulticlassLogistic => (y.n_cols() as f64).ln(),
    }
}

pub fn fit_link<D: Design + ?Sized>(
    design: &D,
    y: &SparseMatrix,
    loss: LossKind,
    lambda_v: f64,
    config: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<LinkModel> {
    fit_link_traced(design, y, loss, lambda_v, config, rng).map(|(m, _)| m)
}

/// [`fit_link`] that also returns per-pass objectives.
pub fn fit_link_traced<D: Design + ?Sized>(
    design: &D,
    y: &SparseMatrix,
    loss: LossKind,
    lambda_v: f64,
    config: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<(LinkModel, FitTrace)> {
    config.validate()?;
    if !(lambda_v >= 0.0) || !lambda_v.is_finite() {
        return config_err(format!("link regularization must be >= 0, got {lambda_v}"));
    }
    let n = design.n_rows();
    if y.n_rows() != n {
        return config_err(format!("{n} feature rows but {} label rows", y.n_rows()));
    }
    if n == 0 {
        return config_err("no training examples");
    }
    if loss == LossKind::MulticlassLogistic {
        check_multiclass(y, 0..n)?;
    }
    let mut state = OptimizerState::zeros(design.n_cols(), y.n_cols());
    let initial = objective_at_zero(y, loss);
    let mut trace = FitTrace {
        initial_objective: initial,
        pass_objectives: Vec::with_capacity(config.passes),
    };
    let mut order: Vec<usize> = (0..n).collect();
    let batch = config.batch_size.min(n);
    for pass in 0..config.passes {
        state.pass_index = pass;
        order.shuffle(rng);
        let mut acc = 0.0;
        for rows in order.chunks(batch) {
            let (value, grad) = batch_value_grad(design, rows, y, &state.weights, loss, lambda_v);
            acc += value * rows.len() as f64;
            sgd_step(&mut state, &grad, config);
        }
        let objective = acc / n as f64;
        log::debug!("pass {pass}: objective {objective:.6}");
        if !objective.is_finite()
            || objective > 10.0 * initial.max(f64::MIN_POSITIVE)
            || !state.weights.is_finite()
        {
            return Err(Error::Numerical(format!(
                "link training diverged at pass {pass} (objective {objective:.4e}, initial {initial:.4e}); \
                 use a smaller learning rate"
            )));
        }
        trace.pass_objectives.push(objective);
    }
    Ok((
        LinkModel {
            weights: state.weights,
            loss,
            lambda_v,
        },
        trace,
    ))
}

/// Largest feature count for [`fit_link_exact_squared`].
pub const EXACT_SQUARED_MAX_FEATURES: usize = 5000;

/// Closed-form minimizer of the squared-loss objective,
/// `V = (ΦᵀΦ + 2nλ_v I)⁻¹ ΦᵀY`.
pub fn fit_link_exact_squared(phi: &DenseMatrix, y: &SparseMatrix, lambda_v: f64) -> Result<LinkModel> {
    if phi.cols() > EXACT_SQUARED_MAX_FEATURES {
        return config_err(format!(
            "exact squared fit supports at most {EXACT_SQUARED_MAX_FEATURES} features, got {}",
            phi.cols()
        ));
    }
    if phi.rows() != y.n_rows() {
        return config_err("feature and label row counts differ");
    }
    let n = phi.rows() as f64;
    let weights = dense_ridge_solve(phi, &y.to_dense(), 2.0 * n * lambda_v)?;
    Ok(LinkModel {
        weights,
        loss: LossKind::Squared,
        lambda_v,
    })
}

/// Independent per-class logistic regressions on raw features (`d × c`).
pub fn fit_independent_logistic(
    x: &SparseMatrix,
    y: &SparseMatrix,
    lambda: f64,
    config: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<DenseMatrix> {
    fit_link(x, y, LossKind::PerClassLogistic, lambda, config, rng).map(|m| m.weights)
}

/// Maps raw scores to probabilities in `[0, 1]` according to the loss.
pub fn scores_to_probabilities(scores: &mut DenseMatrix, loss: LossKind) {
    let c = scores.cols();
    if c == 0 {
        return;
    }
    scores
        .as_mut_slice()
        .par_chunks_mut(c * ROW_CHUNK)
        .for_each(|block| {
            for row in block.chunks_mut(c) {
                match loss {
                    LossKind::PerClassLogistic => row.iter_mut().for_each(|v| *v = sigmoid(*v)),
                    LossKind::Squared => row.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0)),
                    LossKind::MulticlassLogistic => {
                        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let mut z = 0.0;
                        for v in row.iter_mut() {
                            *v = (*v - max).exp();
                            z += *v;
                        }
                        row.iter_mut().for_each(|v| *v /= z);
                    }
                }
            }
        });
}

/// Predicted label probabilities for every row of `design`.
pub fn predict_scores<D: Design + ?Sized>(model: &LinkModel, design: &D) -> Result<DenseMatrix> {
    let mut z = model.scores(design)?;
    scores_to_probabilities(&mut z, model.loss);
    Ok(z)
}
