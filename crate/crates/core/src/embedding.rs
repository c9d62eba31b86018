//! Randomized label-space embedding.
//!
//! The label projector approximates the leading eigenvectors of
//! `M = Yᵀ X (XᵀX + λI)⁻¹ Xᵀ Y` by subspace iteration where every
//! multiplication by `M` is a ridge regression onto `k + ℓ` projected
//! label columns, so `c` never enters a solve.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::Rng;
use crate::tensor::{gaussian_matrix, orthonormalize, sym_eig, DenseMatrix, RidgeSystem, SparseMatrix, DIRECT_SOLVE_MAX_DIM};

pub const DEFAULT_OVERSAMPLE: usize = 20;
pub const DEFAULT_POWER_ITERS: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub rank: usize,
    pub oversample: usize,
    pub power_iters: usize,
    pub lambda: f64,
}

impl EmbeddingConfig {
    pub fn new(rank: usize) -> Self {
        EmbeddingConfig {
            rank,
            oversample: DEFAULT_OVERSAMPLE,
            power_iters: DEFAULT_POWER_ITERS,
            lambda: 0.0,
        }
    }

    pub fn validate(&self, n_examples: usize, n_labels: usize) -> Result<()> {
        if self.rank == 0 {
            return config_err("embedding rank must be at least 1");
        }
        if self.power_iters == 0 {
            return config_err("power iterations must be at least 1");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return config_err(format!("regularization must be finite and >= 0, got {}", self.lambda));
        }
        let width = self.rank + self.oversample;
        let limit = n_labels.min(n_examples);
        if width > limit {
            return config_err(format!(
                "rank + oversample = {width} exceeds min(labels, examples) = {limit}"
            ));
        }
        Ok(())
    }
}

/// Output of [`randomized_label_embedding`].
#[derive(Clone, Debug)]
pub struct LabelEmbedding {
    /// `c × k` label projector with orthonormal columns.
    pub projector: DenseMatrix,
    /// Leading `k` singular value estimates, descending.
    pub sigma: Vec<f64>,
    /// All `k + ℓ` (or fewer, after rank drop) singular value estimates.
    pub sigma_ext: Vec<f64>,
}

/// Label and feature projectors of a trained embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    /// `c × k`
    pub label_projector: DenseMatrix,
    /// `d × k`
    pub feature_projector: DenseMatrix,
    pub sigma: Vec<f64>,
    pub config: EmbeddingConfig,
    pub seed: u64,
}

impl EmbeddingModel {
    pub fn rank(&self) -> usize {
        self.label_projector.cols()
    }
}

fn check_rows(x: &SparseMatrix, y: &SparseMatrix) -> Result<()> {
    if x.n_rows() != y.n_rows() {
        return config_err(format!(
            "features have {} rows but labels have {}",
            x.n_rows(),
            y.n_rows()
        ));
    }
    Ok(())
}

// Yᵀ X Z with Z = argmin ‖YQ − XZ‖² + λ‖Z‖²
fn label_operator(
    system: &RidgeSystem<'_>,
    x: &SparseMatrix,
    y: &SparseMatrix,
    yt: &SparseMatrix,
    q: &DenseMatrix,
) -> Result<DenseMatrix> {
    let yq = y.spmm(q)?;
    let z = system.solve(&yq)?;
    let xz = x.spmm(&z)?;
    yt.spmm(&xz)
}

// Extends an orthonormal basis with random directions until it has `k` columns.
fn complete_basis(q: DenseMatrix, k: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    let mut q = q;
    let c = q.rows();
    while q.cols() < k {
        let extra = gaussian_matrix(rng, c, k - q.cols());
        let overlap = q.t_matmul(&extra)?;
        let mut resid = extra;
        resid.axpy(-1.0, &q.matmul(&overlap)?);
        let cols = q.cols() + resid.cols();
        let joined = DenseMatrix::from_fn(c, cols, |i, j| {
            if j < q.cols() {
                q.get(i, j)
            } else {
                resid.get(i, j - q.cols())
            }
        });
        q = orthonormalize(&joined)?;
    }
    Ok(q)
}

pub(crate) fn label_embedding_with(
    system: &RidgeSystem<'_>,
    x: &SparseMatrix,
    y: &SparseMatrix,
    config: &EmbeddingConfig,
    rng: &mut Rng,
) -> Result<LabelEmbedding> {
    check_rows(x, y)?;
    config.validate(y.n_rows(), y.n_cols())?;
    let c = y.n_cols();
    let k = config.rank;
    let yt = y.transpose();

    let mut q = gaussian_matrix(rng, c, k + config.oversample);
    for _ in 0..config.power_iters {
        let p = label_operator(system, x, y, &yt, &q)?;
        q = orthonormalize(&p).map_err(|e| match e {
            Error::Numerical(_) => Error::Numerical(
                "projected labels vanish: no label is predictable from the features".into(),
            ),
            other => other,
        })?;
    }
    if q.cols() < k {
        log::warn!(
            "label operator has numerical rank {} < requested rank {k}; padding with random directions",
            q.cols()
        );
        q = complete_basis(q, k, rng)?;
    }

    // Rayleigh-Ritz on the final basis: F = Qᵀ M Q.
    let p = label_operator(system, x, y, &yt, &q)?;
    let mut f = q.t_matmul(&p)?;
    f.symmetrize();
    let (vecs, vals) = sym_eig(&f)?;
    let sigma_ext: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let projector = q.matmul(&vecs.columns(0, k))?;
    Ok(LabelEmbedding {
        projector,
        sigma: sigma_ext[..k].to_vec(),
        sigma_ext,
    })
}

/// Label projector `U` (`c × k`) and singular value estimates.
pub fn randomized_label_embedding(
    x: &SparseMatrix,
    y: &SparseMatrix,
    config: &EmbeddingConfig,
    rng: &mut Rng,
) -> Result<LabelEmbedding> {
    check_rows(x, y)?;
    config.validate(y.n_rows(), y.n_cols())?;
    let system = RidgeSystem::new(x, config.lambda)?;
    label_embedding_with(&system, x, y, config, rng)
}

/// `W = argmin ‖YU − XW‖²_F + λ‖W‖²_F`.
pub fn feature_projector(
    x: &SparseMatrix,
    y: &SparseMatrix,
    u: &DenseMatrix,
    lambda: f64,
) -> Result<DenseMatrix> {
    check_rows(x, y)?;
    let system = RidgeSystem::new(x, lambda)?;
    system.solve(&y.spmm(u)?)
}

/// Oblivious Gaussian label projector with `N(0, 1/c)` entries, so columns
/// have roughly unit norm like a learned orthonormal projector.
pub fn cs_projector(c: usize, k: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    if k == 0 || k > c {
        return config_err(format!("random projector rank {k} must be in 1..={c}"));
    }
    let mut u = gaussian_matrix(rng, c, k);
    u.scale(1.0 / (c as f64).sqrt());
    Ok(u)
}

/// Projected activations `P = X W`.
pub fn project_activations(x: &SparseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    x.spmm(w)
}

/// `Σᵢ≤k σᵢ² / Σᵢ≤k+ℓ σ_extᵢ²`.
///
/// The denominator only covers the computed spectrum, so the ratio
/// overstates the share of the full label operator's trace.
pub fn captured_variance_fraction(sigma: &[f64], sigma_ext: &[f64]) -> Result<f64> {
    if sigma.len() > sigma_ext.len() {
        return config_err("leading spectrum longer than the extended spectrum");
    }
    let num: f64 = sigma.iter().map(|s| s * s).sum();
    let den: f64 = sigma_ext.iter().map(|s| s * s).sum();
    if den == 0.0 {
        return Err(Error::Numerical("captured variance: zero total spectrum".into()));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Exact share of `trace(Yᵀ X (XᵀX + λI)⁻¹ Xᵀ Y)` captured by `sigma`, using a
/// full least-squares fit of every label. Only for `d ≤ 2000`.
pub fn exact_captured_variance(
    x: &SparseMatrix,
    y: &SparseMatrix,
    sigma: &[f64],
    lambda: f64,
) -> Result<f64> {
    check_rows(x, y)?;
    if x.n_cols() > DIRECT_SOLVE_MAX_DIM {
        return config_err(format!(
            "exact variance diagnostic needs at most {DIRECT_SOLVE_MAX_DIM} features, got {}",
            x.n_cols()
        ));
    }
    let system = RidgeSystem::new(x, lambda)?;
    let yt = y.transpose();
    let n = y.n_rows();
    let mut total = 0.0;
    const BLOCK: usize = 256;
    let mut start = 0;
    while start < y.n_cols() {
        let end = (start + BLOCK).min(y.n_cols());
        let mut b = DenseMatrix::zeros(n, end - start);
        for j in start..end {
            let (rows, vals) = yt.row(j);
            for (&i, &v) in rows.iter().zip(vals) {
                b.set(i, j - start, v);
            }
        }
        let z = system.solve(&b)?;
        let xz = x.spmm(&z)?;
        total += b
            .as_slice()
            .iter()
            .zip(xz.as_slice())
            .map(|(a, b)| a * b)
            .sum::<f64>();
        start = end;
    }
    if total <= 0.0 {
        return Err(Error::Numerical("exact captured variance: zero total".into()));
    }
    let num: f64 = sigma.iter().map(|s| s * s).sum();
    Ok((num / total).clamp(0.0, 1.0))
}

/// Label projector, feature projector and spectrum in one pass over a shared
/// ridge factorization.
pub fn embed(
    x: &SparseMatrix,
    y: &SparseMatrix,
    config: &EmbeddingConfig,
    seed: u64,
) -> Result<(EmbeddingModel, LabelEmbedding)> {
    check_rows(x, y)?;
    config.validate(y.n_rows(), y.n_cols())?;
    if config.rank > x.n_cols() {
        return config_err(format!(
            "embedding rank {} exceeds feature count {}",
            config.rank,
            x.n_cols()
        ));
    }
    let mut rng = Rng::new(seed).fork_named("embedding");
    let system = RidgeSystem::new(x, config.lambda).map_err(|e| e.in_stage("ridge setup"))?;
    let emb = label_embedding_with(&system, x, y, config, &mut rng)?;
    let w = system.solve(&y.spmm(&emb.projector)?)?;
    let model = EmbeddingModel {
        label_projector: emb.projector.clone(),
        feature_projector: w,
        sigma: emb.sigma.clone(),
        config: *config,
        seed,
    };
    Ok((model, emb))
}
