//! End-to-end training and prediction.
//!
//! Learned mode: label embedding → feature projector `W` → activations
//! `XW` → random Fourier features → link weights. `random` swaps the label
//! embedding for a Gaussian projector; `none` uses independent per-class
//! logistic regressions as the activations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Idf};
use crate::embedding::{cs_projector, embed, feature_projector, project_activations, EmbeddingConfig};
use crate::error::{config_err, Error, Result};
use crate::inference::LabelFrequencies;
use crate::kernel::{featurize, median_bandwidth, sample_feature_map, FeatureMap, KernelFamily};
use crate::link::{fit_independent_logistic, fit_link, predict_scores, LinkModel, LossKind, OptimizerConfig};
use crate::rng::Rng;
use crate::tensor::{DenseMatrix, SparseMatrix};

/// Number of random row pairs for the median bandwidth heuristic.
pub const MEDIAN_PAIRS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    Learned,
    Random,
    None,
}

impl fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingMode::Learned => "learned",
            EmbeddingMode::Random => "random",
            EmbeddingMode::None => "none",
        })
    }
}

impl FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(EmbeddingMode::Learned),
            "random" => Ok(EmbeddingMode::Random),
            "none" => Ok(EmbeddingMode::None),
            _ => config_err(format!("unknown embedding mode '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "median" {
            return Ok(Bandwidth::Median);
        }
        match s.parse::<f64>() {
            Ok(g) if g > 0.0 && g.is_finite() => Ok(Bandwidth::Fixed(g)),
            _ => config_err(format!("bandwidth must be 'median' or a positive number, got '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Embedding dimension `k`; ignored with `EmbeddingMode::None`.
    pub rank: usize,
    pub oversample: usize,
    pub power_iters: usize,
    /// Ridge regularization of the embedding and feature projector. In
    /// `none` mode the independent logistic regressions use `l2 / n` on the
    /// mean loss, the same trade-off on the per-example scale.
    pub l2: f64,
    pub embedding: EmbeddingMode,
    /// `None` feeds the activations to the link directly.
    pub kernel: Option<KernelFamily>,
    pub features: usize,
    pub bandwidth: Bandwidth,
    pub loss: LossKind,
    pub l2_link: f64,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub tfidf: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rank: 10,
            oversample: crate::embedding::DEFAULT_OVERSAMPLE,
            power_iters: crate::embedding::DEFAULT_POWER_ITERS,
            l2: 1.0,
            embedding: EmbeddingMode::Learned,
            kernel: Some(KernelFamily::Gaussian),
            features: 1000,
            bandwidth: Bandwidth::Median,
            loss: LossKind::PerClassLogistic,
            l2_link: 0.0,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            tfidf: false,
        }
    }
}

impl PipelineConfig {
    pub fn embedding_config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            rank: self.rank,
            oversample: self.oversample,
            power_iters: self.power_iters,
            lambda: self.l2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding != EmbeddingMode::None && self.rank == 0 {
            return config_err("rank must be at least 1");
        }
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return config_err(format!("l2 must be finite and >= 0, got {}", self.l2));
        }
        if !(self.l2_link >= 0.0) || !self.l2_link.is_finite() {
            return config_err(format!("l2-link must be finite and >= 0, got {}", self.l2_link));
        }
        if self.kernel.is_some() && self.features == 0 {
            return config_err("number of random features must be positive");
        }
        if let Bandwidth::Fixed(g) = self.bandwidth {
            if !(g > 0.0) || !g.is_finite() {
                return config_err(format!("bandwidth must be positive, got {g}"));
            }
        }
        self.optimizer.validate()
    }
}

/// A trained model. Dimension chain: `W` is `d × k`, the feature map takes
/// `k` inputs to `s` features, `V` is `s × c` (`k × c` without a kernel).
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub n_features: usize,
    pub n_labels: usize,
    /// `c × k`; absent in `none` mode.
    pub label_projector: Option<DenseMatrix>,
    /// Singular value estimates of the learned embedding (empty otherwise).
    pub sigma: Vec<f64>,
    /// `d × k`
    pub activation_projector: DenseMatrix,
    pub feature_map: Option<FeatureMap>,
    pub link: LinkModel,
    pub label_frequencies: LabelFrequencies,
    pub idf: Option<Idf>,
}

impl Pipeline {
    pub fn activation_dim(&self) -> usize {
        self.activation_projector.cols()
    }

    /// Checks that all stored parts chain together.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Format(format!("inconsistent model: {msg}")));
        let (d, c) = (self.n_features, self.n_labels);
        let k = self.activation_dim();
        if self.activation_projector.rows() != d {
            return fail(format!("W has {} rows, model has {d} features", self.activation_projector.rows()));
        }
        match (&self.label_projector, self.config.embedding) {
            (Some(u), EmbeddingMode::Learned | EmbeddingMode::Random) => {
                if u.shape() != (c, k) {
                    return fail(format!("U is {}x{}, expected {c}x{k}", u.rows(), u.cols()));
                }
            }
            (None, EmbeddingMode::None) => {
                if k != c {
                    return fail(format!("independent activations have width {k}, expected {c}"));
                }
            }
            _ => return fail("label projector does not match embedding mode".into()),
        }
        if self.sigma.len() > k {
            return fail(format!("{} singular values for rank {k}", self.sigma.len()));
        }
        let link_in = match &self.feature_map {
            Some(map) => {
                if map.input_dim() != k {
                    return fail(format!("R has {} rows, activations have {k}", map.input_dim()));
                }
                map.n_features()
            }
            None => k,
        };
        if self.feature_map.is_some() != self.config.kernel.is_some() {
            return fail("feature map presence does not match kernel setting".into());
        }
        if self.link.weights.shape() != (link_in, c) {
            return fail(format!(
                "V is {}x{}, expected {link_in}x{c}",
                self.link.weights.rows(),
                self.link.weights.cols()
            ));
        }
        if self.label_frequencies.p.len() != c {
            return fail(format!("{} label frequencies for {c} labels", self.label_frequencies.p.len()));
        }
        if let Some(idf) = &self.idf {
            if idf.weights.len() != d {
                return fail(format!("{} idf weights for {d} features", idf.weights.len()));
            }
        }
        Ok(())
    }

    /// Link-function inputs for raw features `x`.
    pub fn link_design(&self, x: &SparseMatrix) -> Result<DenseMatrix> {
        if x.n_cols() != self.n_features {
            return config_err(format!(
                "model expects {} features, input has {}",
                self.n_features,
                x.n_cols()
            ));
        }
        let weighted;
        let x = match &self.idf {
            Some(idf) => {
                weighted = idf.transform(x)?;
                &weighted
            }
            None => x,
        };
        let p = project_activations(x, &self.activation_projector)?;
        match &self.feature_map {
            Some(map) => featurize(&p, map),
            None => Ok(p),
        }
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

pub fn train_pipeline(train: &Dataset, config: &PipelineConfig) -> Result<Pipeline> {
    stage("configuration", config.validate())?;
    let (n, d, c) = (train.n_examples(), train.n_features(), train.n_labels());
    if n == 0 {
        return Err(Error::Data("training set is empty".into()));
    }
    if c == 0 {
        return Err(Error::Data("training set has no labels".into()));
    }
    let root = Rng::new(config.seed);
    let idf = config.tfidf.then(|| Idf::fit(&train.x));
    let weighted;
    let x = match &idf {
        Some(idf) => {
            weighted = stage("tf-idf", idf.transform(&train.x))?;
            &weighted
        }
        None => &train.x,
    };
    let y = &train.y;

    let (label_projector, sigma, w) = match config.embedding {
        EmbeddingMode::Learned => {
            let (model, emb) = stage("embedding", embed(x, y, &config.embedding_config(), config.seed))?;
            log::info!(
                "embedding: rank {}, sigma[0] = {:.4e}",
                model.rank(),
                emb.sigma.first().copied().unwrap_or(0.0)
            );
            (Some(model.label_projector), model.sigma, model.feature_projector)
        }
        EmbeddingMode::Random => {
            if config.rank > d {
                return stage("embedding", config_err(format!("rank {} exceeds feature count {d}", config.rank)));
            }
            let u = stage("embedding", cs_projector(c, config.rank, &mut root.fork_named("random-projector")))?;
            let w = stage("feature projector", feature_projector(x, y, &u, config.l2))?;
            (Some(u), Vec::new(), w)
        }
        EmbeddingMode::None => {
            let w = stage(
                "independent classifiers",
                fit_independent_logistic(
                    x,
                    y,
                    config.l2 / n as f64,
                    &config.optimizer,
                    &mut root.fork_named("independent"),
                ),
            )?;
            (None, Vec::new(), w)
        }
    };

    let p = stage("activations", project_activations(x, &w))?;
    let feature_map = match config.kernel {
        Some(family) => {
            let gamma = match config.bandwidth {
                Bandwidth::Fixed(g) => g,
                Bandwidth::Median => stage(
                    "bandwidth",
                    median_bandwidth(&p, MEDIAN_PAIRS, &mut root.fork_named("bandwidth")),
                )?,
            };
            log::info!("kernel {family}, bandwidth {gamma:.4e}, {} features", config.features);
            Some(stage(
                "feature map",
                sample_feature_map(p.cols(), config.features, family, gamma, &mut root.fork_named("features")),
            )?)
        }
        None => None,
    };
    let design = match &feature_map {
        Some(map) => stage("featurize", featurize(&p, map))?,
        None => p,
    };
    let link = stage(
        "link",
        fit_link(&design, y, config.loss, config.l2_link, &config.optimizer, &mut root.fork_named("link")),
    )?;
    let pipeline = Pipeline {
        config: config.clone(),
        n_features: d,
        n_labels: c,
        label_projector,
        sigma,
        activation_projector: w,
        feature_map,
        link,
        label_frequencies: LabelFrequencies::from_labels(y),
        idf,
    };
    pipeline.validate()?;
    Ok(pipeline)
}

/// Predicted label probabilities (`n × c`).
pub fn predict(pipeline: &Pipeline, x: &SparseMatrix) -> Result<DenseMatrix> {
    pipeline.validate()?;
    let design = pipeline.link_design(x)?;
    predict_scores(&pipeline.link, &design)
}
