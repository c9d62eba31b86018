//! Test-set metrics and percentile bootstrap intervals.

use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::inference::Inference;
use crate::rng::Rng;
use crate::tensor::SparseMatrix;

fn same_shape(y: &SparseMatrix, yhat: &SparseMatrix) -> Result<()> {
    if y.n_rows() != yhat.n_rows() || y.n_cols() != yhat.n_cols() {
        return config_err(format!(
            "label matrices differ in shape: {}x{} vs {}x{}",
            y.n_rows(),
            y.n_cols(),
            yhat.n_rows(),
            yhat.n_cols()
        ));
    }
    Ok(())
}

// (|a ∩ b|, |a \ b|, |b \ a|) for sorted index lists
fn overlap(a: &[usize], b: &[usize]) -> (usize, usize, usize) {
    let (mut i, mut j, mut both) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                both += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    (both, a.len() - both, b.len() - both)
}

pub fn hamming_loss_rows(y: &SparseMatrix, yhat: &SparseMatrix, rows: &[usize]) -> f64 {
    let slots = rows.len() * y.n_cols();
    if slots == 0 {
        return 0.0;
    }
    let wrong: usize = rows
        .iter()
        .map(|&i| {
            let (_, only_y, only_hat) = overlap(y.row_indices(i), yhat.row_indices(i));
            only_y + only_hat
        })
        .sum();
    wrong as f64 / slots as f64
}

/// Fraction of label slots where prediction and truth disagree.
pub fn hamming_loss(y: &SparseMatrix, yhat: &SparseMatrix) -> Result<f64> {
    same_shape(y, yhat)?;
    let rows: Vec<usize> = (0..y.n_rows()).collect();
    Ok(hamming_loss_rows(y, yhat, &rows))
}

pub fn macro_f1_rows(y: &SparseMatrix, yhat: &SparseMatrix, rows: &[usize]) -> f64 {
    let c = y.n_cols();
    if c == 0 {
        return 0.0;
    }
    let mut tp = vec![0usize; c];
    let mut fp = vec![0usize; c];
    let mut fn_ = vec![0usize; c];
    for &i in rows {
        let (a, b) = (y.row_indices(i), yhat.row_indices(i));
        let (mut p, mut q) = (0, 0);
        while p < a.len() || q < b.len() {
            if q == b.len() || (p < a.len() && a[p] < b[q]) {
                fn_[a[p]] += 1;
                p += 1;
            } else if p == a.len() || b[q] < a[p] {
                fp[b[q]] += 1;
                q += 1;
            } else {
                tp[a[p]] += 1;
                p += 1;
                q += 1;
            }
        }
    }
    let total: f64 = (0..c)
        .map(|j| {
            let den = 2 * tp[j] + fp[j] + fn_[j];
            if den == 0 {
                0.0
            } else {
                2.0 * tp[j] as f64 / den as f64
            }
        })
        .sum();
    total / c as f64
}

/// Mean per-label F1; a label with no true and no predicted positives scores 0.
pub fn macro_f1(y: &SparseMatrix, yhat: &SparseMatrix) -> Result<f64> {
    same_shape(y, yhat)?;
    let rows: Vec<usize> = (0..y.n_rows()).collect();
    Ok(macro_f1_rows(y, yhat, &rows))
}

pub fn precision_at_k_rows(y: &SparseMatrix, ranked: &[Vec<usize>], k: usize, rows: &[usize]) -> f64 {
    if rows.is_empty() || k == 0 {
        return 0.0;
    }
    let total: f64 = rows
        .iter()
        .map(|&i| {
            let truth = y.row_indices(i);
            let hits = ranked[i][..k]
                .iter()
                .filter(|j| truth.binary_search(j).is_ok())
                .count();
            hits as f64 / k as f64
        })
        .sum();
    total / rows.len() as f64
}

/// Mean over examples of the share of true labels among the first `k` ranked.
pub fn precision_at_k(y: &SparseMatrix, ranked: &[Vec<usize>], k: usize) -> Result<f64> {
    if ranked.len() != y.n_rows() {
        return config_err(format!("{} rankings for {} examples", ranked.len(), y.n_rows()));
    }
    if k == 0 {
        return config_err("precision-at-k needs k >= 1");
    }
    if let Some(i) = ranked.iter().position(|r| r.len() < k) {
        return config_err(format!("ranking of example {i} is shorter than {k}"));
    }
    let rows: Vec<usize> = (0..y.n_rows()).collect();
    Ok(precision_at_k_rows(y, ranked, k, &rows))
}

pub fn multiclass_error_rows(y: &[usize], yhat: &[usize], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let wrong = rows.iter().filter(|&&i| y[i] != yhat[i]).count();
    100.0 * wrong as f64 / rows.len() as f64
}

/// Percentage of misclassified examples.
pub fn multiclass_error(y: &[usize], yhat: &[usize]) -> Result<f64> {
    if y.len() != yhat.len() {
        return config_err(format!("{} labels vs {} predictions", y.len(), yhat.len()));
    }
    let rows: Vec<usize> = (0..y.len()).collect();
    Ok(multiclass_error_rows(y, yhat, &rows))
}

/// Metrics reported by the evaluation command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Hamming,
    MacroF1,
    PrecisionAt(usize),
    Error,
}

impl Metric {
    pub fn name(&self) -> String {
        match self {
            Metric::Hamming => "hamming".into(),
            Metric::MacroF1 => "macrof1".into(),
            Metric::PrecisionAt(k) => format!("p@{k}"),
            Metric::Error => "error".into(),
        }
    }

    /// Inference rule the metric is evaluated under.
    pub fn inference(&self) -> Inference {
        match self {
            Metric::Hamming => Inference::Threshold,
            Metric::MacroF1 => Inference::F1,
            Metric::PrecisionAt(k) => Inference::TopK(*k),
            Metric::Error => Inference::Argmax,
        }
    }

    /// Metric value on a subset (with repetition) of examples. `predicted`
    /// holds one label list per example, best-first where order matters.
    pub fn evaluator<'a>(
        &self,
        truth: &'a SparseMatrix,
        predicted: &'a [Vec<usize>],
    ) -> Result<Box<dyn Fn(&[usize]) -> f64 + Sync + 'a>> {
        if predicted.len() != truth.n_rows() {
            return config_err(format!(
                "{} predictions for {} examples",
                predicted.len(),
                truth.n_rows()
            ));
        }
        if let Some(j) = predicted.iter().flatten().find(|&&j| j >= truth.n_cols()) {
            return Err(Error::Data(format!("predicted label {j} outside {} labels", truth.n_cols())));
        }
        Ok(match *self {
            Metric::Hamming | Metric::MacroF1 => {
                let yhat = SparseMatrix::from_label_sets(truth.n_cols(), predicted)?;
                if *self == Metric::Hamming {
                    Box::new(move |rows: &[usize]| hamming_loss_rows(truth, &yhat, rows))
                } else {
                    Box::new(move |rows: &[usize]| macro_f1_rows(truth, &yhat, rows))
                }
            }
            Metric::PrecisionAt(k) => {
                if let Some(i) = predicted.iter().position(|r| r.len() < k) {
                    return config_err(format!("prediction for example {i} ranks fewer than {k} labels"));
                }
                Box::new(move |rows: &[usize]| precision_at_k_rows(truth, predicted, k, rows))
            }
            Metric::Error => {
                let mut y = Vec::with_capacity(truth.n_rows());
                for i in 0..truth.n_rows() {
                    match truth.row_indices(i) {
                        [j] => y.push(*j),
                        other => {
                            return Err(Error::Data(format!(
                                "multiclass error needs one true label per example; example {i} has {}",
                                other.len()
                            )))
                        }
                    }
                }
                // an empty prediction never matches
                let yhat: Vec<usize> = predicted
                    .iter()
                    .map(|p| p.first().copied().unwrap_or(usize::MAX))
                    .collect();
                Box::new(move |rows: &[usize]| multiclass_error_rows(&y, &yhat, rows))
            }
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(Metric::Hamming),
            "macrof1" => Ok(Metric::MacroF1),
            "error" => Ok(Metric::Error),
            _ => match s.strip_prefix("p@").map(str::parse::<usize>) {
                Some(Ok(k)) if k > 0 => Ok(Metric::PrecisionAt(k)),
                _ => config_err(format!("unknown metric '{s}'")),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub point_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub n_bootstrap: usize,
    pub seed: u64,
}

/// Decimal rendering with 17 significant digits.
fn fmt_real(v: f64) -> String {
    if v == 0.0 {
        return "0.0000000000000000".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..=16).contains(&exp) {
        format!("{:.*}", (16 - exp).max(0) as usize, v)
    } else {
        format!("{v:.16e}")
    }
}

impl MetricReport {
    /// Single-line JSON object.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"metric\":{},\"point_estimate\":{},\"ci_low\":{},\"ci_high\":{},\"ci_level\":{},\"n_bootstrap\":{},\"seed\":{}}}",
            serde_json::to_string(&self.metric).expect("string"),
            fmt_real(self.point_estimate),
            fmt_real(self.ci_low),
            fmt_real(self.ci_high),
            fmt_real(self.ci_level),
            self.n_bootstrap,
            self.seed
        )
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over examples.
///
/// Resample `b` draws `n` example indices with replacement from a stream
/// forked from `rng` by `b`, so results do not depend on scheduling.
pub fn bootstrap_ci<F>(
    name: &str,
    n_examples: usize,
    metric: F,
    n_bootstrap: usize,
    level: f64,
    rng: &Rng,
) -> Result<MetricReport>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if n_bootstrap < 100 {
        return config_err(format!("bootstrap needs at least 100 resamples, got {n_bootstrap}"));
    }
    if !(level > 0.0 && level < 1.0) {
        return config_err(format!("confidence level must be in (0, 1), got {level}"));
    }
    if n_examples == 0 {
        return config_err("bootstrap over zero examples");
    }
    let all: Vec<usize> = (0..n_examples).collect();
    let point = metric(&all);
    let mut stats: Vec<f64> = (0..n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.fork(b as u64);
            let idx: Vec<usize> = (0..n_examples).map(|_| r.random_range(0..n_examples)).collect();
            metric(&idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok(MetricReport {
        metric: name.to_string(),
        point_estimate: point,
        ci_low: quantile(&stats, alpha / 2.0),
        ci_high: quantile(&stats, 1.0 - alpha / 2.0),
        ci_level: level,
        n_bootstrap,
        seed: rng.seed(),
    })
}
