//! Turning predicted probabilities into label decisions.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::tensor::{DenseMatrix, SparseMatrix};

/// Empirical training frequency of each label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelFrequencies {
    pub p: Vec<f64>,
    pub n_train: usize,
}

impl LabelFrequencies {
    pub fn from_labels(y: &SparseMatrix) -> Self {
        let n = y.n_rows();
        let mut counts = vec![0usize; y.n_cols()];
        for &j in y.col_indices() {
            counts[j] += 1;
        }
        let p = counts
            .into_iter()
            .map(|k| if n == 0 { 0.0 } else { k as f64 / n as f64 })
            .collect();
        LabelFrequencies { p, n_train: n }
    }
}

/// Positive wherever the probability is at least one half.
pub fn threshold_half(zhat: &DenseMatrix) -> SparseMatrix {
    let sets: Vec<Vec<usize>> = (0..zhat.rows())
        .map(|i| {
            zhat.row(i)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= 0.5)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    SparseMatrix::from_label_sets(zhat.cols(), &sets).expect("indices in range")
}

/// Per-class F1 decision over a column of test probabilities.
///
/// With `n₊ = max(1, round(p·n))` expected positives, the estimated F1 of
/// predicting the top `m` is `2·Σ_{i≤m} z₍ᵢ₎ / (n₊ + m)`; the first maximizing
/// `m*` sets the threshold `z ≥ z₍m*₎`. Ties at the threshold may admit more
/// than `m*` items.
pub fn f1_infer_class(zhat: &[f64], p: f64) -> Vec<bool> {
    let n = zhat.len();
    if n == 0 {
        return Vec::new();
    }
    let n_pos = ((p * n as f64).round() as usize).max(1);
    let mut sorted = zhat.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut best = f64::NEG_INFINITY;
    let mut best_m = 0;
    let mut cum = 0.0;
    for (m, &z) in sorted.iter().enumerate() {
        cum += z;
        let f = 2.0 * cum / (n_pos + m + 1) as f64;
        if f > best {
            best = f;
            best_m = m;
        }
    }
    let cut = sorted[best_m];
    zhat.iter().map(|&z| z >= cut).collect()
}

/// [`f1_infer_class`] applied to every column.
pub fn f1_infer(zhat: &DenseMatrix, freqs: &LabelFrequencies) -> Result<SparseMatrix> {
    if freqs.p.len() != zhat.cols() {
        return config_err(format!(
            "{} label frequencies for {} score columns",
            freqs.p.len(),
            zhat.cols()
        ));
    }
    let mut sets = vec![Vec::new(); zhat.rows()];
    for (j, &p) in freqs.p.iter().enumerate() {
        let col = zhat.column(j);
        for (i, on) in f1_infer_class(&col, p).into_iter().enumerate() {
            if on {
                sets[i].push(j);
            }
        }
    }
    Ok(SparseMatrix::from_label_sets(zhat.cols(), &sets).expect("indices in range"))
}

/// Indices of the `k` largest scores, descending, ties to the smaller index.
pub fn top_k(row: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Index of the largest score, ties to the smaller index.
pub fn argmax_class(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Decision rule applied to a score matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inference {
    Threshold,
    F1,
    TopK(usize),
    Argmax,
}

impl std::str::FromStr for Inference {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(Inference::Threshold),
            "f1" => Ok(Inference::F1),
            "argmax" => Ok(Inference::Argmax),
            _ => match s.strip_prefix("topk:").map(str::parse::<usize>) {
                Some(Ok(k)) if k > 0 => Ok(Inference::TopK(k)),
                _ => config_err(format!("unknown inference '{s}'")),
            },
        }
    }
}

/// Per-example label lists; ordered best-first for top-k and argmax.
pub fn decide(zhat: &DenseMatrix, rule: Inference, freqs: &LabelFrequencies) -> Result<Vec<Vec<usize>>> {
    let sets_of = |m: SparseMatrix| (0..m.n_rows()).map(|i| m.row_indices(i).to_vec()).collect();
    Ok(match rule {
        Inference::Threshold => sets_of(threshold_half(zhat)),
        Inference::F1 => sets_of(f1_infer(zhat, freqs)?),
        Inference::TopK(k) => {
            if k > zhat.cols() {
                return config_err(format!("top-{k} requested with {} labels", zhat.cols()));
            }
            (0..zhat.rows()).map(|i| top_k(zhat.row(i), k)).collect()
        }
        Inference::Argmax => {
            if zhat.cols() == 0 {
                return config_err("argmax over zero labels");
            }
            (0..zhat.rows()).map(|i| vec![argmax_class(zhat.row(i))]).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_cases() {
        let z = DenseMatrix::from_rows(&[vec![0.9, 0.2], vec![0.4, 0.6]]).unwrap();
        let y = threshold_half(&z);
        assert_eq!(y.to_dense().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        let y = threshold_half(&DenseMatrix::from_vec(1, 1, vec![0.5]).unwrap());
        assert_eq!(y.nnz(), 1);
        assert_eq!(threshold_half(&DenseMatrix::zeros(3, 4)).nnz(), 0);
    }

    #[test]
    fn f1_hand_example() {
        // n₊ = 2, f̂ = (0.6, 0.75, 0.68, 0.6), m* = 2
        let got = f1_infer_class(&[0.9, 0.6, 0.2, 0.1], 0.5);
        assert_eq!(got, vec![true, true, false, false]);
        assert_eq!(f1_infer_class(&[1.0; 5], 1.0), vec![true; 5]);
        assert!(f1_infer_class(&[], 0.3).is_empty());
    }

    #[test]
    fn top_k_and_argmax() {
        assert_eq!(top_k(&[0.1, 0.9, 0.5], 2), vec![1, 2]);
        assert_eq!(top_k(&[0.3; 4], 3), vec![0, 1, 2]);
        let mut all = top_k(&[0.2, 0.7, 0.1, 0.7], 4);
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert_eq!(argmax_class(&[0.0, 1.0, 0.0]), 1);
        assert_eq!(argmax_class(&[0.2, 0.2]), 0);
        let e: Vec<f64> = [1.0f64, 3.0, 2.0].iter().map(|v| v.exp()).collect();
        let z: f64 = e.iter().sum();
        let soft: Vec<f64> = e.iter().map(|v| v / z).collect();
        assert_eq!(argmax_class(&soft), 1);
    }

    #[test]
    fn parse_rules() {
        assert_eq!("topk:5".parse::<Inference>().unwrap(), Inference::TopK(5));
        assert!("topk:0".parse::<Inference>().is_err());
        assert!("best".parse::<Inference>().is_err());
    }

    #[test]
    fn frequencies() {
        let y = SparseMatrix::from_label_sets(3, &[vec![0], vec![0, 2], vec![], vec![0]]).unwrap();
        let f = LabelFrequencies::from_labels(&y);
        assert_eq!(f.p, vec![0.75, 0.0, 0.25]);
        assert_eq!(f.n_train, 4);
    }
}
