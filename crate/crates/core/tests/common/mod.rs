#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rlink::dataset::Dataset;
use rlink::{DenseMatrix, SparseMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

pub fn random_dense(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| normal(r))
}

/// Entries kept with probability `density`, values standard normal.
pub fn random_sparse(r: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
    let data = (0..rows)
        .map(|_| {
            (0..cols)
                .filter_map(|j| (r.random::<f64>() < density).then(|| (j, normal(r))))
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(cols, data).unwrap()
}

pub fn random_labels(r: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
    let sets: Vec<Vec<usize>> = (0..rows)
        .map(|_| (0..cols).filter(|_| r.random::<f64>() < density).collect())
        .collect();
    SparseMatrix::from_label_sets(cols, &sets).unwrap()
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

pub fn sparse_to_na(m: &SparseMatrix) -> DMatrix<f64> {
    to_na(&m.to_dense())
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_err(a: &DMatrix<f64>, oracle: &DMatrix<f64>) -> f64 {
    (a - oracle).norm() / oracle.norm().max(f64::MIN_POSITIVE)
}

/// Dense ridge oracle `(AᵀA + λI)⁻¹ AᵀB` via nalgebra's LU.
pub fn ridge_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let d = a.ncols();
    let gram = a.transpose() * a + DMatrix::identity(d, d) * lambda;
    gram.lu().solve(&(a.transpose() * b)).expect("oracle system is nonsingular")
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal bases.
pub fn max_principal_angle_sin(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let overlap = u.transpose() * v;
    let s = overlap.singular_values();
    let min_cos = s.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    (1.0 - min_cos * min_cos).max(0.0).sqrt()
}

/// Single-label data whose class means cluster into `blocks` groups, with
/// Zipfian class priors. Labels sharing a block are confusable, which is the
/// structure a learned label embedding can exploit.
pub struct BlockMulticlass {
    means: Vec<Vec<f64>>,
    weights: Vec<f64>,
    noise: f64,
}

impl BlockMulticlass {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        c: usize,
        blocks: usize,
        seed: u64,
        center_scale: f64,
        offset_scale: f64,
        noise: f64,
        zipf: f64,
    ) -> Self {
        let mut r = rng(seed);
        let centers: Vec<Vec<f64>> = (0..blocks)
            .map(|_| (0..d).map(|_| center_scale * normal(&mut r)).collect())
            .collect();
        let means = (0..c)
            .map(|j| (0..d).map(|t| centers[j % blocks][t] + offset_scale * normal(&mut r)).collect())
            .collect();
        let weights = (0..c).map(|j| 1.0 / (j as f64 + 1.0).powf(zipf)).collect();
        BlockMulticlass { means, weights, noise }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut r = rng(seed);
        let c = self.means.len();
        let d = self.means[0].len();
        let total: f64 = self.weights.iter().sum();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut u = r.random::<f64>() * total;
            let mut j = 0;
            while u > self.weights[j] && j + 1 < c {
                u -= self.weights[j];
                j += 1;
            }
            rows.push((0..d).map(|t| (t, self.means[j][t] + self.noise * normal(&mut r))).collect());
            labels.push(vec![j]);
        }
        Dataset::new(
            SparseMatrix::from_rows(d, rows).unwrap(),
            SparseMatrix::from_label_sets(c, &labels).unwrap(),
        )
        .unwrap()
    }
}

/// Bag-of-words documents: each document has one topic, draws a share of its
/// words from that topic's vocabulary and the rest from a Zipf background.
/// Labels of the document's topic fire often, other labels rarely.
pub struct TopicText {
    topic_words: Vec<Vec<usize>>,
    d: usize,
    c: usize,
    p_topic_word: f64,
    p_label: f64,
    p_noise: f64,
}

impl TopicText {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        topics: usize,
        labels_per_topic: usize,
        words_per_topic: usize,
        seed: u64,
        p_topic_word: f64,
        p_label: f64,
        p_noise: f64,
    ) -> Self {
        let mut r = rng(seed);
        let topic_words = (0..topics)
            .map(|_| (0..words_per_topic).map(|_| r.random_range(0..d)).collect())
            .collect();
        TopicText {
            topic_words,
            d,
            c: topics * labels_per_topic,
            p_topic_word,
            p_label,
            p_noise,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut r = rng(seed);
        let topics = self.topic_words.len();
        let per_topic = self.c / topics;
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let t = r.random_range(0..topics);
            let len = r.random_range(30..90);
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for _ in 0..len {
                let w = if r.random::<f64>() < self.p_topic_word {
                    let words = &self.topic_words[t];
                    words[r.random_range(0..words.len())]
                } else {
                    let u: f64 = r.random();
                    ((self.d as f64).powf(u) as usize - 1).min(self.d - 1)
                };
                *counts.entry(w).or_insert(0.0) += 1.0;
            }
            rows.push(counts.into_iter().map(|(w, k)| (w, (1.0 + k).ln())).collect());
            labels.push(
                (0..self.c)
                    .filter(|&j| {
                        let p = if j / per_topic == t { self.p_label } else { self.p_noise };
                        r.random::<f64>() < p
                    })
                    .collect(),
            );
        }
        Dataset::new(
            SparseMatrix::from_rows(self.d, rows).unwrap(),
            SparseMatrix::from_label_sets(self.c, &labels).unwrap(),
        )
        .unwrap()
    }
}

/// Sparse rows grouped into clusters that share a vocabulary and a small
/// label pool; half of each row's features and 80% of its labels come from
/// its cluster.
pub fn clustered_sparse(
    n: usize,
    d: usize,
    c: usize,
    nnz: usize,
    labels: usize,
    clusters: usize,
    seed: u64,
) -> Dataset {
    let mut r = rng(seed);
    let vocab: Vec<Vec<usize>> = (0..clusters)
        .map(|_| (0..50).map(|_| r.random_range(0..d)).collect())
        .collect();
    let pool: Vec<Vec<usize>> = (0..clusters)
        .map(|_| (0..8).map(|_| r.random_range(0..c)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut sets = Vec::with_capacity(n);
    for _ in 0..n {
        let k = r.random_range(0..clusters);
        let mut f = BTreeMap::new();
        while f.len() < nnz {
            let j = if f.len() < nnz / 2 {
                vocab[k][r.random_range(0..50)]
            } else {
                r.random_range(0..d)
            };
            f.insert(j, 1.0 + r.random::<f64>());
        }
        rows.push(f.into_iter().collect());
        let mut l = BTreeSet::new();
        while l.len() < labels {
            l.insert(if r.random::<f64>() < 0.8 {
                pool[k][r.random_range(0..8)]
            } else {
                r.random_range(0..c)
            });
        }
        sets.push(l.into_iter().collect());
    }
    Dataset::new(
        SparseMatrix::from_rows(d, rows).unwrap(),
        SparseMatrix::from_label_sets(c, &sets).unwrap(),
    )
    .unwrap()
}

/// Peak resident set size of this process in bytes (Linux only).
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
