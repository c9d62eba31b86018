//! Random Fourier features for shift-invariant kernels on activations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Cauchy, ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::Rng;
use crate::tensor::{DenseMatrix, ROW_CHUNK};

/// Sampling distribution of the random directions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelFamily {
    /// Gaussian kernel `exp(−γ²‖δ‖²/2)`.
    Gaussian,
    /// Laplacian kernel `exp(−γ‖δ‖₁)`.
    Cauchy,
    /// Matérn-type kernel from a multivariate Student distribution.
    Student { nu: f64 },
}

impl KernelFamily {
    fn validate(&self) -> Result<()> {
        if let KernelFamily::Student { nu } = self {
            if !(*nu > 0.0) {
                return config_err(format!("student degrees of freedom must be positive, got {nu}"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Gaussian => f.write_str("gaussian"),
            KernelFamily::Cauchy => f.write_str("cauchy"),
            KernelFamily::Student { nu } => write!(f, "student:{nu}"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "cauchy" | "laplacian" => Ok(KernelFamily::Cauchy),
            _ => {
                let nu = s
                    .strip_prefix("student:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown kernel family '{s}'")))?;
                let fam = KernelFamily::Student { nu };
                fam.validate()?;
                Ok(fam)
            }
        }
    }
}

/// Random directions `R` (`k × s`), phases `b ∈ [0, 2π)` and output scale
/// `√(2/s)`, so that `φ(y)·φ(p) ≈ κ(y − p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub directions: DenseMatrix,
    pub biases: Vec<f64>,
    pub family: KernelFamily,
    pub bandwidth: f64,
    pub scale: f64,
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        self.directions.rows()
    }

    pub fn n_features(&self) -> usize {
        self.directions.cols()
    }

    /// Rebuilds a map from stored parts, checking its invariants.
    pub fn from_parts(
        directions: DenseMatrix,
        biases: Vec<f64>,
        family: KernelFamily,
        bandwidth: f64,
    ) -> Result<Self> {
        let s = directions.cols();
        if biases.len() != s || s == 0 {
            return Err(Error::Format(format!(
                "feature map has {s} directions and {} phases",
                biases.len()
            )));
        }
        if biases.iter().any(|b| !(0.0..2.0 * PI).contains(b)) {
            return Err(Error::Format("feature phase outside [0, 2π)".into()));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Format(format!("invalid bandwidth {bandwidth}")));
        }
        family.validate()?;
        Ok(FeatureMap {
            directions,
            biases,
            family,
            bandwidth,
            scale: (2.0 / s as f64).sqrt(),
        })
    }
}

fn unit_direction(family: KernelFamily, k: usize, rng: &mut Rng) -> Vec<f64> {
    match family {
        KernelFamily::Gaussian => (0..k).map(|_| StandardNormal.sample(rng)).collect(),
        KernelFamily::Cauchy => {
            let cauchy = Cauchy::new(0.0, 1.0).expect("unit scale");
            (0..k).map(|_| cauchy.sample(rng)).collect()
        }
        KernelFamily::Student { nu } => {
            let g: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            let w: f64 = ChiSquared::new(nu).expect("nu validated").sample(rng);
            let denom = (w / nu).sqrt();
            g.into_iter().map(|v| v / denom).collect()
        }
    }
}

/// Draws `s` directions in `R^k` (scaled by `bandwidth`) and their phases.
pub fn sample_feature_map(
    k: usize,
    s: usize,
    family: KernelFamily,
    bandwidth: f64,
    rng: &mut Rng,
) -> Result<FeatureMap> {
    if k == 0 {
        return config_err("feature map input dimension must be positive");
    }
    if s == 0 {
        return config_err("number of random features must be positive");
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return config_err(format!("bandwidth must be positive, got {bandwidth}"));
    }
    family.validate()?;
    let mut directions = DenseMatrix::zeros(k, s);
    let mut biases = Vec::with_capacity(s);
    for t in 0..s {
        let z = unit_direction(family, k, rng);
        for (i, v) in z.into_iter().enumerate() {
            directions.set(i, t, bandwidth * v);
        }
        biases.push(rng.random_range(0.0..2.0 * PI));
    }
    Ok(FeatureMap {
        directions,
        biases,
        family,
        bandwidth,
        scale: (2.0 / s as f64).sqrt(),
    })
}

/// `Φ[i, t] = scale · cos(R[:, t]ᵀ P[i, :] + b[t])`.
pub fn featurize(p: &DenseMatrix, map: &FeatureMap) -> Result<DenseMatrix> {
    if p.cols() != map.input_dim() {
        return config_err(format!(
            "featurize: activations have {} columns, feature map expects {}",
            p.cols(),
            map.input_dim()
        ));
    }
    let mut phi = p.matmul(&map.directions)?;
    let s = map.n_features();
    phi.as_mut_slice()
        .par_chunks_mut(s * ROW_CHUNK)
        .for_each(|block| {
            for row in block.chunks_mut(s) {
                for (v, b) in row.iter_mut().zip(&map.biases) {
                    *v = map.scale * (*v + b).cos();
                }
            }
        });
    Ok(phi)
}

/// Median-heuristic bandwidth: `1 / median ‖Pᵢ − Pⱼ‖₂` over random row pairs.
pub fn median_bandwidth(p: &DenseMatrix, pairs: usize, rng: &mut Rng) -> Result<f64> {
    let n = p.rows();
    if n < 2 {
        return config_err("median bandwidth needs at least two activation rows");
    }
    let mut dists: Vec<f64> = (0..pairs)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            p.row(i)
                .iter()
                .zip(p.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if !(median > 0.0) {
        return Err(Error::Numerical(
            "median heuristic: activations are constant, set an explicit bandwidth".into(),
        ));
    }
    Ok(1.0 / median)
}

const STUDENT_MC_SAMPLES: usize = 1_000_000;
const STUDENT_MC_SEED: u64 = 0x5EED_0F_CF;

/// Kernel value `κ(δ)` matched by [`sample_feature_map`] for `family` and
/// `bandwidth`.
///
/// Gaussian and Cauchy are closed forms. The Student family is a seeded Monte
/// Carlo estimate of the characteristic function (10⁶ draws, error well below
/// 0.005): conditioning on the chi-square draw `w`, the projection `zᵀδ` is
/// normal with variance `ν‖δ‖²/w`, leaving `E_w[exp(−γ²ν‖δ‖²/(2w))]`.
pub fn kernel_closed_form(delta: &[f64], family: KernelFamily, bandwidth: f64) -> f64 {
    let sq: f64 = delta.iter().map(|d| d * d).sum();
    match family {
        KernelFamily::Gaussian => (-0.5 * bandwidth * bandwidth * sq).exp(),
        KernelFamily::Cauchy => (-bandwidth * delta.iter().map(|d| d.abs()).sum::<f64>()).exp(),
        KernelFamily::Student { nu } => {
            if sq == 0.0 {
                return 1.0;
            }
            let chi = ChiSquared::new(nu).expect("positive degrees of freedom");
            let mut rng = Rng::new(STUDENT_MC_SEED);
            let total: f64 = (0..STUDENT_MC_SAMPLES)
                .map(|_| {
                    let w: f64 = chi.sample(&mut rng);
                    (-0.5 * bandwidth * bandwidth * nu * sq / w).exp()
                })
                .sum();
            total / STUDENT_MC_SAMPLES as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_families() {
        assert_eq!("gaussian".parse::<KernelFamily>().unwrap(), KernelFamily::Gaussian);
        assert_eq!("cauchy".parse::<KernelFamily>().unwrap(), KernelFamily::Cauchy);
        assert_eq!(
            "student:3".parse::<KernelFamily>().unwrap(),
            KernelFamily::Student { nu: 3.0 }
        );
        assert!("student:0".parse::<KernelFamily>().is_err());
        assert!("rbf".parse::<KernelFamily>().is_err());
    }

    #[test]
    fn zero_directions_give_constant_columns() {
        let map = FeatureMap::from_parts(
            DenseMatrix::zeros(2, 3),
            vec![0.0, 1.0, 2.0],
            KernelFamily::Gaussian,
            1.0,
        )
        .unwrap();
        let p = DenseMatrix::from_fn(4, 2, |i, j| (i + j) as f64);
        let phi = featurize(&p, &map).unwrap();
        for i in 0..4 {
            for t in 0..3 {
                assert!((phi.get(i, t) - map.scale * map.biases[t].cos()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_feature_at_pi() {
        let map = FeatureMap::from_parts(
            DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap(),
            vec![0.0],
            KernelFamily::Gaussian,
            1.0,
        )
        .unwrap();
        let phi = featurize(&DenseMatrix::from_vec(1, 1, vec![PI]).unwrap(), &map).unwrap();
        assert!((phi.get(0, 0) + map.scale).abs() < 1e-15);
        assert!(featurize(&DenseMatrix::zeros(1, 2), &map).is_err());
    }

    #[test]
    fn closed_forms() {
        for fam in [KernelFamily::Gaussian, KernelFamily::Cauchy, KernelFamily::Student { nu: 3.0 }] {
            assert_eq!(kernel_closed_form(&[0.0, 0.0], fam, 1.7), 1.0);
        }
        let g = kernel_closed_form(&[0.6, 0.8], KernelFamily::Gaussian, 1.0);
        assert!((g - (-0.5f64).exp()).abs() < 1e-15);
        let c = kernel_closed_form(&[1.0, -1.0], KernelFamily::Cauchy, 1.0);
        assert!((c - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn sampling_rejects_bad_config() {
        let mut rng = Rng::new(0);
        assert!(sample_feature_map(2, 0, KernelFamily::Gaussian, 1.0, &mut rng).is_err());
        assert!(sample_feature_map(2, 4, KernelFamily::Gaussian, 0.0, &mut rng).is_err());
        assert!(sample_feature_map(2, 4, KernelFamily::Student { nu: -1.0 }, 1.0, &mut rng).is_err());
        let map = sample_feature_map(2, 4, KernelFamily::Cauchy, 1.0, &mut rng).unwrap();
        assert!(map.biases.iter().all(|b| (0.0..2.0 * PI).contains(b)));
        assert!((map.scale - (0.5f64).sqrt()).abs() < 1e-15);
    }
}
