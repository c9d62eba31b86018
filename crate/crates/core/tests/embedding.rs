mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rlink::embedding::{
    captured_variance_fraction, cs_projector, embed, exact_captured_variance, feature_projector,
    project_activations, randomized_label_embedding, EmbeddingConfig,
};
use rlink::{DenseMatrix, Rng, SparseMatrix};

fn dense_to_sparse(m: &DMatrix<f64>) -> SparseMatrix {
    SparseMatrix::from_dense(&DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]))
}

/// `X` random `n × d`, `Y = X M Gᵀ` with `G` (`c × r`) orthonormal.
fn noiseless(n: usize, d: usize, c: usize, r: usize, seed: u64) -> (SparseMatrix, SparseMatrix, DMatrix<f64>) {
    let mut g = rng(seed);
    let x = to_na(&random_dense(&mut g, n, d));
    let m = to_na(&random_dense(&mut g, d, r));
    let basis = to_na(&random_dense(&mut g, c, r)).qr().q();
    let y = &x * m * basis.transpose();
    (dense_to_sparse(&x), dense_to_sparse(&y), basis)
}

/// Top-`k` eigenvectors of `Yᵀ X (XᵀX + λI)⁻¹ Xᵀ Y` and the full spectrum.
fn oracle_eigenspace(x: &SparseMatrix, y: &SparseMatrix, k: usize, lambda: f64) -> (DMatrix<f64>, Vec<f64>) {
    let xn = sparse_to_na(x);
    let yn = sparse_to_na(y);
    let fit = ridge_oracle(&xn, &yn, lambda);
    let m = yn.transpose() * &xn * fit;
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = DMatrix::from_fn(m.nrows(), k, |i, j| eig.eigenvectors[(i, order[j])]);
    (top, order.iter().map(|&i| eig.eigenvalues[i]).collect())
}

#[test]
fn noiseless_rank_five_recovers_label_subspace() {
    let (x, y, basis) = noiseless(500, 50, 40, 5, 17);
    let cfg = EmbeddingConfig { rank: 5, oversample: 20, power_iters: 1, lambda: 0.0 };
    let emb = randomized_label_embedding(&x, &y, &cfg, &mut Rng::new(3)).unwrap();
    let u = to_na(&emb.projector);
    assert!(max_principal_angle_sin(&u, &basis) <= 1e-6);
    let (top, _) = oracle_eigenspace(&x, &y, 5, 0.0);
    assert!(max_principal_angle_sin(&u, &top) <= 1e-6);

    let frac = captured_variance_fraction(&emb.sigma, &emb.sigma_ext).unwrap();
    assert!((frac - 1.0).abs() <= 1e-8, "fraction {frac}");
    let exact = exact_captured_variance(&x, &y, &emb.sigma, 0.0).unwrap();
    assert!((exact - 1.0).abs() <= 1e-8, "exact fraction {exact}");
}

#[test]
fn self_labeling_spans_top_eigenvectors_of_gram() {
    // singular values (10, 9, 8, 7) then 1e-3, so XᵀX has a wide gap after 4
    let mut g = rng(5);
    let left = to_na(&random_dense(&mut g, 80, 30)).qr().q();
    let right = to_na(&random_dense(&mut g, 30, 30)).qr().q();
    let spectrum: Vec<f64> = (0..30).map(|i| if i < 4 { 10.0 - i as f64 } else { 1e-3 }).collect();
    let xn = &left * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum.clone())) * right.transpose();
    let x = dense_to_sparse(&xn);
    let cfg = EmbeddingConfig { rank: 4, oversample: 20, power_iters: 1, lambda: 0.0 };
    let emb = randomized_label_embedding(&x, &x, &cfg, &mut Rng::new(1)).unwrap();
    let top = right.columns(0, 4).into_owned();
    assert!(max_principal_angle_sin(&to_na(&emb.projector), &top) <= 1e-6);
    for (s, sv) in emb.sigma.iter().zip(&spectrum) {
        assert!((s * s - sv * sv).abs() <= 1e-8 * 100.0);
    }
}

#[test]
fn more_power_iterations_never_lose_captured_spectrum() {
    let mut g = rng(8);
    for trial in 0..5 {
        let x = random_sparse(&mut g, 120, 40, 0.2);
        let y = random_labels(&mut g, 120, 60, 0.1);
        let (_, spectrum) = oracle_eigenspace(&x, &y, 3, 0.5);
        let bound: f64 = spectrum[..3].iter().sum();
        let mut sums = Vec::new();
        for q in [1, 3] {
            let cfg = EmbeddingConfig { rank: 3, oversample: 20, power_iters: q, lambda: 0.5 };
            let emb = randomized_label_embedding(&x, &y, &cfg, &mut Rng::new(trial)).unwrap();
            sums.push(emb.sigma.iter().map(|s| s * s).sum::<f64>());
        }
        assert!(sums[1] >= sums[0] - 1e-8, "trial {trial}: {sums:?}");
        assert!(sums[1] <= bound * (1.0 + 1e-8));
    }
}

#[test]
fn feature_projector_matches_ridge_oracle() {
    let mut g = rng(9);
    let x = random_sparse(&mut g, 40, 12, 0.4);
    let y = random_labels(&mut g, 40, 9, 0.3);
    let u = to_na(&random_dense(&mut g, 9, 3)).qr().q();
    let ud = DenseMatrix::from_fn(9, 3, |i, j| u[(i, j)]);
    let w = feature_projector(&x, &y, &ud, 0.3).unwrap();
    let oracle = ridge_oracle(&sparse_to_na(&x), &(sparse_to_na(&y) * &u), 0.3);
    assert!(rel_err(&to_na(&w), &oracle) <= 1e-8);

    let huge = feature_projector(&x, &y, &ud, 1e12).unwrap();
    assert!(huge.frobenius_norm() <= 1e-10);
}

#[test]
fn activations_match_dense_product() {
    let mut g = rng(10);
    let x = random_sparse(&mut g, 25, 15, 0.3);
    let w = random_dense(&mut g, 15, 4);
    let p = project_activations(&x, &w).unwrap();
    assert!(max_abs_diff(&to_na(&p), &(sparse_to_na(&x) * to_na(&w))) <= 1e-12);

    let eye = SparseMatrix::identity(6);
    let w6 = random_dense(&mut g, 6, 2);
    assert_eq!(project_activations(&eye, &w6).unwrap(), w6);
}

#[test]
fn random_projector_columns_concentrate() {
    let u = cs_projector(10_000, 100, &mut Rng::new(4)).unwrap();
    let good = (0..100)
        .filter(|&j| {
            let norm = u.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            norm > 0.8 && norm < 1.2
        })
        .count();
    assert!(good >= 99);
}

#[test]
fn random_projector_is_isotropic_on_average() {
    let (c, k) = (50, 4);
    let mut mean = DMatrix::<f64>::zeros(k, k);
    for seed in 0..50 {
        let u = to_na(&cs_projector(c, k, &mut Rng::new(seed)).unwrap());
        mean += u.transpose() * u;
    }
    mean /= 50.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                assert!(mean[(i, j)].abs() <= 0.05, "entry ({i},{j}) = {}", mean[(i, j)]);
            }
        }
    }
}

#[test]
fn equal_spectrum_fraction_is_rank_share() {
    let frac = captured_variance_fraction(&[1.0; 3], &[1.0; 8]).unwrap();
    assert!((frac - 3.0 / 8.0).abs() < 1e-15);
}

#[test]
fn embed_rejects_oversized_rank() {
    let mut g = rng(12);
    let x = random_sparse(&mut g, 30, 10, 0.5);
    let y = random_labels(&mut g, 30, 8, 0.3);
    let cfg = EmbeddingConfig { rank: 5, oversample: 5, power_iters: 1, lambda: 0.0 };
    assert!(embed(&x, &y, &cfg, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn embedding_invariants(n in 30usize..80, d in 5usize..25, c in 10usize..30, seed in any::<u64>()) {
        let mut g = rng(seed);
        let x = random_sparse(&mut g, n, d, 0.4);
        let y = random_labels(&mut g, n, c, 0.2);
        let k = 1 + (seed as usize % 4).min(d - 1);
        let cfg = EmbeddingConfig { rank: k, oversample: 4, power_iters: 1, lambda: 0.1 };
        let (model, emb) = embed(&x, &y, &cfg, seed).unwrap();
        let u = to_na(&model.label_projector);
        prop_assert_eq!(u.shape(), (c, k));
        prop_assert_eq!(model.feature_projector.shape(), (d, k));
        prop_assert!(max_abs_diff(&(u.transpose() * &u), &DMatrix::identity(k, k)) <= 1e-8);
        prop_assert!(emb.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(emb.sigma.iter().all(|&s| s >= 0.0));

        let (again, _) = embed(&x, &y, &cfg, seed).unwrap();
        prop_assert_eq!(&again, &model);
    }
}
