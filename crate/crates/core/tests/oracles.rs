use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use stir_core::analysis::wsc_wss_report;
use stir_core::datagen::{generate, GeneratorSpec};
use stir_core::linalg::{symmetric_eigenvalues, SymMatrix};
use stir_core::solve::{wls_solve, WlsProblem};
use stir_core::{truncated_weights, Dataset};

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Column-per-point design matrix `X` (d x n).
fn design(data: &Dataset<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(data.d(), data.n(), data.covariates())
}

#[test]
fn wls_matches_pseudo_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 0..100 {
        let d = rng.random_range(1..8);
        let n = d + rng.random_range(0..40);
        let data = Dataset::new(d, gaussian(&mut rng, n * d), gaussian(&mut rng, n)).unwrap();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..5.0)).collect();
        let ours = wls_solve(&WlsProblem::new(&data, &s)).unwrap();

        // w = (S^{1/2} X^T)^+ S^{1/2} y
        let x = design(&data);
        let root = DVector::from_iterator(n, s.iter().map(|v| v.sqrt()));
        let a = DMatrix::from_fn(n, d, |i, j| root[i] * x[(j, i)]);
        let b = DVector::from_iterator(n, data.responses().iter().zip(root.iter()).map(|(y, r)| y * r));
        let oracle = a.pseudo_inverse(1e-14).unwrap() * b;

        let scale = oracle.norm().max(1.0);
        for j in 0..d {
            assert!((ours[j] - oracle[j]).abs() <= 1e-8 * scale, "problem {k} coord {j}: {} vs {}", ours[j], oracle[j]);
        }
    }
}

#[test]
fn ridge_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let d = 4;
        let n = 3;
        let data = Dataset::new(d, gaussian(&mut rng, n * d), gaussian(&mut rng, n)).unwrap();
        let s = vec![1.0; n];
        let ours = wls_solve(&WlsProblem::new(&data, &s).with_ridge(0.7)).unwrap();
        let x = design(&data);
        let lhs = &x * x.transpose() + DMatrix::identity(d, d) * 0.7;
        let rhs = &x * DVector::from_column_slice(data.responses());
        let oracle = lhs.cholesky().unwrap().solve(&rhs);
        for j in 0..d {
            assert!((ours[j] - oracle[j]).abs() <= 1e-10 * oracle.norm().max(1.0));
        }
    }
}

#[test]
fn eigenvalues_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..100 {
        let d = rng.random_range(1..12);
        let raw = DMatrix::from_iterator(d, d, gaussian(&mut rng, d * d));
        let sym = &raw + raw.transpose();
        let entries: Vec<f64> = (0..d * d).map(|k| sym[(k / d, k % d)]).collect();
        let ours = symmetric_eigenvalues(&SymMatrix::from_row_major(d, &entries));
        let mut oracle: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn spectral_report_matches_oracle() {
    for seed in 0..10 {
        let (data, truth) = generate::<f64>(&GeneratorSpec {
            n: 400,
            d: 6,
            alpha: 0.2,
            seed,
            ..Default::default()
        })
        .unwrap();
        let m = 10.0;
        let shifted: Vec<f64> = truth.gold_model.iter().map(|g| g + 0.05).collect();
        let s = truncated_weights(&shifted, &data, m).unwrap();
        let report = wsc_wss_report(&data, &truth, &s).unwrap();

        let good = truth.good_indices();
        let mut gram = DMatrix::<f64>::zeros(6, 6);
        for &i in &good {
            let x = DVector::from_column_slice(data.point(i));
            gram += &x * x.transpose() * s.weights[i];
        }
        let ev = SymmetricEigen::new(gram).eigenvalues;
        let (lo, hi) = (ev.min(), ev.max());
        assert!((report.lambda_min - lo).abs() <= 1e-9 * hi);
        assert!((report.lambda_max - hi).abs() <= 1e-9 * hi);
        assert_eq!(report.good_count, good.len());
        let scale = good.len() as f64 * m;
        assert!((report.normalized_min - lo / scale).abs() <= 1e-12);
        assert!((report.normalized_max - hi / scale).abs() <= 1e-12);
    }
}
