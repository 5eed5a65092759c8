use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use stir_core::analysis::{bad_weight_report, breakdown_threshold};
use stir_core::datagen::{generate, random_unit_vector, CorruptionMode, GeneratorSpec};
use stir_core::linalg::distance;
use stir_core::loss::*;
use stir_core::solve::wls_solve_with_fallback;
use stir_core::solve::WlsProblem;
use stir_core::{regularized_weights, truncated_weights, Dataset};

/// One-dimensional data with unit covariates, so the zero model has
/// residuals exactly `r`.
fn residual_data(r: &[f64]) -> Dataset<f64> {
    Dataset::new(1, vec![1.0; r.len()], r.iter().map(|v| -v).collect()).unwrap()
}

fn residual() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(0.0),
        1 => Just(-0.0),
        8 => -1e3..1e3f64,
        4 => -1e-3..1e-3f64,
    ]
}

proptest! {
    #[test]
    fn weights_capped_and_inverse(r in prop::collection::vec(residual(), 1..40), m in 1e-3..1e6f64) {
        let s = truncated_weights(&[0.0], &residual_data(&r), m).unwrap();
        for (&w, &ri) in s.weights.iter().zip(&s.residuals) {
            prop_assert!((0.0..=m).contains(&w));
            let prod = w * ri.abs();
            prop_assert!(prod <= 1.0 + 1e-15);
            if ri.abs() >= 1.0 / m {
                prop_assert!((prod - 1.0).abs() <= 1e-15);
            } else {
                prop_assert_eq!(w, m);
                prop_assert!(prod < 1.0);
            }
        }
    }

    #[test]
    fn truncation_is_regularization_when_levels_round_trip(
        r in prop::collection::vec(residual(), 1..40),
        m in 1e-6..1e9f64,
    ) {
        let delta = 1.0 / m;
        prop_assume!(1.0 / delta == m);
        let data = residual_data(&r);
        let a = truncated_weights(&[0.0], &data, m).unwrap();
        let b = regularized_weights(&[0.0], &data, delta).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn scaled_huber_identities(x in -10.0..10.0f64, eps in 1e-3..10.0f64) {
        let f = scaled_huber(x, eps);
        prop_assert!((f - (huber(x, eps) / eps + eps / 2.0)).abs() <= 1e-12 * x.abs().max(1.0));
        prop_assert!(x.abs() <= f + 1e-15);
        prop_assert!(f <= x.abs() + eps / 2.0 + 1e-15);
    }

    #[test]
    fn majorizer_claims(x in -10.0..10.0f64, a in -10.0..10.0f64, eps in 1e-3..5.0f64) {
        prop_assert!(majorizer(x, a, eps) - scaled_huber(x, eps) >= -1e-12);
        prop_assert!((majorizer(a, a, eps) - scaled_huber(a, eps)).abs() <= 1e-12);
        prop_assert!((majorizer_derivative(a, a, eps) - scaled_huber_derivative(a, eps)).abs() <= 1e-10);
    }

    #[test]
    fn majorizer_claims_inside_kink(u in -1.0..1.0f64, eps in 1e-3..5.0f64, x in -10.0..10.0f64) {
        let a = u * eps;
        prop_assert!(majorizer(x, a, eps) - scaled_huber(x, eps) >= -1e-12);
        prop_assert!((majorizer(a, a, eps) - scaled_huber(a, eps)).abs() <= 1e-12);
        prop_assert!((majorizer_derivative(a, a, eps) - scaled_huber_derivative(a, eps)).abs() <= 1e-10);
    }

    #[test]
    fn breakdown_monotone(c1 in 0.01..2.0f64, dc in 0.0..1.0f64, eta in 1.0..10.0f64, de in 0.0..5.0f64, dense: bool) {
        let base = breakdown_threshold(c1, eta, dense).unwrap();
        prop_assert!(breakdown_threshold(c1 + dc, eta, dense).unwrap() >= base);
        prop_assert!(breakdown_threshold(c1, eta + de, dense).unwrap() <= base);
    }
}

fn gaussian_data(n: usize, d: usize, seed: u64, alpha: f64) -> (Dataset<f64>, stir_core::GroundTruth64) {
    generate(&GeneratorSpec {
        n,
        d,
        alpha,
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn surrogate_majorizes_and_touches() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..1000u64 {
        let (data, _) = gaussian_data(30, 3, k, 0.2);
        let w: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w0: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let eps = Uniform::new(0.01, 2.0).unwrap().sample(&mut rng);
        let s = surrogate(&w, &w0, &data, eps).unwrap();
        let l = empirical_scaled_huber(&w, &data, eps).unwrap();
        assert!(s - l >= -1e-12, "surrogate below loss at draw {k}");
        let t = surrogate(&w0, &w0, &data, eps).unwrap();
        let l0 = empirical_scaled_huber(&w0, &data, eps).unwrap();
        assert!((t - l0).abs() <= 1e-12);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let (data, truth) = gaussian_data(200, 5, 3, 0.15);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 50 {
        let eps = Uniform::new(0.05, 1.0).unwrap().sample(&mut rng);
        let anchor: Vec<f64> = truth
            .gold_model
            .iter()
            .map(|g| {
                let z: f64 = StandardNormal.sample(&mut rng);
                g + 0.5 * z
            })
            .collect();
        let h_max = anchor.iter().fold(1.0f64, |m, v| m.max(v.abs())) * 1e-6;
        // skip anchors whose residuals sit within reach of the kink
        let near_kink = stir_core::residuals(&anchor, &data)
            .unwrap()
            .iter()
            .any(|r| (r.abs() - eps).abs() < 1e-8 + 10.0 * h_max * data.max_covariate_norm());
        if near_kink {
            continue;
        }
        let g = surrogate_gradient(&anchor, &data, eps).unwrap();
        for j in 0..data.d() {
            let h = 1e-6 * anchor[j].abs().max(1.0);
            let (mut up, mut dn) = (anchor.clone(), anchor.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (empirical_scaled_huber(&up, &data, eps).unwrap()
                - empirical_scaled_huber(&dn, &data, eps).unwrap())
                / (2.0 * h);
            let scale = g.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
            assert!((fd - g[j]).abs() <= 1e-6 * scale, "coord {j}: fd {fd} vs {}", g[j]);
        }
        checked += 1;
    }
}

#[test]
fn gradient_at_gold_vanishes() {
    let (data, truth) = gaussian_data(100, 4, 5, 0.0);
    let g = surrogate_gradient(&truth.gold_model, &data, 0.1).unwrap();
    assert!(g.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn loss_lipschitz_ratio() {
    let d = 10;
    let (data, _) = gaussian_data(20 * d * 5, d, 11, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let eps = Uniform::new(1e-3, 1.0).unwrap().sample(&mut rng);
        let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let diff = (empirical_scaled_huber(&w, &data, eps).unwrap() - empirical_scaled_huber(&v, &data, eps).unwrap()).abs();
        worst = worst.max(diff / distance(&w, &v));
    }
    assert!(worst <= 1.01f64.sqrt(), "ratio {worst}");
}

#[test]
fn weight_on_bad_points_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..120u64 {
        let (data, truth) = gaussian_data(500, 10, 100 + k, 0.2);
        let m = 10f64.powf(Uniform::new(-1.0, 4.0).unwrap().sample(&mut rng));
        let radius = Uniform::new(0.0, 2.0 / m).unwrap().sample(&mut rng);
        let dir = random_unit_vector(&mut rng, 10);
        let w: Vec<f64> = truth.gold_model.iter().zip(&dir).map(|(g, u)| g + radius * u).collect();
        let rep = bad_weight_report(&w, m, &data, &truth).unwrap();
        assert!(rep.mass <= rep.bound, "draw {k}: {} > {}", rep.mass, rep.bound);
    }
}

#[test]
fn irls_step_does_not_increase_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..200u64 {
        let (data, _) = gaussian_data(80, 4, 300 + k, 0.2);
        let m = 10f64.powf(Uniform::new(-1.0, 6.0).unwrap().sample(&mut rng));
        let w0: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = truncated_weights(&w0, &data, m).unwrap();
        let w1 = wls_solve_with_fallback(&WlsProblem::from_assignment(&data, &s)).unwrap();
        let before = empirical_scaled_huber(&w0, &data, 1.0 / m).unwrap();
        let after = empirical_scaled_huber(&w1, &data, 1.0 / m).unwrap();
        assert!(after <= before + 1e-10 * before.max(1.0), "draw {k}: {before} -> {after}");
    }
}

#[test]
fn generation_is_deterministic() {
    for mode in [CorruptionMode::FakeModel, CorruptionMode::IidHeavy, CorruptionMode::ConstantOffset { offset: -2.0 }] {
        let spec = GeneratorSpec {
            n: 300,
            d: 6,
            alpha: 0.23,
            corruption: mode,
            dense_noise_sigma: 0.3,
            seed: 42,
            ..Default::default()
        };
        let (a, ta) = generate::<f64>(&spec).unwrap();
        let (b, tb) = generate::<f64>(&spec).unwrap();
        assert!(a.covariates().iter().zip(b.covariates()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.responses().iter().zip(b.responses()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(ta, tb);
        assert_eq!(ta.corruption_support.len(), (0.23f64 * 300.0).floor() as usize);
        for (i, &v) in ta.corruption_values.iter().enumerate() {
            if !ta.is_corrupted(i) {
                assert_eq!(v, 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn corrupted_count_is_floor(n in 1usize..2000, alpha in 0.0..0.4999f64, seed: u64) {
        let spec = GeneratorSpec { n, d: 2, alpha, seed, ..Default::default() };
        let (data, truth) = generate::<f64>(&spec).unwrap();
        prop_assert_eq!(truth.corruption_support.len(), (alpha * n as f64).floor() as usize);
        prop_assert!(truth.check_consistency(&data, 1e-12).is_ok());
    }
}
