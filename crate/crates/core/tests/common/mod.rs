#![allow(dead_code)]

use stir_core::datagen::{generate, GeneratorSpec};
use stir_core::{Dataset, GroundTruth, SolverConfig, SolverTrace};

/// Gaussian covariates with fake-model corruption.
pub fn corrupted(n: usize, d: usize, alpha: f64, sigma: f64, seed: u64) -> (Dataset<f64>, GroundTruth<f64>) {
    generate(&GeneratorSpec {
        n,
        d,
        alpha,
        dense_noise_sigma: sigma,
        seed,
        ..Default::default()
    })
    .unwrap()
}

/// Staged run started at the fake model, `M_1` chosen automatically.
pub fn from_fake(truth: &GroundTruth<f64>, tol: f64) -> SolverConfig<f64> {
    SolverConfig {
        initial_model: truth.fake_model.clone(),
        auto_initial_truncation: true,
        increment: 2.0,
        target_accuracy: tol,
        reference_model: Some(truth.gold_model.clone()),
        ..Default::default()
    }
}

pub fn error(trace: &SolverTrace<f64>, truth: &GroundTruth<f64>) -> f64 {
    truth.distance_to_gold(&trace.final_model)
}

/// Ratios `dist(w^{T,1}) / dist(w^{T+1,1})` over consecutive stages.
pub fn stage_ratios(trace: &SolverTrace<f64>) -> Vec<f64> {
    trace
        .stages
        .windows(2)
        .map(|w| w[0].dist_to_gold[0] / w[1].dist_to_gold[0])
        .collect()
}

pub fn median(v: Vec<f64>) -> f64 {
    stir_core::linalg::median(&v).unwrap()
}
