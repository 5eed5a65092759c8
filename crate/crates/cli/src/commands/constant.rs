use serde_json::json;
use stir_core::analysis::{
    breakdown_threshold, constant_grid, estimate_constant_c, estimate_noisy_sub_integral, gaussian_constant_coefficients,
    gaussian_quadrature_grid, noisy_constant_grid, GAUSSIAN_C_BOUND, GAUSSIAN_C_CLAIMED, GAUSSIAN_C_NOISY_BOUND,
};
use stir_core::datagen::CovariateDistribution;

use super::*;

fn thresholds(c: f64, eta: f64) -> Result<serde_json::Value, CliError> {
    Ok(json!({
        "c": c,
        "clean_limit": breakdown_threshold(c, 1.0, false)?,
        "dense_limit": breakdown_threshold(c, 1.0, true)?,
        "clean_at_eta": breakdown_threshold(c, eta, false)?,
        "dense_at_eta": breakdown_threshold(c, eta, true)?,
    }))
}

/// Estimates the constant at `v = u` and `v ⊥ u`, its infimum over an angle
/// grid (clean and noisy), and the breakdown thresholds implied by each
/// reference value. Written to `report.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    let c = &cfg.constant;
    let dist = &c.covariates;
    let seed = cfg.seed;
    let eta = cfg.solver.increment;
    let (e1, e2) = ([1.0, 0.0], [0.0, 1.0]);

    let same = estimate_constant_c(dist, &e1, &e1, c.samples, seed)?;
    let perpendicular = estimate_constant_c(dist, &e1, &e2, c.samples, seed)?;
    let grid = constant_grid(dist, c.angles, c.grid_samples, seed)?;
    let truncation = if c.noise_sigma > 0.0 { 1.0 / c.noise_sigma } else { 1.0 };
    let noisy = noisy_constant_grid(dist, c.noise_sigma, truncation, c.angles, c.radii, c.grid_samples, seed)?;
    let sub_integral = estimate_noisy_sub_integral(c.samples, seed)?;

    let quadrature = if matches!(dist, CovariateDistribution::Isotropic) {
        let (k1, k2) = gaussian_constant_coefficients();
        let q = gaussian_quadrature_grid(c.angles)?;
        json!({ "k1": k1, "k2": k2, "infimum": q.infimum })
    } else {
        serde_json::Value::Null
    };

    let report = json!({
        "command": "estimate-constant",
        "seed": seed,
        "covariates": dist,
        "c_same": same,
        "c_perpendicular": perpendicular,
        "quadrature": quadrature,
        "grid_infimum": grid.infimum,
        "noisy": {
            "sigma": c.noise_sigma,
            "truncation": truncation,
            "infimum": noisy.infimum,
            "sub_integral": sub_integral,
        },
        "reference": {
            "clean_bound": GAUSSIAN_C_BOUND,
            "noisy_bound": GAUSSIAN_C_NOISY_BOUND,
            "claimed": GAUSSIAN_C_CLAIMED,
        },
        "eta": eta,
        "breakdown": {
            "estimated": thresholds(grid.infimum.estimate.value, eta)?,
            "estimated_noisy": thresholds(noisy.infimum.estimate.value, eta)?,
            "clean_bound": thresholds(GAUSSIAN_C_BOUND, eta)?,
            "noisy_bound": thresholds(GAUSSIAN_C_NOISY_BOUND, eta)?,
            "claimed": thresholds(GAUSSIAN_C_CLAIMED, eta)?,
        },
    });
    prepare_out(cfg)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&cfg.out.join("report.json"), text + "\n")?;
    Ok(report)
}
