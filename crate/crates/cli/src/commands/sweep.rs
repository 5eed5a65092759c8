use rayon::prelude::*;
use serde_json::json;
use stir_core::datagen::generate;

use super::*;
use crate::config::{DataSection, SweepParam};
use crate::error::RunFailure;

fn count(param: SweepParam, v: f64) -> Result<usize, CliError> {
    if v >= 1.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::Usage(format!("sweep over {} needs positive integers, got {v}", param.name())))
    }
}

fn section_at(base: &DataSection, param: SweepParam, v: f64) -> Result<DataSection, CliError> {
    let mut s = base.clone();
    match param {
        SweepParam::N => s.n = count(param, v)?,
        SweepParam::D => s.d = count(param, v)?,
        SweepParam::Alpha => s.alpha = v,
        SweepParam::Sigma => s.dense_noise_sigma = v,
    }
    Ok(s)
}

/// Final-error mean and standard deviation over trials for every grid
/// value and solver, written to `sweep.csv`.
pub fn run(cfg: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    let param = cfg.sweep.param;
    let sections = cfg
        .sweep
        .values
        .iter()
        .map(|&v| section_at(&cfg.data, param, v))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &sections {
        s.spec(cfg.seed).validate()?;
    }
    let runs = Run::all(cfg);
    prepare_out(cfg)?;

    // trial k uses the same seed at every grid value
    let cases: Vec<(usize, usize)> = (0..sections.len())
        .flat_map(|v| (0..cfg.trials).map(move |k| (v, k)))
        .collect();
    let results: Vec<Vec<Result<f64, String>>> = cases
        .par_iter()
        .map(|&(v, k)| {
            let seed = cfg.trial_seed(k);
            let (data, truth) = match generate::<f64>(&sections[v].spec(seed)) {
                Ok(g) => g,
                Err(e) => return vec![Err(e.to_string()); runs.len()],
            };
            let config = solver_config(cfg, data.d(), Some(&truth));
            runs.iter()
                .map(|run| {
                    execute(run, &data, &config)
                        .map(|out| truth.distance_to_gold(&out.final_model))
                        .map_err(|(msg, _)| msg)
                })
                .collect()
        })
        .collect();

    let path = cfg.out.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    csv_row(
        &mut w,
        &path,
        ["param", "value", "solver", "label", "trials", "mean_error", "std_error", "failed"],
    )?;
    let mut failures = Vec::new();
    for (v, &value) in cfg.sweep.values.iter().enumerate() {
        for (r, run) in runs.iter().enumerate() {
            let mut errors = Vec::new();
            for (c, &(cv, k)) in cases.iter().enumerate() {
                if cv != v {
                    continue;
                }
                match &results[c][r] {
                    Ok(e) => errors.push(*e),
                    Err(message) => failures.push(RunFailure {
                        seed: cfg.trial_seed(k),
                        run: format!("{}={value} {}", param.name(), run.label()),
                        message: message.clone(),
                    }),
                }
            }
            let (mean, std) = mean_std(&errors);
            csv_row(
                &mut w,
                &path,
                [
                    param.name().to_string(),
                    value.to_string(),
                    run.solver.to_string(),
                    run.label(),
                    errors.len().to_string(),
                    mean.to_string(),
                    std.to_string(),
                    (cfg.trials - errors.len()).to_string(),
                ],
            )?;
        }
    }
    finish_csv(w, &path)?;
    if !failures.is_empty() {
        return Err(CliError::Runs {
            total: cases.len() * runs.len(),
            failures,
        });
    }
    Ok(json!({
        "command": "sweep",
        "param": param.name(),
        "values": cfg.sweep.values.len(),
        "rows": cfg.sweep.values.len() * runs.len(),
        "table": path.display().to_string(),
    }))
}
