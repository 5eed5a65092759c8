use rayon::prelude::*;
use serde_json::json;
use stir_core::datagen::generate;
use stir_core::io::{ground_truth_to_toml, write_dataset_csv};

use super::{prepare_out, write_file};
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Writes `dataset-<seed>.csv` and its `dataset-<seed>.toml` sidecar for
/// each trial seed.
pub fn run(cfg: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    for k in 0..cfg.trials {
        cfg.data.spec(cfg.trial_seed(k)).validate()?;
    }
    prepare_out(cfg)?;
    let files: Vec<(String, String, usize)> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.trial_seed(k);
            let (data, truth) = generate::<f64>(&cfg.data.spec(seed))?;
            let csv_path = cfg.out.join(format!("dataset-{seed}.csv"));
            let toml_path = cfg.out.join(format!("dataset-{seed}.toml"));
            let mut buf = Vec::new();
            write_dataset_csv(&data, &mut buf)?;
            write_file(&csv_path, buf)?;
            write_file(&toml_path, ground_truth_to_toml(&truth))?;
            Ok((
                csv_path.display().to_string(),
                toml_path.display().to_string(),
                truth.corruption_support.len(),
            ))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(json!({
        "command": "gen",
        "datasets": files
            .iter()
            .map(|(csv, toml, bad)| json!({ "data": csv, "truth": toml, "corrupted": bad }))
            .collect::<Vec<_>>(),
    }))
}
