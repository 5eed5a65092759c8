use std::path::Path;

use rayon::prelude::*;
use serde_json::json;
use stir_core::datagen::generate;
use stir_core::io::{ground_truth_from_toml, read_dataset_csv, write_trace_jsonl};
use stir_core::{Dataset, GroundTruth};

use super::*;
use crate::error::RunFailure;

struct Problem {
    seed: u64,
    data: Dataset<f64>,
    truth: Option<GroundTruth<f64>>,
}

fn load(path: &Path, truth_path: Option<&Path>, seed: u64) -> Result<Problem, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let data = read_dataset_csv::<f64, _>(std::io::BufReader::new(file))?;
    let sidecar = sidecar_path(path);
    let truth_path = match truth_path {
        Some(p) => Some(p.to_path_buf()),
        None => sidecar.exists().then_some(sidecar),
    };
    let truth = match truth_path {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            let truth = ground_truth_from_toml::<f64>(&text)?;
            truth.check_consistency(&data, 1e-9)?;
            Some(truth)
        }
        None => None,
    };
    let seed = truth.as_ref().map_or(seed, |t| t.seed);
    Ok(Problem { seed, data, truth })
}

/// Runs every configured solver on each dataset, writing one JSON-lines
/// trace per run under `traces/` and a `summary.csv` row per run.
pub fn run(cfg: &ExperimentConfig, data: Option<&Path>, truth: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let problems = match data {
        Some(path) => vec![load(path, truth, cfg.seed)?],
        None => (0..cfg.trials)
            .into_par_iter()
            .map(|k| {
                let seed = cfg.trial_seed(k);
                let (data, truth) = generate::<f64>(&cfg.data.spec(seed))?;
                Ok(Problem {
                    seed,
                    data,
                    truth: Some(truth),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?,
    };
    let runs = Run::all(cfg);
    for p in &problems {
        solver_config(cfg, p.data.d(), p.truth.as_ref()).validate(p.data.d())?;
    }
    prepare_out(cfg)?;
    let trace_dir = cfg.out.join("traces");
    create_dir(&trace_dir)?;

    let jobs: Vec<(usize, usize)> = (0..problems.len())
        .flat_map(|p| (0..runs.len()).map(move |r| (p, r)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let problem = &problems[p];
            let config = solver_config(cfg, problem.data.d(), problem.truth.as_ref());
            execute(&runs[r], &problem.data, &config)
        })
        .collect();

    let summary_path = cfg.out.join("summary.csv");
    let mut summary = csv_writer(&summary_path)?;
    csv_row(
        &mut summary,
        &summary_path,
        ["seed", "solver", "label", "final_error", "wall_ns", "stages", "iterations", "converged"],
    )?;
    let mut failures = Vec::new();
    for (&(p, r), result) in jobs.iter().zip(results) {
        let (problem, run) = (&problems[p], &runs[r]);
        let output = match result {
            Ok(out) => Some(out),
            Err((message, partial)) => {
                failures.push(RunFailure {
                    seed: problem.seed,
                    run: run.label(),
                    message,
                });
                partial
            }
        };
        let Some(out) = output else { continue };
        if let Some(trace) = &out.trace {
            let path = trace_dir.join(format!("seed-{}-{}.jsonl", problem.seed, run.slug()));
            let mut buf = Vec::new();
            write_trace_jsonl(trace, &mut buf)?;
            write_file(&path, buf)?;
        }
        let error = problem.truth.as_ref().map(|t| t.distance_to_gold(&out.final_model));
        csv_row(
            &mut summary,
            &summary_path,
            [
                problem.seed.to_string(),
                run.solver.to_string(),
                run.label(),
                cell(error),
                out.wall_ns.to_string(),
                out.stages.to_string(),
                out.iterations.to_string(),
                out.converged.to_string(),
            ],
        )?;
    }
    finish_csv(summary, &summary_path)?;
    if !failures.is_empty() {
        return Err(CliError::Runs {
            total: jobs.len(),
            failures,
        });
    }
    Ok(json!({
        "command": "fit",
        "runs": jobs.len(),
        "summary": summary_path.display().to_string(),
        "traces": trace_dir.display().to_string(),
    }))
}
