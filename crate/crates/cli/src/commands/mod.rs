pub mod bandit;
pub mod constant;
pub mod fit;
pub mod gen;
pub mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

use stir_core::solve::{irls_fixed, ols, stir, stir_gd, torrent, torrent_gd};
use stir_core::{Dataset, GroundTruth, SolveError, SolverConfig, SolverKind, SolverTrace};

use crate::config::{ExperimentConfig, Init};
use crate::error::CliError;

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Creates the output directory and records the resolved configuration.
pub fn prepare_out(cfg: &ExperimentConfig) -> Result<(), CliError> {
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("config.toml"), cfg.to_toml()?)
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

pub fn csv_row<I, S>(w: &mut csv::Writer<std::fs::File>, path: &Path, row: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| CliError::io(path, e))
}

pub fn finish_csv(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One solver invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub solver: SolverKind,
    /// Truncation level for IRLS, `alpha_hat` for the TORRENT family.
    pub param: Option<f64>,
}

impl Run {
    /// Expands the configured solver list, one IRLS run per truncation level.
    pub fn all(cfg: &ExperimentConfig) -> Vec<Run> {
        let mut runs = Vec::new();
        for &solver in &cfg.fit.solvers {
            match solver {
                SolverKind::Irls => runs.extend(cfg.fit.truncations.iter().map(|&m| Run {
                    solver,
                    param: Some(m),
                })),
                SolverKind::Torrent | SolverKind::TorrentGd => runs.push(Run {
                    solver,
                    param: Some(cfg.fit.alpha_hat),
                }),
                _ => runs.push(Run { solver, param: None }),
            }
        }
        runs
    }

    pub fn label(&self) -> String {
        match (self.solver, self.param) {
            (SolverKind::Irls, Some(m)) => format!("irls(M={m:e})"),
            (s, Some(a)) => format!("{s}({a})"),
            (s, None) => s.to_string(),
        }
    }

    /// File-name friendly label.
    pub fn slug(&self) -> String {
        match (self.solver, self.param) {
            (SolverKind::Irls, Some(m)) => format!("irls-M{m:e}"),
            (s, Some(a)) => format!("{s}-{a}"),
            (s, None) => s.to_string(),
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_model: Vec<f64>,
    /// Absent for OLS, which has no iterations to record.
    pub trace: Option<SolverTrace<f64>>,
    pub wall_ns: u64,
    pub stages: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl RunOutput {
    fn from_trace(trace: SolverTrace<f64>) -> Self {
        Self {
            final_model: trace.final_model.clone(),
            wall_ns: trace.wall_ns(),
            stages: trace.stage_count(),
            iterations: trace.total_iterations(),
            converged: trace.converged,
            trace: Some(trace),
        }
    }
}

/// Solver settings for one dataset: the configured solver with the start
/// model and reference filled in from the ground truth.
pub fn solver_config(cfg: &ExperimentConfig, d: usize, truth: Option<&GroundTruth<f64>>) -> SolverConfig<f64> {
    let mut s = cfg.solver.clone();
    if cfg.fit.init == Init::Fake {
        if let Some(fake) = truth.and_then(|t| t.fake_model.clone()) {
            s.initial_model = Some(fake);
        }
    }
    if s.initial_model.as_ref().is_some_and(|m| m.len() != d) {
        s.initial_model = None;
    }
    s.reference_model = truth.map(|t| t.gold_model.clone());
    s
}

/// Runs `run`; on failure returns the message and whatever partial output
/// the solver kept.
pub fn execute(run: &Run, data: &Dataset<f64>, config: &SolverConfig<f64>) -> Result<RunOutput, (String, Option<RunOutput>)> {
    let fail = |e: SolveError<f64>| {
        let msg = e.to_string();
        (msg, e.into_partial_trace().map(RunOutput::from_trace))
    };
    let trace = match run.solver {
        SolverKind::Stir => stir(data, config),
        SolverKind::StirGd => stir_gd(data, config),
        SolverKind::Irls => irls_fixed(data, run.param.unwrap_or(1.0), config),
        SolverKind::Torrent => torrent(data, run.param.unwrap_or(0.0), config),
        SolverKind::TorrentGd => torrent_gd(data, run.param.unwrap_or(0.0), config),
        SolverKind::Ols => {
            let t0 = Instant::now();
            let w = ols(data).map_err(fail)?;
            return Ok(RunOutput {
                final_model: w,
                trace: None,
                wall_ns: t0.elapsed().as_nanos() as u64,
                stages: 0,
                iterations: 1,
                converged: true,
            });
        }
    };
    trace.map(RunOutput::from_trace).map_err(fail)
}

/// `path` with its extension replaced by `toml`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("toml")
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Float for a CSV cell; empty when absent.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
