use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stir_core::bandit::Adversary;
use stir_core::datagen::CorruptionMode;
use stir_core::SolverKind;

use crate::config::{ExperimentConfig, Init, PolicyName, SweepParam};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "stir", version, about = "Robust regression and corrupted-bandit experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate corrupted datasets (CSV plus ground-truth sidecar).
    Gen(GenArgs),
    /// Run solvers on a dataset and write traces and a summary table.
    Fit(FitArgs),
    /// Mean and spread of final errors over a grid of n, d, alpha or sigma.
    Sweep(SweepArgs),
    /// Compare bandit policies on shared corrupted environments.
    Bandit(BanditArgs),
    /// Estimate the distribution constants and breakdown thresholds.
    EstimateConstant(ConstantArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CorruptionArg {
    FakeModel,
    IidHeavy,
    ConstantOffset,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Fraction of corrupted points.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Dense noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub corruption: Option<CorruptionArg>,
    /// Offset for constant-offset corruption.
    #[arg(long, default_value_t = 1.0)]
    pub offset: f64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Stage increment eta.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Initial truncation level; disables automatic selection.
    #[arg(long)]
    pub m1: Option<f64>,
    #[arg(long)]
    pub max_inner: Option<usize>,
    /// Step constant for the gradient solvers.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<Init>,
    /// Solvers to run (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_solver)]
    pub solver: Option<Vec<SolverKind>>,
    /// Truncation levels for fixed-M IRLS (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub truncation: Option<Vec<f64>>,
    /// Assumed corruption fraction for TORRENT.
    #[arg(long)]
    pub alpha_hat: Option<f64>,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e: stir_core::DataError| e.to_string())
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of datasets, seeds `seed..seed+trials`.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset CSV; generated from the data options when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Ground-truth sidecar; defaults to the CSV path with a .toml extension.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub gen: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub gen: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum)]
    pub param: Option<SweepParam>,
    /// Grid values (comma separated; an empty string gives an empty grid).
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Option<Vec<String>>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BanditArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub arms: Option<usize>,
    /// Corruption fraction of the environment.
    #[arg(long)]
    pub eta_b: Option<f64>,
    /// Reward clipping bound B.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, value_enum)]
    pub adversary: Option<AdversaryArg>,
    #[arg(long, value_delimiter = ',', value_enum)]
    pub policy: Option<Vec<PolicyName>>,
    /// Trimming fractions for RUCB-Lin (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub alpha_hat: Option<Vec<f64>>,
    /// Scale of the corruption term in the confidence radius.
    #[arg(long)]
    pub radius_scale: Option<f64>,
    #[arg(long)]
    pub refit_every: Option<usize>,
    /// Number of seeds.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Skip the per-seed trajectory files.
    #[arg(long)]
    pub no_trajectories: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AdversaryArg {
    FakeModel,
    TargetedBoost,
}

#[derive(Debug, Args)]
pub struct ConstantArgs {
    #[command(flatten)]
    pub common: Common,
    /// Samples per point estimate.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Samples per grid point.
    #[arg(long)]
    pub grid_samples: Option<usize>,
    #[arg(long)]
    pub angles: Option<usize>,
    #[arg(long)]
    pub radii: Option<usize>,
    /// Noise level for the noisy constant; the grid uses M = 1/sigma.
    #[arg(long)]
    pub sigma: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Reads the config file named by `common`, if any, and applies the
/// command-line overrides shared by every subcommand.
pub fn base_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, common.seed);
    set(&mut cfg.out, common.out.clone());
    set(&mut cfg.jobs, common.jobs);
    Ok(cfg)
}

impl DataArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        let data = &mut cfg.data;
        set(&mut data.n, self.n);
        set(&mut data.d, self.d);
        set(&mut data.alpha, self.alpha);
        set(&mut data.dense_noise_sigma, self.sigma);
        if let Some(c) = self.corruption {
            data.corruption = match c {
                CorruptionArg::FakeModel => CorruptionMode::FakeModel,
                CorruptionArg::IidHeavy => CorruptionMode::IidHeavy,
                CorruptionArg::ConstantOffset => CorruptionMode::ConstantOffset { offset: self.offset },
            };
        }
    }
}

impl SolverArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        let s = &mut cfg.solver;
        set(&mut s.increment, self.eta);
        set(&mut s.target_accuracy, self.tol);
        set(&mut s.max_inner_iterations, self.max_inner);
        set(&mut s.step_length, self.step);
        if let Some(m1) = self.m1 {
            s.initial_truncation = m1;
            s.auto_initial_truncation = false;
        }
        set(&mut cfg.fit.init, self.init);
        set(&mut cfg.fit.solvers, self.solver.clone());
        set(&mut cfg.fit.truncations, self.truncation.clone());
        set(&mut cfg.fit.alpha_hat, self.alpha_hat);
    }
}

impl BanditArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        let b = &mut cfg.bandit;
        set(&mut b.d, self.d);
        set(&mut b.horizon, self.horizon);
        set(&mut b.arms_per_round, self.arms);
        set(&mut b.corruption_fraction, self.eta_b);
        set(&mut b.corruption_bound, self.bound);
        set(&mut b.noise_sigma, self.noise);
        if let Some(a) = self.adversary {
            b.adversary = match a {
                AdversaryArg::FakeModel => Adversary::FakeModel,
                AdversaryArg::TargetedBoost => Adversary::TargetedBoost,
            };
        }
        set(&mut b.policies, self.policy.clone());
        set(&mut b.alpha_hat, self.alpha_hat.clone());
        if self.no_trajectories {
            b.trajectories = false;
        }
        set(&mut cfg.policy.radius_scale, self.radius_scale);
        set(&mut cfg.policy.refit_every, self.refit_every);
        set(&mut cfg.trials, self.trials);
    }
}

impl ConstantArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        let c = &mut cfg.constant;
        set(&mut c.samples, self.samples);
        set(&mut c.grid_samples, self.grid_samples);
        set(&mut c.angles, self.angles);
        set(&mut c.radii, self.radii);
        set(&mut c.noise_sigma, self.sigma);
    }
}

impl SweepArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        self.gen.apply(cfg);
        self.solver.apply(cfg);
        set(&mut cfg.sweep.param, self.param);
        set(&mut cfg.trials, self.trials);
        if let Some(raw) = &self.values {
            cfg.sweep.values = raw
                .iter()
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|e| CliError::Usage(format!("--values: `{s}`: {e}"))))
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }
}
