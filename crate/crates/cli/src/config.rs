//! Experiment configuration file: TOML, every key optional.
//!
//! ```toml
//! seed = 7
//! trials = 10
//! out = "results"
//!
//! [data]
//! n = 1000
//! d = 10
//! alpha = 0.15
//! dense_noise_sigma = 0.0
//! covariates = { kind = "isotropic" }
//! corruption = { kind = "fake-model" }
//!
//! [solver]
//! increment = 2.0
//! target_accuracy = 1e-6
//! auto_initial_truncation = true
//!
//! [fit]
//! solvers = ["stir", "irls"]
//! truncations = [1.0, 1e12]
//! alpha_hat = 0.15
//! init = "fake"
//!
//! [sweep]
//! param = "alpha"
//! values = [0.05, 0.1, 0.2]
//!
//! [bandit]
//! corruption_fraction = 0.2
//! policies = ["wucb-lin", "linucb", "rucb-lin"]
//!
//! [policy]
//! radius_scale = 1e-3
//!
//! [constant]
//! samples = 1000000
//! ```
//!
//! Command-line flags override values read from the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use stir_core::bandit::{Adversary, BanditConfig, PolicyConfig};
use stir_core::datagen::{CorruptionMode, CovariateDistribution, GeneratorSpec};
use stir_core::{SolverConfig, SolverKind};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; trial `k` uses `seed + k`.
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub trials: usize,
    /// Worker threads; 0 picks the number of cores.
    pub jobs: usize,
    pub out: PathBuf,
    pub data: DataSection,
    pub solver: SolverConfig<f64>,
    pub fit: FitSection,
    pub sweep: SweepSection,
    pub bandit: BanditSection,
    pub policy: PolicyConfig,
    pub constant: ConstantSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10,
            jobs: 0,
            out: PathBuf::from("out"),
            data: DataSection::default(),
            solver: SolverConfig {
                auto_initial_truncation: true,
                ..SolverConfig::default()
            },
            fit: FitSection::default(),
            sweep: SweepSection::default(),
            bandit: BanditSection::default(),
            policy: PolicyConfig::default(),
            constant: ConstantSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

/// [`GeneratorSpec`] without its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub n: usize,
    pub d: usize,
    pub covariates: CovariateDistribution,
    pub alpha: f64,
    pub corruption: CorruptionMode,
    pub dense_noise_sigma: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        let g = GeneratorSpec::default();
        Self {
            n: g.n,
            d: g.d,
            covariates: g.covariates,
            alpha: g.alpha,
            corruption: g.corruption,
            dense_noise_sigma: g.dense_noise_sigma,
        }
    }
}

impl DataSection {
    pub fn spec(&self, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            n: self.n,
            d: self.d,
            covariates: self.covariates.clone(),
            alpha: self.alpha,
            corruption: self.corruption.clone(),
            dense_noise_sigma: self.dense_noise_sigma,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Zero,
    /// The fake model of the generated data, zero when there is none.
    Fake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub solvers: Vec<SolverKind>,
    /// One IRLS run per level.
    pub truncations: Vec<f64>,
    pub alpha_hat: f64,
    pub init: Init,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            solvers: SolverKind::ALL.to_vec(),
            truncations: (0..=6).map(|k| 10f64.powi(2 * k)).collect(),
            alpha_hat: 0.15,
            init: Init::Fake,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    N,
    D,
    Alpha,
    Sigma,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::D => "d",
            SweepParam::Alpha => "alpha",
            SweepParam::Sigma => "sigma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            param: SweepParam::Alpha,
            values: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    WucbLin,
    Linucb,
    RucbLin,
}

/// [`BanditConfig`] without its seed, plus the policies to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSection {
    pub d: usize,
    pub horizon: usize,
    pub arms_per_round: usize,
    pub arms_per_round_max: Option<usize>,
    pub noise_sigma: f64,
    pub corruption_fraction: f64,
    pub corruption_bound: f64,
    pub adversary: Adversary,
    pub policies: Vec<PolicyName>,
    /// Trimming fractions for RUCB-Lin; empty means the true fraction.
    pub alpha_hat: Vec<f64>,
    /// Write one trajectory CSV per (policy, seed).
    pub trajectories: bool,
}

impl Default for BanditSection {
    fn default() -> Self {
        let b = BanditConfig::default();
        Self {
            d: b.d,
            horizon: b.horizon,
            arms_per_round: b.arms_per_round,
            arms_per_round_max: b.arms_per_round_max,
            noise_sigma: b.noise_sigma,
            corruption_fraction: b.corruption_fraction,
            corruption_bound: b.corruption_bound,
            adversary: b.adversary,
            policies: vec![PolicyName::WucbLin, PolicyName::Linucb, PolicyName::RucbLin],
            alpha_hat: Vec::new(),
            trajectories: true,
        }
    }
}

impl BanditSection {
    pub fn env(&self, seed: u64) -> BanditConfig {
        BanditConfig {
            d: self.d,
            horizon: self.horizon,
            arms_per_round: self.arms_per_round,
            arms_per_round_max: self.arms_per_round_max,
            noise_sigma: self.noise_sigma,
            corruption_fraction: self.corruption_fraction,
            corruption_bound: self.corruption_bound,
            adversary: self.adversary,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantSection {
    pub covariates: CovariateDistribution,
    /// Samples for each point estimate.
    pub samples: usize,
    /// Samples for each grid point.
    pub grid_samples: usize,
    pub angles: usize,
    pub radii: usize,
    pub noise_sigma: f64,
}

impl Default for ConstantSection {
    fn default() -> Self {
        Self {
            covariates: CovariateDistribution::Isotropic,
            samples: stir_core::analysis::DEFAULT_SAMPLES,
            grid_samples: 100_000,
            angles: stir_core::analysis::GRID_ANGLES,
            radii: stir_core::analysis::GRID_RADII,
            noise_sigma: 0.1,
        }
    }
}

/// TOML integers are signed 64-bit, so seeds above `i64::MAX` are written
/// as strings. Both forms are accepted on input.
mod seed_repr {
    use super::*;

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
