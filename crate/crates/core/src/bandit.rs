//! Corrupted linear contextual bandits.
//!
//! Each round the environment offers a set of arms, the policy plays one,
//! and the reward `<w°, x> + eps_t + b_t` is delivered clipped to
//! `[-B, B]`. The adversary may corrupt at most `eta_b (t + 1)` of the
//! first `t + 1` rounds. Arms, noise and the adversary's coins come from
//! separate streams that do not depend on the policy's choices, so every
//! policy faces the same arms and the same corruption schedule.
//!
//! Policies are optimistic over an ellipsoid `|w - w_bar|_V <= beta` and
//! play `argmax <x, w_bar> + beta |x|_{V^-1}`:
//!
//! * WUCB-Lin weights past pulls by the truncated weights of a STIR-GD fit;
//! * LINUCB uses unit weights;
//! * RUCB-Lin keeps only the pulls TORRENT marks as clean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{truncated_weights, Dataset, SolverConfig};
use crate::datagen::random_unit_vector;
use crate::error::DataError;
use crate::linalg::{axpy, dot, Cholesky, SymMatrix};
use crate::solve::{stir_gd, torrent_fit};

const ARM_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const ADVERSARY_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    /// Corrupted rewards follow a decoy model: `<w~, x> + eps`.
    FakeModel,
    /// Adds `B` to the reward whenever the arm in slot 0 is played.
    TargetedBoost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanditConfig {
    pub d: usize,
    pub horizon: usize,
    pub arms_per_round: usize,
    /// When set, the arm count is drawn uniformly from
    /// `arms_per_round..=arms_per_round_max` each round.
    pub arms_per_round_max: Option<usize>,
    pub noise_sigma: f64,
    /// `eta_b`
    pub corruption_fraction: f64,
    /// `B`
    pub corruption_bound: f64,
    pub adversary: Adversary,
    pub seed: u64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            d: 10,
            horizon: 200,
            arms_per_round: 50,
            arms_per_round_max: None,
            noise_sigma: 0.1,
            corruption_fraction: 0.2,
            corruption_bound: 10.0,
            adversary: Adversary::FakeModel,
            seed: 0,
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.d == 0 || self.horizon == 0 || self.arms_per_round == 0 {
            return Err(DataError::invalid("bandit", "d, horizon and arms_per_round must be >= 1"));
        }
        if let Some(max) = self.arms_per_round_max {
            if max < self.arms_per_round {
                return Err(DataError::invalid("arms_per_round_max", "must be >= arms_per_round"));
            }
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(DataError::invalid("noise_sigma", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.corruption_fraction) {
            return Err(DataError::invalid("corruption_fraction", "must lie in [0, 1]"));
        }
        if !(self.corruption_bound > 0.0) || !self.corruption_bound.is_finite() {
            return Err(DataError::invalid("corruption_bound", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// What the environment delivers for one played arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub reward: f64,
    pub corrupted: bool,
}

/// A running environment. Rebuilding from the same config replays the
/// same arms, noise and corruption coins.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    config: BanditConfig,
    gold: Vec<f64>,
    fake: Vec<f64>,
    arm_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    adversary_rng: ChaCha8Rng,
    round: usize,
    corrupted_so_far: usize,
}

impl BanditEnv {
    pub fn new(config: BanditConfig) -> Result<Self, DataError> {
        config.validate()?;
        let mut models = ChaCha8Rng::seed_from_u64(config.seed);
        let gold = random_unit_vector(&mut models, config.d);
        let fake = random_unit_vector(&mut models, config.d);
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(s);
            r
        };
        Ok(Self {
            arm_rng: stream(ARM_STREAM),
            noise_rng: stream(NOISE_STREAM),
            adversary_rng: stream(ADVERSARY_STREAM),
            config,
            gold,
            fake,
            round: 0,
            corrupted_so_far: 0,
        })
    }

    pub fn config(&self) -> &BanditConfig {
        &self.config
    }

    /// `w°`
    pub fn gold_model(&self) -> &[f64] {
        &self.gold
    }

    pub fn fake_model(&self) -> &[f64] {
        &self.fake
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn corrupted_so_far(&self) -> usize {
        self.corrupted_so_far
    }

    /// Arms for the current round, each `N(0, I/d)`.
    pub fn arms(&mut self) -> Vec<Vec<f64>> {
        let c = &self.config;
        let count = match c.arms_per_round_max {
            Some(max) => self.arm_rng.random_range(c.arms_per_round..=max),
            None => c.arms_per_round,
        };
        let scale = 1.0 / (c.d as f64).sqrt();
        (0..count)
            .map(|_| {
                (0..c.d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut self.arm_rng);
                        scale * z
                    })
                    .collect()
            })
            .collect()
    }

    /// Delivers the reward for playing `arms[index]` and advances the round.
    pub fn play(&mut self, arms: &[Vec<f64>], index: usize) -> Feedback {
        let c = &self.config;
        let x = &arms[index];
        let z: f64 = StandardNormal.sample(&mut self.noise_rng);
        let noise = c.noise_sigma * z;
        let coin = self.adversary_rng.random::<f64>() < c.corruption_fraction;
        let budget = c.corruption_fraction * (self.round + 1) as f64;
        let allowed = (self.corrupted_so_far + 1) as f64 <= budget;
        let clean = dot(&self.gold, x) + noise;
        let (raw, corrupted) = match c.adversary {
            Adversary::FakeModel if coin && allowed => (dot(&self.fake, x) + noise, true),
            Adversary::TargetedBoost if coin && allowed && index == 0 => (clean + c.corruption_bound, true),
            _ => (clean, false),
        };
        if corrupted {
            self.corrupted_so_far += 1;
        }
        assert!(
            self.corrupted_so_far as f64 <= budget,
            "corruption budget exceeded at round {}",
            self.round
        );
        self.round += 1;
        Feedback {
            reward: raw.clamp(-c.corruption_bound, c.corruption_bound),
            corrupted,
        }
    }

    /// `max_x <w°, x> - <w°, arms[index]>`
    pub fn instant_regret(&self, arms: &[Vec<f64>], index: usize) -> f64 {
        let best = arms
            .iter()
            .map(|x| dot(&self.gold, x))
            .fold(f64::NEG_INFINITY, f64::max);
        best - dot(&self.gold, &arms[index])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Policy {
    WucbLin,
    LinUcb,
    RucbLin { alpha_hat: f64 },
}

impl Policy {
    pub fn name(&self) -> String {
        match self {
            Policy::WucbLin => "wucb-lin".into(),
            Policy::LinUcb => "linucb".into(),
            Policy::RucbLin { alpha_hat } => format!("rucb-lin({alpha_hat})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// `sigma_0`
    pub noise_scale: f64,
    /// `alpha_0`
    pub corruption_scale: f64,
    /// Multiplies the corruption term `alpha_0 B T` of the radius.
    pub radius_scale: f64,
    /// `lambda_reg`
    pub ridge: f64,
    /// Refit the robust estimate every this many rounds.
    pub refit_every: usize,
    /// Used for the STIR-GD and TORRENT refits.
    pub solver: SolverConfig<f64>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            noise_scale: 0.1,
            corruption_scale: 0.2,
            radius_scale: 1.0,
            ridge: 1.0,
            refit_every: 1,
            solver: SolverConfig {
                target_accuracy: 0.01,
                auto_initial_truncation: true,
                ..SolverConfig::default()
            },
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, v) in [
            ("noise_scale", self.noise_scale),
            ("corruption_scale", self.corruption_scale),
            ("radius_scale", self.radius_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DataError::invalid(name, "must be finite and >= 0"));
            }
        }
        if !(self.ridge > 0.0) || !self.ridge.is_finite() {
            return Err(DataError::invalid("ridge", "must be finite and > 0"));
        }
        if self.refit_every == 0 {
            return Err(DataError::invalid("refit_every", "must be >= 1"));
        }
        Ok(())
    }
}

/// Ellipsoid `|w - w_bar|_V <= beta` with `V` held factored.
#[derive(Debug, Clone)]
pub struct Confidence {
    pub center: Vec<f64>,
    pub radius: f64,
    factor: Cholesky<f64>,
}

impl Confidence {
    /// `V = lambda I`, `w_bar = 0`.
    pub fn prior(d: usize, ridge: f64, radius: f64) -> Self {
        let mut v = SymMatrix::zeros(d);
        v.add_diagonal(ridge);
        Self {
            center: vec![0.0; d],
            radius,
            factor: Cholesky::factor(&v).expect("ridge > 0"),
        }
    }

    /// `V = sum s x x^T + lambda I`, `w_bar = V^-1 sum s y x`.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], weights: &[f64], ridge: f64, radius: f64) -> Self {
        let d = xs.first().map_or(0, Vec::len);
        let mut v = SymMatrix::zeros(d);
        let mut rhs = vec![0.0; d];
        for ((x, &y), &s) in xs.iter().zip(ys).zip(weights) {
            if s == 0.0 {
                continue;
            }
            v.add_outer_lower(s, x);
            axpy(s * y, x, &mut rhs);
        }
        v.mirror_lower();
        v.add_diagonal(ridge);
        let factor = Cholesky::factor(&v).expect("ridge keeps V positive definite");
        Self {
            center: factor.solve(&rhs),
            radius,
            factor,
        }
    }

    /// `<x, w_bar> + beta |x|_{V^-1}`
    pub fn optimistic_value(&self, x: &[f64]) -> f64 {
        dot(x, &self.center) + self.radius * self.factor.inverse_quadratic_form(x).max(0.0).sqrt()
    }

    /// Index of the arm with the largest optimistic value; ties go to the
    /// lowest index.
    pub fn select_arm(&self, arms: &[Vec<f64>]) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (i, x) in arms.iter().enumerate() {
            let v = self.optimistic_value(x);
            if v > best_value {
                best = i;
                best_value = v;
            }
        }
        best
    }
}

/// Pull history and current estimate of one policy.
#[derive(Debug, Clone)]
pub struct BanditState {
    pub policy: Policy,
    pub pulls: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Weight of each past pull in the current estimate.
    pub weights: Vec<f64>,
    pub confidence: Confidence,
}

impl BanditState {
    pub fn new(policy: Policy, d: usize, horizon: usize, bound: f64, cfg: &PolicyConfig) -> Self {
        Self {
            policy,
            pulls: Vec::new(),
            rewards: Vec::new(),
            weights: Vec::new(),
            confidence: Confidence::prior(d, cfg.ridge, radius(policy, d, horizon, bound, cfg)),
        }
    }

    pub fn select_arm(&self, arms: &[Vec<f64>]) -> usize {
        self.confidence.select_arm(arms)
    }

    /// Appends a pull and, when due, refits the estimate.
    pub fn update(&mut self, x: Vec<f64>, reward: f64, cfg: &PolicyConfig, horizon: usize, bound: f64) {
        self.pulls.push(x);
        self.rewards.push(reward);
        let t = self.pulls.len();
        let d = self.pulls[0].len();
        let beta = radius(self.policy, d, horizon, bound, cfg);
        let refit = t % cfg.refit_every == 0 || matches!(self.policy, Policy::LinUcb);
        if !refit {
            // new pulls enter at unit weight until the next refit
            self.weights.push(1.0);
        } else {
            self.weights = match self.policy {
                Policy::LinUcb => vec![1.0; t],
                Policy::WucbLin => robust_weights(&self.pulls, &self.rewards, &cfg.solver),
                Policy::RucbLin { alpha_hat } => {
                    active_weights(&self.pulls, &self.rewards, alpha_hat, &cfg.solver)
                }
            };
        }
        self.confidence = Confidence::fit(&self.pulls, &self.rewards, &self.weights, cfg.ridge, beta);
    }
}

/// `sigma_0 sqrt(d log T)`, plus `radius_scale alpha_0 B T` for WUCB-Lin.
pub fn radius(policy: Policy, d: usize, horizon: usize, bound: f64, cfg: &PolicyConfig) -> f64 {
    let base = cfg.noise_scale * (d as f64 * (horizon as f64).ln()).max(0.0).sqrt();
    match policy {
        Policy::WucbLin => base + cfg.radius_scale * cfg.corruption_scale * bound * horizon as f64,
        _ => base,
    }
}

fn history(xs: &[Vec<f64>], ys: &[f64]) -> Dataset<f64> {
    let cov = xs.iter().flatten().copied().collect();
    Dataset::new(xs[0].len(), cov, ys.to_vec()).expect("pulls are finite and non-empty")
}

/// Truncated weights at the end of a STIR-GD fit on the history. An inner
/// loop that fails to settle still yields its last model and level.
fn robust_weights(xs: &[Vec<f64>], ys: &[f64], solver: &SolverConfig<f64>) -> Vec<f64> {
    let data = history(xs, ys);
    let trace = match stir_gd(&data, solver) {
        Ok(t) => t,
        Err(e) => match e.into_partial_trace() {
            Some(t) => t,
            None => return vec![1.0; xs.len()],
        },
    };
    let m = trace.final_truncation().unwrap_or(solver.initial_truncation);
    truncated_weights(&trace.final_model, &data, m)
        .expect("model has the history's dimension")
        .weights
}

/// Indicator of TORRENT's active set, or all ones when the active set is
/// too small to fit.
fn active_weights(xs: &[Vec<f64>], ys: &[f64], alpha_hat: f64, solver: &SolverConfig<f64>) -> Vec<f64> {
    let data = history(xs, ys);
    match torrent_fit(&data, alpha_hat, solver) {
        Ok(fit) => {
            let mut w = vec![0.0; xs.len()];
            for i in fit.active {
                w[i] = 1.0;
            }
            w
        }
        Err(_) => vec![1.0; xs.len()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub arm_index: usize,
    pub reward: f64,
    pub corrupted: bool,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub policy: String,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    /// Weights of the pulls in the final estimate, in pull order.
    pub final_weights: Vec<f64>,
}

impl Trajectory {
    pub fn cumulative_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cumulative_regret)
    }

    /// Mean final weight over corrupted and over clean pulls.
    pub fn mean_weights(&self) -> (Option<f64>, Option<f64>) {
        let mean = |flag: bool| {
            let v: Vec<f64> = self
                .rounds
                .iter()
                .zip(&self.final_weights)
                .filter(|(r, _)| r.corrupted == flag)
                .map(|(_, &w)| w)
                .collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        (mean(true), mean(false))
    }
}

/// Runs one policy for the full horizon.
pub fn simulate(config: &BanditConfig, policy: Policy, cfg: &PolicyConfig) -> Result<Trajectory, DataError> {
    cfg.validate()?;
    if let Policy::RucbLin { alpha_hat } = policy {
        if !(0.0..0.5).contains(&alpha_hat) {
            return Err(DataError::invalid("alpha_hat", "must lie in [0, 0.5)"));
        }
    }
    let mut env = BanditEnv::new(config.clone())?;
    let (horizon, bound) = (config.horizon, config.corruption_bound);
    let mut state = BanditState::new(policy, config.d, horizon, bound, cfg);
    let mut rounds = Vec::with_capacity(horizon);
    let mut cumulative = 0.0;
    for t in 0..horizon {
        let arms = env.arms();
        let index = state.select_arm(&arms);
        let regret = env.instant_regret(&arms, index);
        let fb = env.play(&arms, index);
        cumulative += regret;
        rounds.push(RoundRecord {
            t: t + 1,
            arm_index: index,
            reward: fb.reward,
            corrupted: fb.corrupted,
            instant_regret: regret,
            cumulative_regret: cumulative,
        });
        state.update(arms[index].clone(), fb.reward, cfg, horizon, bound);
    }
    Ok(Trajectory {
        policy: policy.name(),
        seed: config.seed,
        rounds,
        final_weights: state.weights,
    })
}

pub fn write_trajectory_csv<W: std::io::Write>(traj: &Trajectory, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| DataError::from(std::io::Error::other(e.to_string()));
    w.write_record(["t", "arm_index", "reward", "corrupted_flag", "instant_regret", "cumulative_regret"])
        .map_err(io)?;
    for r in &traj.rounds {
        w.write_record([
            r.t.to_string(),
            r.arm_index.to_string(),
            r.reward.to_string(),
            u8::from(r.corrupted).to_string(),
            r.instant_regret.to_string(),
            r.cumulative_regret.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
