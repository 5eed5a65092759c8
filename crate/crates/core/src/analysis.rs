//! Empirical checks of the quantities that govern recovery: weighted Gram
//! spectra, the distribution constants `c` and `c_eps`, breakdown
//! thresholds, and the loss-convergence bounds.
//!
//! Monte-Carlo estimates are computed in fixed-size blocks, each with its
//! own ChaCha stream, and merged in block order. The result therefore does
//! not depend on how many rayon workers ran the blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth, WeightAssignment};
use crate::datagen::{CovariateDistribution, CovariateSampler};
use crate::error::DataError;
use crate::linalg::{dot, norm, symmetric_eigenvalues, SymMatrix};
use crate::loss::{empirical_scaled_huber, mean_absolute_residual};
use crate::Real;

/// Value of `c` claimed for the standard Gaussian alongside the weighted
/// strong convexity bound.
pub const GAUSSIAN_C_CLAIMED: f64 = 0.96;
/// Lower bound on `c` for the standard Gaussian from the infimum computation.
pub const GAUSSIAN_C_BOUND: f64 = 0.68;
/// Lower bound on `c_eps` for Gaussian covariates with Gaussian noise.
pub const GAUSSIAN_C_NOISY_BOUND: f64 = 0.52;

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const MIN_SAMPLES: usize = 10_000;
pub const GRID_ANGLES: usize = 33;
pub const GRID_RADII: usize = 17;

const BLOCK: usize = 1 << 14;
const NOISE_STREAM_OFFSET: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `lambda_min / (G M)`
    pub normalized_min: f64,
    /// `lambda_max / (G M)`
    pub normalized_max: f64,
    #[serde(rename = "M")]
    pub truncation: f64,
    #[serde(rename = "G")]
    pub good_count: usize,
}

/// Extreme eigenvalues of `X_G S_G X_G^T`, the weighted Gram matrix of the
/// clean points.
pub fn wsc_wss_report<T: Real>(
    data: &Dataset<T>,
    truth: &GroundTruth<T>,
    weights: &WeightAssignment<T>,
) -> Result<SpectralReport, DataError> {
    if weights.weights.len() != data.n() || truth.corruption_values.len() != data.n() {
        return Err(DataError::DimensionMismatch {
            expected: data.n(),
            found: weights.weights.len().min(truth.corruption_values.len()),
        });
    }
    let good = truth.good_indices();
    let mut gram = SymMatrix::zeros(data.d());
    for &i in &good {
        gram.add_outer_lower(weights.weights[i], data.point(i));
    }
    gram.mirror_lower();
    let ev = symmetric_eigenvalues(&gram);
    // the Gram matrix is PSD; clip rounding below zero
    let lambda_min = ev[0].as_f64().max(0.0);
    let lambda_max = ev[ev.len() - 1].as_f64().max(lambda_min);
    let m = weights.truncation.as_f64();
    let scale = good.len() as f64 * m;
    let (normalized_min, normalized_max) = if scale > 0.0 {
        (lambda_min / scale, lambda_max / scale)
    } else {
        (0.0, 0.0)
    };
    Ok(SpectralReport {
        lambda_min,
        lambda_max,
        normalized_min,
        normalized_max,
        truncation: m,
        good_count: good.len(),
    })
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Estimate {
    /// `|self - other| / sqrt(se1^2 + se2^2)`
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let se = self.std_error.hypot(other.std_error);
        (self.value - other.value).abs() / se
    }
}

/// Mean and standard error of `sample` over `samples` draws. `sample`
/// receives the covariate stream and a separate noise stream for its block.
pub fn monte_carlo<F>(samples: usize, seed: u64, sample: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng, &mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = samples.div_ceil(BLOCK);
    let partial: Vec<(usize, f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK.min(samples - b * BLOCK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut noise = ChaCha8Rng::seed_from_u64(seed);
            noise.set_stream(NOISE_STREAM_OFFSET | b as u64);
            // Welford within the block
            let (mut mean, mut m2) = (0.0, 0.0);
            for k in 0..count {
                let v = sample(&mut rng, &mut noise);
                let delta = v - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (v - mean);
            }
            (count, mean, m2)
        })
        .collect();
    // Chan et al. pairwise merge, in block order
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for (nb, mb, m2b) in partial {
        if nb == 0 {
            continue;
        }
        let total = n + nb;
        let delta = mb - mean;
        mean += delta * nb as f64 / total as f64;
        m2 += m2b + delta * delta * (n as f64) * (nb as f64) / total as f64;
        n = total;
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { f64::NAN };
    Estimate {
        value: mean,
        std_error: (var / n as f64).sqrt(),
        samples: n,
        seed,
    }
}

fn check_samples(samples: usize) -> Result<(), DataError> {
    if samples < MIN_SAMPLES {
        return Err(DataError::invalid(
            "samples",
            format!("at least {MIN_SAMPLES} samples are required, got {samples}"),
        ));
    }
    Ok(())
}

fn check_unit(name: &'static str, v: &[f64], d: usize) -> Result<(), DataError> {
    if v.len() != d {
        return Err(DataError::DimensionMismatch {
            expected: d,
            found: v.len(),
        });
    }
    let nv = norm(v);
    if !((nv - 1.0).abs() <= 1e-9) {
        return Err(DataError::invalid(name, format!("must be a unit vector, norm is {nv}")));
    }
    Ok(())
}

/// Monte-Carlo estimate of `E[min{1/|<u,x>|, 1} <x,v>^2]`.
pub fn estimate_constant_c(
    distribution: &CovariateDistribution,
    u: &[f64],
    v: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Estimate, DataError> {
    let d = u.len();
    check_samples(samples)?;
    check_unit("u", u, d)?;
    check_unit("v", v, d)?;
    let sampler = CovariateSampler::new(distribution, d)?;
    Ok(monte_carlo(samples, seed, |rng, _| {
        let x = sampler.sample(rng);
        let a = dot(u, &x).abs();
        let b = dot(&x, v);
        (1.0 / a).min(1.0) * b * b
    }))
}

/// Monte-Carlo estimate of `E[min{1/|M r <u,x> - M eps|, 1} <x,v>^2]` with
/// `eps ~ N(0, sigma^2)` drawn from a stream separate from the covariates,
/// so `sigma = 0, r = 1/M` reproduces [`estimate_constant_c`] on the same
/// covariate draws.
#[allow(clippy::too_many_arguments)]
pub fn estimate_constant_c_noisy(
    distribution: &CovariateDistribution,
    noise_sigma: f64,
    truncation: f64,
    r: f64,
    u: &[f64],
    v: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Estimate, DataError> {
    let d = u.len();
    check_samples(samples)?;
    check_unit("u", u, d)?;
    check_unit("v", v, d)?;
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(DataError::invalid("noise_sigma", "must be finite and >= 0"));
    }
    if !(truncation > 0.0) || !truncation.is_finite() {
        return Err(DataError::invalid("M", "must be finite and > 0"));
    }
    if noise_sigma > 0.0 && truncation > 1.0 / noise_sigma * (1.0 + 1e-12) {
        return Err(DataError::invalid("M", format!("must be <= 1/sigma = {}", 1.0 / noise_sigma)));
    }
    if !(0.0..=1.0 / truncation * (1.0 + 1e-12)).contains(&r) {
        return Err(DataError::invalid("r", format!("must lie in [0, 1/M], got {r}")));
    }
    let sampler = CovariateSampler::new(distribution, d)?;
    Ok(monte_carlo(samples, seed, |rng, noise| {
        let x = sampler.sample(rng);
        let eps = if noise_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(noise);
            noise_sigma * z
        } else {
            0.0
        };
        let a = (truncation * r * dot(u, &x) - truncation * eps).abs();
        let b = dot(&x, v);
        (1.0 / a).min(1.0) * b * b
    }))
}

/// Monte-Carlo estimate of `E[min{1/(sqrt 2 |z|), 1}]`, `z ~ N(0,1)`.
pub fn estimate_noisy_sub_integral(samples: usize, seed: u64) -> Result<Estimate, DataError> {
    check_samples(samples)?;
    let s2 = std::f64::consts::SQRT_2;
    Ok(monte_carlo(samples, seed, |rng, _| {
        let z: f64 = StandardNormal.sample(rng);
        (1.0 / (s2 * z.abs())).min(1.0)
    }))
}

/// Adaptive Simpson on `[a, b]`.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// The two coefficients `(k1, k2)` with
/// `c(v) = k1 v_1^2 + k2 v_2^2` for the isotropic Gaussian, `u = e_1`,
/// computed by quadrature of the one-dimensional reduction.
pub fn gaussian_constant_coefficients() -> (f64, f64) {
    let g = |t: f64| (-0.5 * t * t).exp();
    let scale = (2.0 / std::f64::consts::PI).sqrt();
    let tol = 1e-14;
    // the tail beyond 40 is below e^-800
    let k1 = simpson(&|t| t * t * g(t), 0.0, 1.0, tol) + simpson(&|t| t * g(t), 1.0, 40.0, tol);
    let k2 = simpson(&g, 0.0, 1.0, tol) + simpson(&|t| g(t) / t, 1.0, 40.0, tol);
    (scale * k1, scale * k2)
}

/// Deterministic quadrature value of `c` for the isotropic Gaussian at
/// `v = (cos theta, sin theta)` relative to `u`.
pub fn gaussian_constant_quadrature(theta: f64) -> f64 {
    let (k1, k2) = gaussian_constant_coefficients();
    let (s, c) = theta.sin_cos();
    k1 * c * c + k2 * s * s
}

/// `theta_k = k pi / (count - 1)`, `k = 0..count`: half a circle suffices
/// since `c` depends on `v` only through `v_1^2`.
pub fn angle_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|k| k as f64 * std::f64::consts::PI / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub theta: f64,
    /// `r`, only for the noisy grid.
    pub r: Option<f64>,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantGrid {
    pub points: Vec<GridPoint>,
    /// The grid point with the smallest estimate.
    pub infimum: GridPoint,
}

fn grid_from(points: Vec<GridPoint>) -> Result<ConstantGrid, DataError> {
    let infimum = points
        .iter()
        .min_by(|a, b| a.estimate.value.total_cmp(&b.estimate.value))
        .cloned()
        .ok_or_else(|| DataError::invalid("grid", "empty grid"))?;
    Ok(ConstantGrid { points, infimum })
}

/// Two-dimensional reduction of the infimum over `(u, v)`: `u = e_1`,
/// `v = (cos theta, sin theta)`. All grid points share one seed, so the
/// estimates use common random numbers.
pub fn constant_grid(
    distribution: &CovariateDistribution,
    angles: usize,
    samples: usize,
    seed: u64,
) -> Result<ConstantGrid, DataError> {
    let u = [1.0, 0.0];
    let points = angle_grid(angles)
        .into_iter()
        .map(|theta| {
            let v = [theta.cos(), theta.sin()];
            estimate_constant_c(distribution, &u, &v, samples, seed).map(|estimate| GridPoint {
                theta,
                r: None,
                estimate,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    grid_from(points)
}

/// The quadrature counterpart of [`constant_grid`] for the isotropic
/// Gaussian; standard errors are zero.
pub fn gaussian_quadrature_grid(angles: usize) -> Result<ConstantGrid, DataError> {
    let points = angle_grid(angles)
        .into_iter()
        .map(|theta| GridPoint {
            theta,
            r: None,
            estimate: Estimate {
                value: gaussian_constant_quadrature(theta),
                std_error: 0.0,
                samples: 0,
                seed: 0,
            },
        })
        .collect();
    grid_from(points)
}

/// Grid over `theta` and `r in [0, 1/M]` for the noisy constant.
#[allow(clippy::too_many_arguments)]
pub fn noisy_constant_grid(
    distribution: &CovariateDistribution,
    noise_sigma: f64,
    truncation: f64,
    angles: usize,
    radii: usize,
    samples: usize,
    seed: u64,
) -> Result<ConstantGrid, DataError> {
    let u = [1.0, 0.0];
    let rs: Vec<f64> = match radii {
        0 => Vec::new(),
        1 => vec![0.0],
        k => (0..k).map(|j| j as f64 / ((k - 1) as f64 * truncation)).collect(),
    };
    let mut points = Vec::with_capacity(angles * rs.len());
    for theta in angle_grid(angles) {
        let v = [theta.cos(), theta.sin()];
        for &r in &rs {
            let estimate =
                estimate_constant_c_noisy(distribution, noise_sigma, truncation, r, &u, &v, samples, seed)?;
            points.push(GridPoint {
                theta,
                r: Some(r),
                estimate,
            });
        }
    }
    grid_from(points)
}

/// Largest admissible corruption fraction, `c / (k eta + c)` with
/// `k = 2.88` (clean) or `5.85` (dense noise). `eta = 1` gives the
/// `eta -> 1` limit.
pub fn breakdown_threshold(c: f64, eta: f64, dense_noise: bool) -> Result<f64, DataError> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(DataError::invalid("c", format!("must be finite and >= 0, got {c}")));
    }
    if !(eta >= 1.0) || !eta.is_finite() {
        return Err(DataError::invalid("eta", format!("must be finite and >= 1, got {eta}")));
    }
    let k = if dense_noise { 5.85 } else { 2.88 };
    Ok(if c == 0.0 { 0.0 } else { c / (k * eta + c) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConvergenceReport {
    /// `|w^K - w*|`, used as `eps` in both bounds.
    pub epsilon: f64,
    pub loss_final: f64,
    pub loss_gold: f64,
    /// `loss_gold + sqrt(1.01) eps - loss_final`; nonnegative when the bound holds.
    pub loss_slack: f64,
    pub l1_final: f64,
    pub l1_gold: f64,
    /// `l1_gold + (3 sqrt(1.01) / 2) eps - l1_final`
    pub l1_slack: f64,
}

impl LossConvergenceReport {
    /// Both slacks nonnegative up to `tol`.
    pub fn holds(&self, tol: f64) -> bool {
        self.loss_slack >= -tol && self.l1_slack >= -tol
    }
}

/// Checks `l_eps(w^K) <= l_eps(w*) + sqrt(1.01) eps` and the mean absolute
/// residual bound with factor `3 sqrt(1.01)/2`, at `eps = |w^K - w*|`.
pub fn loss_convergence_report<T: Real>(
    final_model: &[T],
    data: &Dataset<T>,
    truth: &GroundTruth<T>,
) -> Result<LossConvergenceReport, DataError> {
    data.check_model(final_model)?;
    let eps = truth.distance_to_gold(final_model);
    let loss = |w: &[T]| {
        if eps > T::zero() {
            empirical_scaled_huber(w, data, eps)
        } else {
            mean_absolute_residual(w, data)
        }
    };
    let loss_final = loss(final_model)?.as_f64();
    let loss_gold = loss(&truth.gold_model)?.as_f64();
    let l1_final = mean_absolute_residual(final_model, data)?.as_f64();
    let l1_gold = mean_absolute_residual(&truth.gold_model, data)?.as_f64();
    let e = eps.as_f64();
    let lip = 1.01f64.sqrt();
    Ok(LossConvergenceReport {
        epsilon: e,
        loss_final,
        loss_gold,
        loss_slack: loss_gold + lip * e - loss_final,
        l1_final,
        l1_gold,
        l1_slack: l1_gold + 1.5 * lip * e - l1_final,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadWeightReport {
    /// `|S_B b|^2`
    pub mass: f64,
    /// `4 B (1 + 1.01 M^2 eps^2)` with `eps = |w - w*|`
    pub bound: f64,
}

/// Weight the truncated weights of `model` put on the corrupted points,
/// against its upper bound.
pub fn bad_weight_report<T: Real>(
    model: &[T],
    truncation: T,
    data: &Dataset<T>,
    truth: &GroundTruth<T>,
) -> Result<BadWeightReport, DataError> {
    let s = crate::data::truncated_weights(model, data, truncation)?;
    let mass: f64 = truth
        .corruption_support
        .iter()
        .map(|&i| (s.weights[i] * truth.corruption_values[i]).as_f64().powi(2))
        .sum();
    let m = truncation.as_f64();
    let eps = truth.distance_to_gold(model).as_f64();
    let b = truth.corruption_support.len() as f64;
    Ok(BadWeightReport {
        mass,
        bound: 4.0 * b * (1.0 + 1.01 * m * m * eps * eps),
    })
}
