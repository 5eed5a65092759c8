//! Baselines: ordinary least squares and the hard-thresholding TORRENT
//! family, which alternates a fit on an active set with re-selection of the
//! `ceil((1 - alpha_hat) n)` points of smallest residual.

use super::wls::{wls_solve, WlsProblem};
use super::Recorder;
use crate::data::{residuals, Dataset, SolverConfig, SolverKind, SolverTrace};
use crate::error::{DataError, SolveError};
use crate::linalg::{axpy, distance, dot};
use crate::Real;

/// Least squares with unit weights.
pub fn ols<T: Real>(data: &Dataset<T>) -> Result<Vec<T>, SolveError<T>> {
    let ones = vec![T::one(); data.n()];
    wls_solve(&WlsProblem::new(data, &ones))
}

/// Result of a TORRENT run together with its final active set.
#[derive(Debug, Clone)]
pub struct TorrentFit<T> {
    pub trace: SolverTrace<T>,
    /// Sorted indices of the points kept as clean.
    pub active: Vec<usize>,
}

fn active_size(n: usize, alpha_hat: f64) -> Result<usize, DataError> {
    if !(0.0..0.5).contains(&alpha_hat) {
        return Err(DataError::invalid("alpha_hat", format!("must lie in [0, 0.5), got {alpha_hat}")));
    }
    // guard against (1 - a) n landing a hair above an integer
    let k = ((1.0 - alpha_hat) * n as f64 - 1e-9).ceil() as usize;
    Ok(k.clamp(1, n))
}

/// Indicator weights of the `k` smallest |residuals|; ties go to the lower index.
fn select_active<T: Real>(r: &[T], k: usize) -> Vec<T> {
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| {
        r[a].abs()
            .partial_cmp(&r[b].abs())
            .expect("NaN residual")
            .then(a.cmp(&b))
    });
    let mut mask = vec![T::zero(); r.len()];
    for &i in &order[..k] {
        mask[i] = T::one();
    }
    mask
}

fn mask_indices<T: Real>(mask: &[T]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter(|(_, &m)| m > T::zero())
        .map(|(i, _)| i)
        .collect()
}

/// TORRENT with exact least-squares refits on the active set.
pub fn torrent_fit<T: Real>(
    data: &Dataset<T>,
    alpha_hat: f64,
    config: &SolverConfig<T>,
) -> Result<TorrentFit<T>, SolveError<T>> {
    config.validate(data.d())?;
    let k = active_size(data.n(), alpha_hat)?;
    let mut rec = Recorder::new(data, config.reference_model.as_deref());
    let mut w = config.start_model(data.d());
    rec.begin_stage(None, &w);
    let mut mask = select_active(&residuals(&w, data)?, k);
    let mut converged = false;
    for _ in 0..config.max_inner_iterations {
        w = wls_solve(&WlsProblem::new(data, &mask).with_ridge(config.ridge))?;
        rec.record(&w);
        let next = select_active(&residuals(&w, data)?, k);
        if next == mask {
            converged = true;
            break;
        }
        mask = next;
    }
    rec.end_stage();
    Ok(TorrentFit {
        trace: rec.finish(SolverKind::Torrent, None, w, converged),
        active: mask_indices(&mask),
    })
}

pub fn torrent<T: Real>(
    data: &Dataset<T>,
    alpha_hat: f64,
    config: &SolverConfig<T>,
) -> Result<SolverTrace<T>, SolveError<T>> {
    torrent_fit(data, alpha_hat, config).map(|f| f.trace)
}

/// TORRENT with a gradient step `w - step (2/n) X_A r_A` on the active-set
/// squared loss in place of the exact refit. Runs for at most
/// `max_stages * max_inner_iterations` steps, stopping once consecutive
/// iterates are within `target_accuracy`.
pub fn torrent_gd<T: Real>(
    data: &Dataset<T>,
    alpha_hat: f64,
    config: &SolverConfig<T>,
) -> Result<SolverTrace<T>, SolveError<T>> {
    config.validate(data.d())?;
    let k = active_size(data.n(), alpha_hat)?;
    let mut rec = Recorder::new(data, config.reference_model.as_deref());
    let mut w = config.start_model(data.d());
    rec.begin_stage(None, &w);
    let rate = T::lit(2.0) * config.step_length / T::lit(data.n() as f64);
    let budget = config.max_stages.saturating_mul(config.max_inner_iterations);
    let mut converged = false;
    for _ in 0..budget {
        let next = torrent_gd_step(data, &w, k, rate);
        rec.record(&next);
        let moved = distance(&next, &w);
        w = next;
        if moved <= config.target_accuracy {
            converged = true;
            break;
        }
    }
    rec.end_stage();
    Ok(rec.finish(SolverKind::TorrentGd, None, w, converged))
}

/// One TORRENT-GD update from `model` keeping the `k` best-fitting points.
fn torrent_gd_step<T: Real>(data: &Dataset<T>, model: &[T], k: usize, rate: T) -> Vec<T> {
    let r: Vec<T> = data.points().zip(data.responses()).map(|(x, &y)| dot(model, x) - y).collect();
    let mask = select_active(&r, k);
    let mut next = model.to_vec();
    for ((x, &ri), &a) in data.points().zip(&r).zip(&mask) {
        if a > T::zero() {
            axpy(-rate * ri, x, &mut next);
        }
    }
    next
}
