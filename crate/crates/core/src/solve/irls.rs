use super::wls::{wls_solve_with_fallback, WlsProblem};
use super::Recorder;
use crate::data::{
    residuals, truncated_weight, truncated_weights, Dataset, SolverConfig, SolverKind, SolverTrace,
};
use crate::error::SolveError;
use crate::linalg::{axpy, distance, dot, median, norm};
use crate::Real;

/// Upper bound on halvings tried by automatic `M_1` selection.
pub const AUTO_TRUNCATION_MAX_HALVINGS: usize = 40;

/// A first stage is accepted when at least this fraction of points ends up
/// fitted to within `1/M_1` (weight at the cap).
const AUTO_TRUNCATION_MIN_CAPPED: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
enum InnerStep<T> {
    /// Weighted least squares on the truncated weights.
    Exact { ridge: T },
    /// `w - (2C / (M n)) X S r`
    Gradient { step_length: T },
}

fn inner_update<T: Real>(
    data: &Dataset<T>,
    model: &[T],
    truncation: T,
    step: InnerStep<T>,
) -> Result<Vec<T>, SolveError<T>> {
    match step {
        InnerStep::Exact { ridge } => {
            let s = truncated_weights(model, data, truncation)?;
            wls_solve_with_fallback(&WlsProblem::from_assignment(data, &s).with_ridge(ridge))
        }
        InnerStep::Gradient { step_length } => {
            let mut g = vec![T::zero(); data.d()];
            for (x, &y) in data.points().zip(data.responses()) {
                let r = dot(model, x) - y;
                axpy(truncated_weight(r, truncation) * r, x, &mut g);
            }
            let n = T::lit(data.n() as f64);
            let rate = T::lit(2.0) * step_length / (truncation * n);
            let mut next = model.to_vec();
            axpy(-rate, &g, &mut next);
            Ok(next)
        }
    }
}

/// Runs one stage from `start` at truncation `m` until consecutive iterates
/// are within `threshold`. Returns the last iterate and whether the
/// threshold was met within `max_inner` updates.
fn run_stage<T: Real>(
    data: &Dataset<T>,
    start: &[T],
    m: T,
    threshold: T,
    max_inner: usize,
    step: InnerStep<T>,
    rec: &mut Recorder<'_, T>,
) -> Result<(Vec<T>, bool), SolveError<T>> {
    rec.begin_stage(Some(m), start);
    let mut w = start.to_vec();
    for _ in 0..max_inner {
        let next = inner_update(data, &w, m, step)?;
        rec.record(&next);
        let moved = distance(&next, &w);
        w = next;
        if moved <= threshold {
            rec.end_stage();
            return Ok((w, true));
        }
    }
    rec.end_stage();
    Ok((w, false))
}

/// Scale of the initial misfit: the larger of `|w0|` and the normalized
/// median absolute residual at `w0`.
fn initial_truncation_guess<T: Real>(data: &Dataset<T>, w0: &[T]) -> T {
    let r: Vec<T> = residuals(w0, data)
        .expect("checked by caller")
        .into_iter()
        .map(T::abs)
        .collect();
    let mad = median(&r).unwrap_or_else(T::zero) * T::lit(1.4826);
    let scale = norm(w0).max(mad);
    if scale > T::zero() && scale.is_finite() {
        T::one() / scale
    } else {
        T::one()
    }
}

fn capped_fraction<T: Real>(data: &Dataset<T>, model: &[T], m: T) -> f64 {
    let r = residuals(model, data).expect("checked by caller");
    let capped = r.iter().filter(|&&ri| truncated_weight(ri, m) >= m).count();
    capped as f64 / r.len() as f64
}

/// Halves `M_1` from the residual scale at `w0` until the first stage
/// settles with a majority of points fitted to within `1/M_1`. On success
/// the accepted stage is kept in `rec` and its truncation and end point are
/// returned.
fn auto_first_stage<'a, T: Real>(
    data: &'a Dataset<T>,
    w0: &[T],
    config: &SolverConfig<T>,
    step: InnerStep<T>,
    rec: &mut Recorder<'a, T>,
    reference: Option<&'a [T]>,
) -> Result<Option<(T, Vec<T>)>, SolveError<T>> {
    let mut m = initial_truncation_guess(data, w0);
    let two = T::lit(2.0);
    for _ in 0..AUTO_TRUNCATION_MAX_HALVINGS {
        let mut scratch = Recorder::started_at(data, reference, rec.start());
        let threshold = two / (config.increment * m);
        let (w, settled) = run_stage(data, w0, m, threshold, config.max_inner_iterations, step, &mut scratch)?;
        if settled && capped_fraction(data, &w, m) >= AUTO_TRUNCATION_MIN_CAPPED {
            rec.absorb(scratch);
            return Ok(Some((m, w)));
        }
        m = m / two;
    }
    Ok(None)
}

fn staged<T: Real>(
    kind: SolverKind,
    data: &Dataset<T>,
    config: &SolverConfig<T>,
    step: InnerStep<T>,
) -> Result<SolverTrace<T>, SolveError<T>> {
    config.validate(data.d())?;
    let reference = config.reference_model.as_deref();
    let mut rec = Recorder::new(data, reference);
    let mut w = config.start_model(data.d());
    let eta = config.increment;

    let mut first = None;
    let mut m = config.initial_truncation;
    if config.auto_initial_truncation {
        if let Some((m1, w1)) = auto_first_stage(data, &w, config, step, &mut rec, reference)? {
            m = m1;
            first = Some(w1);
        }
    }

    let mut converged = false;
    for stage in 0..config.max_stages {
        w = match first.take() {
            Some(w1) => w1,
            None => {
                let threshold = T::lit(2.0) / (eta * m);
                let (next, settled) =
                    run_stage(data, &w, m, threshold, config.max_inner_iterations, step, &mut rec)?;
                if !settled {
                    let trace = rec.finish(kind, Some(eta), next, false);
                    return Err(SolveError::NonProgress {
                        stage,
                        iterations: config.max_inner_iterations,
                        trace: Box::new(trace),
                    });
                }
                next
            }
        };
        if T::one() / m <= config.target_accuracy {
            converged = true;
            break;
        }
        m = m * eta;
    }
    Ok(rec.finish(kind, Some(eta), w, converged))
}

/// Stagewise-truncated IRLS.
///
/// Stage `T` runs truncated IRLS at level `M_T` until consecutive iterates
/// are within `2/(eta M_T)`, then the next stage starts from the last
/// iterate with `M_{T+1} = eta M_T`. The run stops once `1/M_T` reaches
/// `target_accuracy` or after `max_stages` stages.
pub fn stir<T: Real>(data: &Dataset<T>, config: &SolverConfig<T>) -> Result<SolverTrace<T>, SolveError<T>> {
    staged(SolverKind::Stir, data, config, InnerStep::Exact { ridge: config.ridge })
}

/// STIR with each weighted least-squares solve replaced by the single
/// gradient step `w - (2C/(M_T n)) X S r`.
pub fn stir_gd<T: Real>(data: &Dataset<T>, config: &SolverConfig<T>) -> Result<SolverTrace<T>, SolveError<T>> {
    config.validate_gradient_step()?;
    staged(
        SolverKind::StirGd,
        data,
        config,
        InnerStep::Gradient {
            step_length: config.step_length,
        },
    )
}

/// Classical IRLS at a fixed truncation level, iterated until consecutive
/// models are within `target_accuracy` or the inner budget runs out.
pub fn irls_fixed<T: Real>(
    data: &Dataset<T>,
    truncation: T,
    config: &SolverConfig<T>,
) -> Result<SolverTrace<T>, SolveError<T>> {
    config.validate(data.d())?;
    if !(truncation > T::zero()) {
        return Err(crate::error::DataError::invalid("truncation", "must be > 0").into());
    }
    let mut rec = Recorder::new(data, config.reference_model.as_deref());
    let (w, converged) = run_stage(
        data,
        &config.start_model(data.d()),
        truncation,
        config.target_accuracy,
        config.max_inner_iterations,
        InnerStep::Exact { ridge: config.ridge },
        &mut rec,
    )?;
    Ok(rec.finish(SolverKind::Irls, None, w, converged))
}
