//! Shared domain types: datasets, ground truth, weights, solver
//! configuration and run traces, plus the residual and weighting
//! primitives every solver is built from.

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::linalg::{distance, dot};
use crate::Real;

/// Covariates stored column-major as a `d x n` matrix (column `i` is the
/// point `x_i`), with one response per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    d: usize,
    n: usize,
    covariates: Vec<T>,
    responses: Vec<T>,
}

impl<T: Real> Dataset<T> {
    /// `covariates` holds the `n` points back to back, each of length `d`.
    pub fn new(d: usize, covariates: Vec<T>, responses: Vec<T>) -> Result<Self, DataError> {
        let n = responses.len();
        if d == 0 || n == 0 {
            return Err(DataError::Empty { n, d });
        }
        if covariates.len() != d * n {
            return Err(DataError::DimensionMismatch {
                expected: d * n,
                found: covariates.len(),
            });
        }
        if let Some(pos) = covariates.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                point: pos / d,
                coord: pos % d,
            });
        }
        Ok(Self {
            d,
            n,
            covariates,
            responses,
        })
    }

    pub fn from_points(points: &[Vec<T>], responses: Vec<T>) -> Result<Self, DataError> {
        let d = points.first().map_or(0, Vec::len);
        if points.len() != responses.len() {
            return Err(DataError::DimensionMismatch {
                expected: points.len(),
                found: responses.len(),
            });
        }
        let mut flat = Vec::with_capacity(d * points.len());
        for p in points {
            if p.len() != d {
                return Err(DataError::DimensionMismatch {
                    expected: d,
                    found: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        Self::new(d, flat, responses)
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.covariates[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, T> {
        self.covariates.chunks_exact(self.d)
    }

    #[inline]
    pub fn responses(&self) -> &[T] {
        &self.responses
    }

    /// The raw column-major covariate block.
    pub fn covariates(&self) -> &[T] {
        &self.covariates
    }

    /// `R_X`, the largest covariate norm.
    pub fn max_covariate_norm(&self) -> T {
        self.points()
            .map(|x| dot(x, x).sqrt())
            .fold(T::zero(), T::max)
    }

    /// The points at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        let mut cov = Vec::with_capacity(indices.len() * self.d);
        let mut resp = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(DataError::invalid(
                    "indices",
                    format!("index {i} out of range for n = {}", self.n),
                ));
            }
            cov.extend_from_slice(self.point(i));
            resp.push(self.responses[i]);
        }
        Self::new(self.d, cov, resp)
    }

    /// Same covariates, new responses.
    pub fn with_responses(&self, responses: Vec<T>) -> Result<Self, DataError> {
        if responses.len() != self.n {
            return Err(DataError::DimensionMismatch {
                expected: self.n,
                found: responses.len(),
            });
        }
        Ok(Self {
            responses,
            ..self.clone()
        })
    }

    /// `X^T w`
    pub fn predict(&self, model: &[T]) -> Result<Vec<T>, DataError> {
        self.check_model(model)?;
        Ok(self.points().map(|x| dot(x, model)).collect())
    }

    pub(crate) fn check_model(&self, model: &[T]) -> Result<(), DataError> {
        if model.len() != self.d {
            return Err(DataError::DimensionMismatch {
                expected: self.d,
                found: model.len(),
            });
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Dataset<U> {
        Dataset {
            d: self.d,
            n: self.n,
            covariates: self.covariates.iter().map(|v| U::lit(v.as_f64())).collect(),
            responses: self.responses.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// What generated a synthetic dataset: `y = X^T w* + b + eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T> {
    pub gold_model: Vec<T>,
    /// Sorted indices of the corrupted points.
    pub corruption_support: Vec<usize>,
    /// Length `n`; zero outside `corruption_support`.
    pub corruption_values: Vec<T>,
    /// Length `n`; all zero when dense noise is disabled.
    pub dense_noise: Vec<T>,
    pub fake_model: Option<Vec<T>>,
    pub alpha: f64,
    pub seed: u64,
}

impl<T: Real> GroundTruth<T> {
    /// Indices not in the corruption support.
    pub fn good_indices(&self) -> Vec<usize> {
        let n = self.corruption_values.len();
        let mut bad = vec![false; n];
        for &i in &self.corruption_support {
            bad[i] = true;
        }
        (0..n).filter(|&i| !bad[i]).collect()
    }

    pub fn is_corrupted(&self, i: usize) -> bool {
        self.corruption_support.binary_search(&i).is_ok()
    }

    pub fn distance_to_gold(&self, model: &[T]) -> T {
        distance(model, &self.gold_model)
    }

    /// `R_W = |w*|`
    pub fn gold_norm(&self) -> T {
        dot(&self.gold_model, &self.gold_model).sqrt()
    }

    /// Checks the bookkeeping against `data`: lengths, support/values
    /// agreement, and `y = X^T w* + b + eps` to a relative tolerance.
    pub fn check_consistency(&self, data: &Dataset<T>, rel_tol: T) -> Result<(), DataError> {
        let n = data.n();
        data.check_model(&self.gold_model)?;
        for len in [self.corruption_values.len(), self.dense_noise.len()] {
            if len != n {
                return Err(DataError::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if !self.corruption_support.windows(2).all(|w| w[0] < w[1]) {
            return Err(DataError::invalid("corruption_support", "not strictly increasing"));
        }
        for (i, &b) in self.corruption_values.iter().enumerate() {
            if b != T::zero() && !self.is_corrupted(i) {
                return Err(DataError::invalid(
                    "corruption_values",
                    format!("nonzero value at clean index {i}"),
                ));
            }
        }
        for (i, x) in data.points().enumerate() {
            let clean = dot(x, &self.gold_model);
            let expect = clean + self.corruption_values[i] + self.dense_noise[i];
            let y = data.responses()[i];
            let scale = T::one().max(clean.abs()).max(y.abs()).max(self.corruption_values[i].abs());
            if (expect - y).abs() > rel_tol * scale {
                return Err(DataError::invalid(
                    "responses",
                    format!("point {i}: y = {y} but X^T w* + b + eps = {expect}"),
                ));
            }
        }
        Ok(())
    }
}

/// Truncated inverse-residual weights `s_i = min{1/|r_i|, M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment<T> {
    pub weights: Vec<T>,
    pub truncation: T,
    pub source_model: Vec<T>,
    pub residuals: Vec<T>,
}

impl<T: Real> WeightAssignment<T> {
    /// Unit weights, as used by ordinary least squares.
    pub fn uniform(n: usize, d: usize) -> Self {
        Self {
            weights: vec![T::one(); n],
            truncation: T::one(),
            source_model: vec![T::zero(); d],
            residuals: Vec::new(),
        }
    }

    /// Number of points whose weight sits at the cap `M`.
    pub fn capped_count(&self) -> usize {
        self.weights.iter().filter(|&&s| s >= self.truncation).count()
    }
}

/// `r_i = <w, x_i> - y_i`
pub fn residuals<T: Real>(model: &[T], data: &Dataset<T>) -> Result<Vec<T>, DataError> {
    data.check_model(model)?;
    Ok(data
        .points()
        .zip(data.responses())
        .map(|(x, &y)| dot(model, x) - y)
        .collect())
}

#[inline]
pub(crate) fn truncated_weight<T: Real>(r: T, m: T) -> T {
    let a = r.abs();
    if a == T::zero() {
        m
    } else {
        (T::one() / a).min(m)
    }
}

/// `s_i = min{1/|r_i|, M}`; a zero residual gets exactly `M`.
pub fn truncated_weights<T: Real>(
    model: &[T],
    data: &Dataset<T>,
    truncation: T,
) -> Result<WeightAssignment<T>, DataError> {
    if !(truncation > T::zero()) {
        return Err(DataError::invalid("truncation", format!("must be > 0, got {truncation}")));
    }
    let r = residuals(model, data)?;
    Ok(WeightAssignment {
        weights: r.iter().map(|&ri| truncated_weight(ri, truncation)).collect(),
        truncation,
        source_model: model.to_vec(),
        residuals: r,
    })
}

/// `s_i = 1/max{|r_i|, delta}`. Coincides bit-for-bit with
/// [`truncated_weights`] at `M = 1/delta` whenever `1/(1/M)` rounds back to `M`.
pub fn regularized_weights<T: Real>(
    model: &[T],
    data: &Dataset<T>,
    delta: T,
) -> Result<WeightAssignment<T>, DataError> {
    if !(delta > T::zero()) {
        return Err(DataError::invalid("delta", format!("must be > 0, got {delta}")));
    }
    let r = residuals(model, data)?;
    Ok(WeightAssignment {
        weights: r.iter().map(|&ri| T::one() / ri.abs().max(delta)).collect(),
        truncation: T::one() / delta,
        source_model: model.to_vec(),
        residuals: r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Stir,
    StirGd,
    Irls,
    Ols,
    Torrent,
    TorrentGd,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Stir,
        SolverKind::StirGd,
        SolverKind::Irls,
        SolverKind::Ols,
        SolverKind::Torrent,
        SolverKind::TorrentGd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Stir => "stir",
            SolverKind::StirGd => "stir-gd",
            SolverKind::Irls => "irls",
            SolverKind::Ols => "ols",
            SolverKind::Torrent => "torrent",
            SolverKind::TorrentGd => "torrent-gd",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DataError::invalid("solver", format!("unknown solver `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig<T> {
    /// `M_1`. Also the fallback when automatic selection finds nothing.
    pub initial_truncation: T,
    /// Pick `M_1` by halving from the residual scale at the initial model.
    pub auto_initial_truncation: bool,
    /// `eta > 1`
    pub increment: T,
    /// Staged solvers stop once `1/M_T` falls below this; single-stage
    /// solvers stop once consecutive iterates are this close.
    pub target_accuracy: T,
    pub max_stages: usize,
    pub max_inner_iterations: usize,
    /// `C` for STIR-GD, the raw step for TORRENT-GD.
    pub step_length: T,
    /// Defaults to the zero vector.
    pub initial_model: Option<Vec<T>>,
    /// Diagonal regularizer added to every weighted normal system.
    pub ridge: T,
    /// When set, traces record the distance of every iterate to it.
    pub reference_model: Option<Vec<T>>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            initial_truncation: T::one(),
            auto_initial_truncation: false,
            increment: T::lit(2.0),
            target_accuracy: T::lit(1e-6),
            max_stages: 100,
            max_inner_iterations: 50,
            step_length: T::lit(0.9),
            initial_model: None,
            ridge: T::zero(),
            reference_model: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self, d: usize) -> Result<(), DataError> {
        if !(self.initial_truncation > T::zero()) || !self.initial_truncation.is_finite() {
            return Err(DataError::invalid("initial_truncation", "must be finite and > 0"));
        }
        if !(self.increment > T::one()) || !self.increment.is_finite() {
            return Err(DataError::invalid("increment", "must be finite and > 1"));
        }
        if !(self.target_accuracy > T::zero()) {
            return Err(DataError::invalid("target_accuracy", "must be > 0"));
        }
        if self.max_stages == 0 || self.max_inner_iterations == 0 {
            return Err(DataError::invalid("iteration limits", "must be positive"));
        }
        if !(self.step_length > T::zero()) {
            return Err(DataError::invalid("step_length", "must be > 0"));
        }
        if !(self.ridge >= T::zero()) {
            return Err(DataError::invalid("ridge", "must be >= 0"));
        }
        for (name, m) in [
            ("initial_model", &self.initial_model),
            ("reference_model", &self.reference_model),
        ] {
            if let Some(m) = m {
                if m.len() != d {
                    return Err(DataError::invalid(
                        name,
                        format!("length {} but data has d = {d}", m.len()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// STIR-GD additionally needs `C <= 0.99`.
    pub fn validate_gradient_step(&self) -> Result<(), DataError> {
        if self.step_length > T::lit(0.99) {
            return Err(DataError::invalid("step_length", "STIR-GD requires C <= 0.99"));
        }
        Ok(())
    }

    pub fn start_model(&self, d: usize) -> Vec<T> {
        self.initial_model.clone().unwrap_or_else(|| vec![T::zero(); d])
    }
}

/// One stage of a run: a fixed truncation level and the iterates visited
/// under it. `iterates[0]` is the stage's starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord<T> {
    /// `None` for solvers without a truncation level.
    pub truncation: Option<T>,
    pub iterates: Vec<Vec<T>>,
    /// Per iterate; empty when no reference model was given.
    pub dist_to_gold: Vec<T>,
    /// Per iterate: `l_{1/M}` for truncated solvers, mean absolute residual
    /// otherwise.
    pub objective: Vec<T>,
    /// Per iterate, nanoseconds since the solver started.
    pub elapsed_ns: Vec<u64>,
    pub wall_ns: u64,
}

impl<T: Real> StageRecord<T> {
    pub fn inner_iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    /// Distance between the last two iterates.
    pub fn exit_step(&self) -> Option<T> {
        let k = self.iterates.len();
        (k >= 2).then(|| distance(&self.iterates[k - 1], &self.iterates[k - 2]))
    }

    pub fn first(&self) -> &[T] {
        &self.iterates[0]
    }

    pub fn last(&self) -> &[T] {
        self.iterates.last().expect("stage without iterates")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace<T> {
    pub solver: SolverKind,
    /// `eta` for staged solvers.
    pub increment: Option<T>,
    pub stages: Vec<StageRecord<T>>,
    pub final_model: Vec<T>,
    pub converged: bool,
}

impl<T: Real> SolverTrace<T> {
    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(StageRecord::inner_iterations).sum()
    }

    pub fn final_truncation(&self) -> Option<T> {
        self.stages.last().and_then(|s| s.truncation)
    }

    pub fn wall_ns(&self) -> u64 {
        self.stages
            .last()
            .and_then(|s| s.elapsed_ns.last().copied())
            .unwrap_or(0)
    }

    /// Elapsed time at the first iterate within `tol` of the reference
    /// model, if the trace recorded distances and ever got there.
    pub fn time_to_accuracy(&self, tol: T) -> Option<u64> {
        self.stages.iter().find_map(|s| {
            s.dist_to_gold
                .iter()
                .zip(&s.elapsed_ns)
                .find(|(&d, _)| d <= tol)
                .map(|(_, &t)| t)
        })
    }
}
