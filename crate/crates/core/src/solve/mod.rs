//! Solvers: weighted least squares, fixed-truncation IRLS, STIR and its
//! gradient variant STIR-GD, and the OLS / TORRENT / TORRENT-GD baselines.

mod baseline;
mod irls;
mod wls;

use std::time::Instant;

pub use baseline::{ols, torrent, torrent_fit, torrent_gd, TorrentFit};
pub use irls::{irls_fixed, stir, stir_gd, AUTO_TRUNCATION_MAX_HALVINGS};
pub use wls::{wls_solve, wls_solve_with_fallback, WlsProblem};

use crate::data::{Dataset, SolverKind, SolverTrace, StageRecord};
use crate::linalg::distance;
use crate::loss::{empirical_scaled_huber, mean_absolute_residual};
use crate::Real;

/// Collects stage records while a solver runs.
pub(crate) struct Recorder<'a, T> {
    data: &'a Dataset<T>,
    reference: Option<&'a [T]>,
    start: Instant,
    stages: Vec<StageRecord<T>>,
    current: Option<(StageRecord<T>, Instant)>,
}

impl<'a, T: Real> Recorder<'a, T> {
    pub(crate) fn new(data: &'a Dataset<T>, reference: Option<&'a [T]>) -> Self {
        Self::started_at(data, reference, Instant::now())
    }

    pub(crate) fn started_at(data: &'a Dataset<T>, reference: Option<&'a [T]>, start: Instant) -> Self {
        Self {
            data,
            reference,
            start,
            stages: Vec::new(),
            current: None,
        }
    }

    pub(crate) fn start(&self) -> Instant {
        self.start
    }

    pub(crate) fn begin_stage(&mut self, truncation: Option<T>, model: &[T]) {
        debug_assert!(self.current.is_none(), "stage already open");
        let stage = StageRecord {
            truncation,
            iterates: Vec::new(),
            dist_to_gold: Vec::new(),
            objective: Vec::new(),
            elapsed_ns: Vec::new(),
            wall_ns: 0,
        };
        self.current = Some((stage, Instant::now()));
        self.record(model);
    }

    pub(crate) fn record(&mut self, model: &[T]) {
        let (stage, _) = self.current.as_mut().expect("no open stage");
        let objective = match stage.truncation {
            Some(m) => empirical_scaled_huber(model, self.data, T::one() / m),
            None => mean_absolute_residual(model, self.data),
        }
        .expect("model dimension checked by the solver");
        if let Some(reference) = self.reference {
            stage.dist_to_gold.push(distance(model, reference));
        }
        stage.objective.push(objective);
        stage.iterates.push(model.to_vec());
        stage.elapsed_ns.push(self.start.elapsed().as_nanos() as u64);
    }

    pub(crate) fn end_stage(&mut self) {
        let (mut stage, opened) = self.current.take().expect("no open stage");
        stage.wall_ns = opened.elapsed().as_nanos() as u64;
        self.stages.push(stage);
    }

    /// Moves the finished stages of `other` to the end of this recorder.
    pub(crate) fn absorb(&mut self, other: Recorder<'a, T>) {
        debug_assert!(other.current.is_none());
        self.stages.extend(other.stages);
    }

    pub(crate) fn finish(
        mut self,
        solver: SolverKind,
        increment: Option<T>,
        final_model: Vec<T>,
        converged: bool,
    ) -> SolverTrace<T> {
        if self.current.is_some() {
            self.end_stage();
        }
        SolverTrace {
            solver,
            increment,
            stages: self.stages,
            final_model,
            converged,
        }
    }
}
