//! Robust linear regression by stagewise-truncated iteratively reweighted
//! least squares (STIR), together with the scaled Huber loss it minimizes,
//! synthetic adversarial data, empirical diagnostics for the constants that
//! govern recovery, and a corrupted linear bandit simulator built on the
//! same solvers.
//!
//! The numerical core (`data`, `loss`, `solve`, `linalg`, `datagen`) is
//! generic over the scalar type through [`Real`]; the Monte-Carlo
//! diagnostics and the bandit simulator work in `f64`. Concrete aliases for
//! the common instantiations live at the bottom of this file.

pub mod analysis;
pub mod bandit;
pub mod data;
pub mod datagen;
pub mod error;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod solve;

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use data::{
    regularized_weights, residuals, truncated_weights, Dataset, GroundTruth, SolverConfig,
    SolverKind, SolverTrace, StageRecord, WeightAssignment,
};
pub use error::{DataError, SolveError};
pub use loss::ScaledHuberParams;

/// Floating point scalar usable by the solvers.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Sum
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every `f64` is representable (possibly
    /// rounded) in the supported types, so this never fails.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal out of range")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type GroundTruth64 = GroundTruth<f64>;
pub type WeightAssignment64 = WeightAssignment<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverTrace64 = SolverTrace<f64>;
pub type SolverTrace32 = SolverTrace<f32>;
pub type SolveError64 = SolveError<f64>;
