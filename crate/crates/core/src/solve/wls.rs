use crate::data::{Dataset, WeightAssignment};
use crate::error::{DataError, SolveError};
use crate::linalg::{axpy, Cholesky, SymMatrix};
use crate::Real;

/// `min_w sum_i s_i (y_i - <x_i, w>)^2 + ridge |w|^2`
#[derive(Debug, Clone, Copy)]
pub struct WlsProblem<'a, T> {
    pub data: &'a Dataset<T>,
    pub weights: &'a [T],
    pub ridge: T,
}

impl<'a, T: Real> WlsProblem<'a, T> {
    pub fn new(data: &'a Dataset<T>, weights: &'a [T]) -> Self {
        Self {
            data,
            weights,
            ridge: T::zero(),
        }
    }

    pub fn from_assignment(data: &'a Dataset<T>, weights: &'a WeightAssignment<T>) -> Self {
        Self::new(data, &weights.weights)
    }

    pub fn with_ridge(self, ridge: T) -> Self {
        Self { ridge, ..self }
    }

    /// `(X S X^T, X S y)`; zero-weight points are skipped.
    pub fn normal_equations(&self) -> Result<(SymMatrix<T>, Vec<T>), DataError> {
        let d = self.data.d();
        if self.weights.len() != self.data.n() {
            return Err(DataError::DimensionMismatch {
                expected: self.data.n(),
                found: self.weights.len(),
            });
        }
        let mut gram = SymMatrix::zeros(d);
        let mut rhs = vec![T::zero(); d];
        for ((x, &y), &s) in self.data.points().zip(self.data.responses()).zip(self.weights) {
            if s == T::zero() {
                continue;
            }
            gram.add_outer_lower(s, x);
            axpy(s * y, x, &mut rhs);
        }
        gram.mirror_lower();
        Ok((gram, rhs))
    }
}

/// Exact minimizer through a Cholesky factorization of the normal
/// equations. Fails with [`SolveError::SingularSystem`] when the weighted
/// Gram matrix plus ridge is not numerically positive definite.
pub fn wls_solve<T: Real>(problem: &WlsProblem<'_, T>) -> Result<Vec<T>, SolveError<T>> {
    let (mut gram, rhs) = problem.normal_equations()?;
    if problem.ridge > T::zero() {
        gram.add_diagonal(problem.ridge);
    }
    let chol = Cholesky::factor(&gram).map_err(|e| SolveError::SingularSystem { pivot: e.pivot })?;
    Ok(chol.solve(&rhs))
}

/// [`wls_solve`], retrying once with an extra ridge of
/// `1e-10 * trace(X S X^T) / d` if the plain factorization fails.
pub fn wls_solve_with_fallback<T: Real>(problem: &WlsProblem<'_, T>) -> Result<Vec<T>, SolveError<T>> {
    let (mut gram, rhs) = problem.normal_equations()?;
    if problem.ridge > T::zero() {
        gram.add_diagonal(problem.ridge);
    }
    match Cholesky::factor(&gram) {
        Ok(chol) => Ok(chol.solve(&rhs)),
        Err(first) => {
            let extra = T::lit(1e-10) * gram.trace() / T::lit(gram.dim() as f64);
            if !(extra > T::zero()) {
                return Err(SolveError::SingularSystem { pivot: first.pivot });
            }
            gram.add_diagonal(extra);
            let chol = Cholesky::factor(&gram)
                .map_err(|e| SolveError::SingularSystem { pivot: e.pivot })?;
            Ok(chol.solve(&rhs))
        }
    }
}
