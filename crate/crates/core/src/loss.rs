//! The Huber family behind truncated IRLS.
//!
//! With `eps = 1/M`, one truncated IRLS step minimizes the quadratic
//! majorizer [`surrogate`] of the empirical scaled Huber loss
//! [`empirical_scaled_huber`], anchored at the current model. The scalar
//! functions are:
//!
//! * `h_eps(x)`   Huber loss, quadratic for `|x| <= eps`, linear beyond;
//! * `f_eps(x)`   scaled Huber, `h_eps(x)/eps + eps/2`, sandwiched between
//!   `|x|` and `|x| + eps/2`;
//! * `g_eps(x;a)` quadratic majorizer of `f_eps`, tangent at the anchor `a`.
//!
//! The surrogate is normalized by `1/n` like the empirical loss, so it
//! touches the loss at its anchor and has the same gradient there.

use serde::{Deserialize, Serialize};

use crate::data::{residuals, truncated_weight, Dataset};
use crate::error::DataError;
use crate::linalg::axpy;
use crate::Real;

/// Huber width `eps`, paired with the truncation level `M = 1/eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledHuberParams<T> {
    epsilon: T,
}

impl<T: Real> ScaledHuberParams<T> {
    pub fn new(epsilon: T) -> Result<Self, DataError> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(DataError::invalid("epsilon", format!("must be finite and > 0, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn from_truncation(m: T) -> Result<Self, DataError> {
        if !(m > T::zero()) || !m.is_finite() {
            return Err(DataError::invalid("truncation", format!("must be finite and > 0, got {m}")));
        }
        Self::new(T::one() / m)
    }

    #[inline]
    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    #[inline]
    pub fn truncation(&self) -> T {
        T::one() / self.epsilon
    }
}

#[inline]
pub fn huber<T: Real>(x: T, epsilon: T) -> T {
    let half = T::lit(0.5);
    let a = x.abs();
    if a <= epsilon {
        half * x * x
    } else {
        epsilon * a - half * epsilon * epsilon
    }
}

#[inline]
pub fn scaled_huber<T: Real>(x: T, epsilon: T) -> T {
    let a = x.abs();
    if a <= epsilon {
        T::lit(0.5) * (x * x / epsilon + epsilon)
    } else {
        a
    }
}

/// `f'_eps`; at the kink the quadratic branch is used (both agree).
#[inline]
pub fn scaled_huber_derivative<T: Real>(x: T, epsilon: T) -> T {
    if x.abs() <= epsilon {
        x / epsilon
    } else {
        x.signum()
    }
}

/// `g_eps(x; a) = (x^2 / max{|a|, eps} + max{|a|, eps}) / 2`
#[inline]
pub fn majorizer<T: Real>(x: T, anchor: T, epsilon: T) -> T {
    let b = anchor.abs().max(epsilon);
    T::lit(0.5) * (x * x / b + b)
}

#[inline]
pub fn majorizer_derivative<T: Real>(x: T, anchor: T, epsilon: T) -> T {
    x / anchor.abs().max(epsilon)
}

fn check_epsilon<T: Real>(epsilon: T) -> Result<(), DataError> {
    if epsilon > T::zero() {
        Ok(())
    } else {
        Err(DataError::invalid("epsilon", format!("must be > 0, got {epsilon}")))
    }
}

/// `l_eps(w) = (1/n) sum_i f_eps(<w, x_i> - y_i)`
pub fn empirical_scaled_huber<T: Real>(
    model: &[T],
    data: &Dataset<T>,
    epsilon: T,
) -> Result<T, DataError> {
    check_epsilon(epsilon)?;
    let r = residuals(model, data)?;
    Ok(mean_of(r.iter().map(|&ri| scaled_huber(ri, epsilon)), r.len()))
}

/// `(1/n) |X^T w - y|_1`, the `eps -> 0` limit of [`empirical_scaled_huber`].
pub fn mean_absolute_residual<T: Real>(model: &[T], data: &Dataset<T>) -> Result<T, DataError> {
    let r = residuals(model, data)?;
    Ok(mean_of(r.iter().map(|ri| ri.abs()), r.len()))
}

/// `(1/n) sum_i g_eps(<w, x_i> - y_i; <w0, x_i> - y_i)`
pub fn surrogate<T: Real>(
    model: &[T],
    anchor_model: &[T],
    data: &Dataset<T>,
    epsilon: T,
) -> Result<T, DataError> {
    check_epsilon(epsilon)?;
    let r = residuals(model, data)?;
    let a = residuals(anchor_model, data)?;
    Ok(mean_of(
        r.iter().zip(&a).map(|(&ri, &ai)| majorizer(ri, ai, epsilon)),
        r.len(),
    ))
}

/// Gradient of [`surrogate`] at its anchor, `(1/n) X S r` with `S` the
/// `1/eps`-truncated weights of the anchor's residuals. Equals the gradient
/// of [`empirical_scaled_huber`] there.
pub fn surrogate_gradient<T: Real>(
    anchor_model: &[T],
    data: &Dataset<T>,
    epsilon: T,
) -> Result<Vec<T>, DataError> {
    check_epsilon(epsilon)?;
    let r = residuals(anchor_model, data)?;
    let m = T::one() / epsilon;
    let mut g = vec![T::zero(); data.d()];
    for (x, &ri) in data.points().zip(&r) {
        axpy(truncated_weight(ri, m) * ri, x, &mut g);
    }
    let inv_n = T::one() / T::lit(data.n() as f64);
    g.iter_mut().for_each(|v| *v = *v * inv_n);
    Ok(g)
}

fn mean_of<T: Real>(values: impl Iterator<Item = T>, n: usize) -> T {
    values.sum::<T>() / T::lit(n as f64)
}
