//! Small dense linear algebra: vector helpers, symmetric matrices, Cholesky
//! factorization and a cyclic Jacobi eigensolver.
//!
//! Everything here works on `d x d` systems with `d` in the tens, so plain
//! loops over contiguous storage are enough.

use crate::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Euclidean distance between two vectors of equal length.
#[inline]
pub fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn scale<T: Real>(alpha: T, x: &[T]) -> Vec<T> {
    x.iter().map(|&v| alpha * v).collect()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Dense symmetric matrix stored in full row-major form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.add_diagonal(T::one());
        m
    }

    /// Builds from row-major entries, symmetrizing as `(A + A^T) / 2`.
    pub fn from_row_major(dim: usize, entries: &[T]) -> Self {
        assert_eq!(entries.len(), dim * dim, "expected {dim}x{dim} entries");
        let mut m = Self::zeros(dim);
        let half = T::lit(0.5);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = half * (entries[i * dim + j] + entries[j * dim + i]);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    /// Sets entry `(i, j)` and its mirror.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn as_row_major(&self) -> &[T] {
        &self.data
    }

    /// `A += weight * x x^T`. Only the lower triangle is touched; call
    /// [`SymMatrix::mirror_lower`] after a batch of updates.
    #[inline]
    pub fn add_outer_lower(&mut self, weight: T, x: &[T]) {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        for i in 0..d {
            let wi = weight * x[i];
            let row = &mut self.data[i * d..i * d + i + 1];
            for (a, &xj) in row.iter_mut().zip(&x[..=i]) {
                *a = *a + wi * xj;
            }
        }
    }

    pub fn mirror_lower(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..i {
                self.data[j * d + i] = self.data[i * d + j];
            }
        }
    }

    /// `A += weight * x x^T` on the full matrix.
    pub fn add_outer(&mut self, weight: T, x: &[T]) {
        self.add_outer_lower(weight, x);
        self.mirror_lower();
    }

    pub fn add_diagonal(&mut self, v: T) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] = self.data[i * self.dim + i] + v;
        }
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_diagonal(&self) -> T {
        (0..self.dim)
            .map(|i| self.get(i, i).abs())
            .fold(T::zero(), T::max)
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.data.chunks_exact(self.dim).map(|row| dot(row, x)).collect()
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[T]) -> T {
        dot(x, &self.mul_vec(x))
    }
}

/// Lower-triangular Cholesky factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    dim: usize,
    lower: Vec<T>,
    min_pivot: T,
}

/// Factorization failure, carrying the offending pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: f64,
    pub index: usize,
}

impl<T: Real> Cholesky<T> {
    /// Factors `a`. A pivot that is non-finite or below
    /// `dim * eps * max|diag|` is reported as a failure, since continuing
    /// past it yields a meaningless solve.
    pub fn factor(a: &SymMatrix<T>) -> Result<Self, NotPositiveDefinite> {
        let d = a.dim();
        let mut l = vec![T::zero(); d * d];
        let floor = T::lit(d.max(1) as f64) * T::epsilon() * a.max_diagonal();
        let mut min_pivot = T::infinity();
        for j in 0..d {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag = diag - l[j * d + k] * l[j * d + k];
            }
            if !diag.is_finite() || diag <= floor {
                return Err(NotPositiveDefinite {
                    pivot: diag.as_f64(),
                    index: j,
                });
            }
            min_pivot = min_pivot.min(diag);
            let ljj = diag.sqrt();
            l[j * d + j] = ljj;
            for i in j + 1..d {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / ljj;
            }
        }
        Ok(Self {
            dim: d,
            lower: l,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Smallest pivot `L_jj^2` met during factorization.
    pub fn min_pivot(&self) -> T {
        self.min_pivot
    }

    /// Solves `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let d = self.dim;
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.lower[i * d + k] * b[k];
            }
            b[i] = s / self.lower[i * d + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        for i in (0..d).rev() {
            let mut s = x[i];
            for k in i + 1..d {
                s = s - self.lower[k * d + i] * x[k];
            }
            x[i] = s / self.lower[i * d + i];
        }
        x
    }

    /// `x^T A^{-1} x`, computed as `|L^{-1} x|^2`.
    pub fn inverse_quadratic_form(&self, x: &[T]) -> T {
        let mut z = x.to_vec();
        self.solve_lower_in_place(&mut z);
        dot(&z, &z)
    }

    /// Applies the factor: `L z`.
    pub fn mul_lower(&self, z: &[T]) -> Vec<T> {
        let d = self.dim;
        (0..d)
            .map(|i| dot(&self.lower[i * d..i * d + i + 1], &z[..=i]))
            .collect()
    }
}

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations.
pub fn symmetric_eigenvalues<T: Real>(a: &SymMatrix<T>) -> Vec<T> {
    let d = a.dim();
    let mut m = a.as_row_major().to_vec();
    let off = |m: &[T]| {
        let mut s = T::zero();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s = s + m[i * d + j] * m[i * d + j];
                }
            }
        }
        s
    };
    let total: T = m.iter().map(|&v| v * v).sum();
    let tol = T::epsilon() * T::epsilon() * total;
    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = m[k * d + p];
                    let akq = m[k * d + q];
                    m[k * d + p] = c * akp - s * akq;
                    m[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = m[p * d + k];
                    let aqk = m[q * d + k];
                    m[p * d + k] = c * apk - s * aqk;
                    m[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..d).map(|i| m[i * d + i]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("NaN eigenvalue"));
    ev
}

/// Median of a slice (average of the two middle values for even length).
/// Returns `None` for an empty slice.
pub fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in median"));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) * T::lit(0.5)
    })
}
