//! Small dense vectors in ambient coordinates.
//!
//! Every ambient space in the catalog has dimension at most four except
//! `euclidean:n` and `sphere:n:r` for large `n`, so the storage is inline for
//! up to four components and spills to the heap otherwise.

use std::fmt;
use std::ops::{Add, AddAssign, Deref, DerefMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};
use smallvec::SmallVec;

#[derive(Clone, PartialEq, Default)]
pub struct Vector(SmallVec<[f64; 4]>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(SmallVec::from_elem(0.0, n))
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        Vector(SmallVec::from_slice(xs))
    }

    /// The `i`-th standard basis vector of `R^n` (zero-based).
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v[i] = 1.0;
        v
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Vector) {
        debug_assert_eq!(self.len(), x.len());
        for (s, xi) in self.0.iter_mut().zip(x.iter()) {
            *s += a * xi;
        }
    }

    pub fn scaled(&self, a: f64) -> Vector {
        Vector(self.iter().map(|x| a * x).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(SmallVec::from_vec(v))
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector::from_slice(v)
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(v: [f64; N]) -> Self {
        Vector::from_slice(&v)
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Vector> for &Vector {
            type Output = Vector;
            fn $method(self, rhs: &Vector) -> Vector {
                debug_assert_eq!(self.len(), rhs.len());
                self.iter().zip(rhs.iter()).map(|(a, b)| a $op b).collect()
            }
        }
        impl $trait<Vector> for Vector {
            type Output = Vector;
            fn $method(mut self, rhs: Vector) -> Vector {
                for (a, b) in self.0.iter_mut().zip(rhs.iter()) {
                    *a = *a $op b;
                }
                self
            }
        }
        impl $trait<&Vector> for Vector {
            type Output = Vector;
            fn $method(mut self, rhs: &Vector) -> Vector {
                for (a, b) in self.0.iter_mut().zip(rhs.iter()) {
                    *a = *a $op b;
                }
                self
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);

impl AddAssign<&Vector> for Vector {
    fn add_assign(&mut self, rhs: &Vector) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Vector> for Vector {
    fn sub_assign(&mut self, rhs: &Vector) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<f64> for &Vector {
    type Output = Vector;
    fn mul(self, a: f64) -> Vector {
        self.scaled(a)
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    fn mul(mut self, a: f64) -> Vector {
        for x in self.0.iter_mut() {
            *x *= a;
        }
        self
    }
}

impl Neg for Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self * -1.0
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scaled(-1.0)
    }
}

/// Gram–Schmidt on `candidates`, keeping those with a residual norm above
/// `tol` after orthogonalisation against the already accepted vectors and
/// against `exclude` (assumed orthonormal).
pub fn orthonormalize(candidates: &[Vector], exclude: &[Vector], tol: f64) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    for c in candidates {
        let mut w = c.clone();
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for e in exclude.iter().chain(basis.iter()) {
                let k = w.dot(e);
                w.axpy(-k, e);
            }
        }
        let n = w.norm();
        if n > tol {
            basis.push(w * (1.0 / n));
        }
    }
    basis
}

/// Largest eigenvalue of a small symmetric matrix.
pub fn largest_symmetric_eigenvalue(m: DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Operator norm of the linear map sending an orthonormal basis to `images`,
/// measured with the inner product `inner`.
pub fn operator_norm<F>(images: &[Vector], inner: F) -> f64
where
    F: Fn(&Vector, &Vector) -> f64,
{
    let n = images.len();
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return inner(&images[0], &images[0]).sqrt();
    }
    let gram = DMatrix::from_fn(n, n, |i, j| inner(&images[i], &images[j]));
    largest_symmetric_eigenvalue(gram).max(0.0).sqrt()
}
