//! Dominant eigenpair of non-negative operators by power iteration, and the
//! matrix-free operator `S = D(γ)V`.

use crate::error::{Error, Result};
use crate::linalg::{InterferenceOperator, LinearOperator};
use crate::scalar::{norm2, Scalar};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// `S = D(γ)V`, applied as `γ ⊙ (Vx)` without ever forming the product.
pub struct SinrOperator<'a, T, M: ?Sized> {
    pub gamma: &'a [T],
    pub v: &'a M,
}

impl<T: Scalar, M: InterferenceOperator<T> + ?Sized> LinearOperator<T> for SinrOperator<'_, T, M> {
    fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        self.v.apply(x, out);
        for (o, &g) in out.iter_mut().zip(self.gamma) {
            *o *= g;
        }
    }
}

/// `Sᵀ = VᵀD(γ)`, applied as `Vᵀ(γ ⊙ x)`.
pub struct SinrOperatorTransposed<'a, T, M: ?Sized> {
    pub gamma: &'a [T],
    pub v: &'a M,
}

impl<T: Scalar, M: InterferenceOperator<T> + ?Sized> LinearOperator<T> for SinrOperatorTransposed<'_, T, M> {
    fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        let gx: Vec<T> = x.iter().zip(self.gamma).map(|(&a, &g)| a * g).collect();
        self.v.apply_transpose(&gx, out);
    }
}

/// Spectral radius and dominant (Perron) eigenvector of a strictly positive
/// operator.
///
/// Starts from the all-ones vector and stops when the Rayleigh quotient
/// changes by at most `tol` relative. The returned vector is positive with
/// unit 2-norm.
pub fn spectral_radius<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O, tol: T, max_iter: usize) -> Result<(T, Vec<T>)> {
    if !(tol > T::zero()) {
        return Err(Error::Domain("spectral_radius tolerance must be positive".into()));
    }
    let n = op.dim();
    if n == 0 {
        return Err(Error::Dimension { what: "operator", expected: 1, found: 0 });
    }
    let inv = T::one() / T::from_usize_lossy(n).sqrt();
    let mut x = vec![inv; n];
    let mut y = vec![T::zero(); n];
    let mut rq_prev = T::nan();
    for it in 0..max_iter {
        op.apply(&x, &mut y);
        let rq: T = x.iter().zip(&y).map(|(&a, &b)| a * b).sum();
        let ny = norm2(&y);
        if !(ny > T::zero()) || !ny.is_finite() {
            return Err(Error::NotConverged { iterations: it, estimate: rq.as_f64() });
        }
        for (xi, &yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
        if (rq - rq_prev).abs() <= tol * rq.abs() {
            return Ok((rq, x));
        }
        rq_prev = rq;
    }
    Err(Error::NotConverged { iterations: max_iter, estimate: rq_prev.as_f64() })
}
