//! Interference network model: raw link gains, the normalized problem the
//! solver works on, and SINR arithmetic.
//!
//! With direct gains `h`, cross gains `H` and receiver noise `η`, the solver
//! sees `V = D(h)⁻¹H` and `ζ = D(h)⁻¹η`. For a power vector `p` the
//! normalized interference is `q = Vp + ζ` and the SINR is `γ = p / q`.

use crate::error::{Error, Result};
use crate::linalg::{InterferenceOperator, Matrix};
use crate::scalar::Scalar;

/// Physical channel: direct gains, cross gains and receiver noise (linear units).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains<T> {
    h: Vec<T>,
    cross: Matrix<T>,
    eta: Vec<T>,
}

impl<T: Scalar> LinkGains<T> {
    /// `cross[(i, j)]` is the gain from transmitter `j` to the receiver of link `i`.
    pub fn new(h: Vec<T>, cross: Matrix<T>, eta: Vec<T>) -> Result<Self> {
        let n = h.len();
        if !cross.is_square() || cross.rows() != n {
            return Err(Error::Dimension { what: "cross gain matrix", expected: n, found: cross.rows() });
        }
        if eta.len() != n {
            return Err(Error::Dimension { what: "noise vector", expected: n, found: eta.len() });
        }
        if let Some(i) = h.iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::NonPositive { what: "direct gain h", index: vec![i], value: h[i].as_f64() });
        }
        for i in 0..n {
            for j in 0..n {
                let x = cross[(i, j)];
                if !(x > T::zero()) || !x.is_finite() {
                    return Err(Error::NonPositive { what: "cross gain H", index: vec![i, j], value: x.as_f64() });
                }
            }
        }
        if let Some(i) = eta.iter().position(|&x| !(x >= T::zero())) {
            return Err(Error::Negative { what: "noise eta", index: i, value: eta[i].as_f64() });
        }
        Ok(Self { h, cross, eta })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn h(&self) -> &[T] {
        &self.h
    }

    pub fn cross(&self) -> &Matrix<T> {
        &self.cross
    }

    pub fn eta(&self) -> &[T] {
        &self.eta
    }
}

/// Per-link power box. `p_max = None` is the interference-limited (unbounded) mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBounds<T> {
    pub p_min: Vec<T>,
    pub p_max: Option<Vec<T>>,
}

impl<T: Scalar> PowerBounds<T> {
    pub fn unbounded(n: usize) -> Self {
        Self { p_min: vec![T::lit(crate::POWER_FLOOR_W); n], p_max: None }
    }

    /// `[ε_p, p_max]` for every link.
    pub fn max_only(p_max: Vec<T>) -> Self {
        Self { p_min: vec![T::lit(crate::POWER_FLOOR_W); p_max.len()], p_max: Some(p_max) }
    }

    pub fn boxed(p_min: Vec<T>, p_max: Vec<T>) -> Self {
        Self { p_min, p_max: Some(p_max) }
    }

    pub fn uniform_max(n: usize, p_max: T) -> Self {
        Self::max_only(vec![p_max; n])
    }
}

/// The solver's view of a network: `V`, `ζ` and the power box.
#[derive(Debug, Clone)]
pub struct NormalizedProblem<T, M = Matrix<T>> {
    v: M,
    zeta: Vec<T>,
    p_min: Vec<T>,
    p_max: Option<Vec<T>>,
}

impl<T: Scalar> NormalizedProblem<T> {
    /// `V = D(h)⁻¹H`, `ζ = D(h)⁻¹η`; bounds are copied through.
    pub fn normalize(gains: &LinkGains<T>, bounds: PowerBounds<T>) -> Result<Self> {
        let n = gains.len();
        let v = Matrix::from_fn(n, n, |i, j| gains.cross[(i, j)] / gains.h[i]);
        let zeta = gains.eta.iter().zip(&gains.h).map(|(&e, &h)| e / h).collect();
        Self::new(v, zeta, bounds)
    }
}

impl<T: Scalar, M: InterferenceOperator<T>> NormalizedProblem<T, M> {
    /// Validates and builds a problem.
    ///
    /// `V` must be non-negative with a strictly positive diagonal. Zero
    /// off-diagonal entries (block-structured problems such as the two-slot
    /// relay model) are accepted only when every `ζᵢ > 0`; the all-zero-noise
    /// mode requires a strictly positive `V` and unbounded powers.
    pub fn new(v: M, zeta: Vec<T>, bounds: PowerBounds<T>) -> Result<Self> {
        let n = v.dim();
        if zeta.len() != n {
            return Err(Error::Dimension { what: "zeta", expected: n, found: zeta.len() });
        }
        if bounds.p_min.len() != n {
            return Err(Error::Dimension { what: "p_min", expected: n, found: bounds.p_min.len() });
        }
        if let Some(pm) = &bounds.p_max {
            if pm.len() != n {
                return Err(Error::Dimension { what: "p_max", expected: n, found: pm.len() });
            }
        }
        if let Some(i) = zeta.iter().position(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(Error::Negative { what: "zeta", index: i, value: zeta[i].as_f64() });
        }
        let mut has_zero_coupling = false;
        for i in 0..n {
            for j in 0..n {
                let x = v.entry(i, j);
                if !x.is_finite() || x < T::zero() || (i == j && x == T::zero()) {
                    return Err(Error::NonPositive { what: "normalized interference V", index: vec![i, j], value: x.as_f64() });
                }
                has_zero_coupling |= x == T::zero();
            }
        }
        let noiseless = zeta.iter().all(|&z| z == T::zero());
        if has_zero_coupling && zeta.iter().any(|&z| z == T::zero()) {
            return Err(Error::Domain(
                "V has zero entries, which requires strictly positive noise on every link".into(),
            ));
        }
        match (&bounds.p_max, noiseless) {
            (Some(_), true) => {
                return Err(Error::Bounds {
                    index: 0,
                    reason: "zero noise is only permitted in the unbounded (interference-limited) mode".into(),
                })
            }
            (None, false) => {
                return Err(Error::Bounds {
                    index: 0,
                    reason: "unbounded powers require zero noise; with noise the optimum is at infinity".into(),
                })
            }
            _ => {}
        }
        for (i, &lo) in bounds.p_min.iter().enumerate() {
            if !(lo >= T::zero()) {
                return Err(Error::Bounds { index: i, reason: format!("p_min = {lo} is negative") });
            }
            if let Some(pm) = &bounds.p_max {
                if !(pm[i] > T::zero()) || lo > pm[i] {
                    return Err(Error::Bounds { index: i, reason: format!("need 0 < p_min <= p_max, got [{lo}, {}]", pm[i]) });
                }
            }
        }
        Ok(Self { v, zeta, p_min: bounds.p_min, p_max: bounds.p_max })
    }

    pub fn dim(&self) -> usize {
        self.zeta.len()
    }

    pub fn v(&self) -> &M {
        &self.v
    }

    pub fn zeta(&self) -> &[T] {
        &self.zeta
    }

    pub fn p_min(&self) -> &[T] {
        &self.p_min
    }

    pub fn p_max(&self) -> Option<&[T]> {
        self.p_max.as_deref()
    }

    pub fn bounds(&self) -> PowerBounds<T> {
        PowerBounds { p_min: self.p_min.clone(), p_max: self.p_max.clone() }
    }

    /// True in the noiseless, unbounded mode.
    pub fn is_interference_limited(&self) -> bool {
        self.p_max.is_none()
    }

    /// Swaps the interference operator, e.g. for an instrumented wrapper.
    pub fn map_operator<M2: InterferenceOperator<T>>(self, f: impl FnOnce(M) -> M2) -> NormalizedProblem<T, M2> {
        NormalizedProblem { v: f(self.v), zeta: self.zeta, p_min: self.p_min, p_max: self.p_max }
    }

    /// Returns a copy with the bounds replaced, re-validated.
    pub fn with_bounds(&self, bounds: PowerBounds<T>) -> Result<Self>
    where
        M: Clone,
    {
        Self::new(self.v.clone(), self.zeta.clone(), bounds)
    }

    /// `q = Vp + ζ`, `γ = p / q`. One `V` product.
    pub fn interference_and_sinr(&self, p: &[T]) -> Result<SinrState<T>> {
        if p.len() != self.dim() {
            return Err(Error::Dimension { what: "power vector", expected: self.dim(), found: p.len() });
        }
        if let Some(i) = p.iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::Domain(format!("power must be strictly positive, p[{i}] = {}", p[i])));
        }
        let mut q = vec![T::zero(); p.len()];
        self.v.apply(p, &mut q);
        for (qi, &z) in q.iter_mut().zip(&self.zeta) {
            *qi += z;
        }
        Ok(SinrState::from_pq(p.to_vec(), q))
    }
}

/// Powers, normalized interference and SINR at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrState<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
    pub gamma: Vec<T>,
}

impl<T: Scalar> SinrState<T> {
    pub fn from_pq(p: Vec<T>, q: Vec<T>) -> Self {
        let gamma = p.iter().zip(&q).map(|(&a, &b)| a / b).collect();
        Self { p, q, gamma }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Scales the state of a noiseless problem: `q` scales with `p`, `γ` is unchanged.
    pub(crate) fn scaled_noiseless(&self, c: T) -> Self {
        Self {
            p: self.p.iter().map(|&x| x * c).collect(),
            q: self.q.iter().map(|&x| x * c).collect(),
            gamma: self.gamma.clone(),
        }
    }
}
