//! Utility models `U(γ)` with hand-derived gradients and Hessians, and the
//! diagnostics the damping bound depends on.
//!
//! A model is admissible when it is increasing and concave in `log γ`. The
//! curvature bound `B` caps the spectral radius of
//! `M_U = D(γ/∇U)^{1/2} ∇²U D(γ/∇U)^{1/2}` and sets the largest safe damping
//! `θ_max = 1/(2B − 1)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Scalar;

/// Below this `γ/Γ` the rate-based models clamp their argument: the fourth
/// root of the smallest positive normal number (about 1.5e-77 in `f64`,
/// 3.3e-10 in `f32`), so the second derivative `~1/s²` stays finite.
pub fn rate_domain_floor<T: Scalar>() -> T {
    T::min_positive_value().sqrt().sqrt()
}
/// Largest eigenvalue of the log-concavity matrix tolerated as round-off.
pub const LOG_CONCAVITY_TOL: f64 = 1e-9;

pub trait Utility<T: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;

    fn value(&self, gamma: &[T]) -> Result<T>;

    /// `∇_γ U`.
    fn gradient(&self, gamma: &[T]) -> Result<Vec<T>>;

    /// `∇²_γ U`.
    fn hessian(&self, gamma: &[T]) -> Result<Matrix<T>>;

    /// A proven bound on `ρ[M_U]`, when one is known for the whole family.
    fn analytic_b(&self) -> Option<T> {
        None
    }

    /// For separable (NUM) utilities, `∂U/∂γᵢ` computed from `γᵢ` alone.
    fn separable_derivative(&self, _i: usize, _gamma_i: T) -> Option<T> {
        None
    }

    fn is_separable(&self) -> bool {
        false
    }

    /// `(∇_γ U)ᵢ` given the full SINR vector.
    fn gradient_component(&self, i: usize, gamma: &[T]) -> Result<T> {
        Ok(self.gradient(gamma)?[i])
    }

    /// Per-coordinate SINR range used when sampling for `B`.
    fn sample_range(&self) -> (T, T) {
        (T::lit(1e-3), T::lit(1e3))
    }

    /// Fixed number of links the model is defined for, if any.
    fn required_dim(&self) -> Option<usize> {
        None
    }
}

fn check_gamma<T: Scalar>(gamma: &[T], required: Option<usize>) -> Result<()> {
    if let Some(n) = required {
        if gamma.len() != n {
            return Err(Error::Dimension { what: "SINR vector", expected: n, found: gamma.len() });
        }
    }
    if let Some(i) = gamma.iter().position(|&g| !(g > T::zero()) || !g.is_finite()) {
        return Err(Error::Domain(format!("SINR must be positive and finite, gamma[{i}] = {}", gamma[i])));
    }
    Ok(())
}

fn weight<T: Scalar>(w: &Option<Vec<T>>, i: usize) -> T {
    w.as_ref().map_or_else(T::one, |w| w[i])
}

fn check_weights<T: Scalar>(w: &Option<Vec<T>>, n: usize) -> Result<()> {
    if let Some(w) = w {
        if w.len() != n {
            return Err(Error::Dimension { what: "utility weights", expected: n, found: w.len() });
        }
    }
    Ok(())
}

fn validate_weights<T: Scalar>(w: &Option<Vec<T>>) -> Result<()> {
    if let Some(w) = w {
        if let Some(i) = w.iter().position(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(Error::Negative { what: "utility weight", index: i, value: w[i].as_f64() });
        }
    }
    Ok(())
}

/// `U(γ) = Σ wᵢ ln γᵢ`.
#[derive(Debug, Clone, Default)]
pub struct SumLogSinr<T> {
    weights: Option<Vec<T>>,
}

impl<T: Scalar> SumLogSinr<T> {
    pub fn new() -> Self {
        Self { weights: None }
    }

    pub fn weighted(weights: Vec<T>) -> Result<Self> {
        let w = Some(weights);
        validate_weights(&w)?;
        Ok(Self { weights: w })
    }
}

impl<T: Scalar> Utility<T> for SumLogSinr<T> {
    fn name(&self) -> &'static str {
        "sum_log_sinr"
    }

    fn value(&self, gamma: &[T]) -> Result<T> {
        check_gamma(gamma, None)?;
        check_weights(&self.weights, gamma.len())?;
        Ok(gamma.iter().enumerate().map(|(i, &g)| weight(&self.weights, i) * g.ln()).sum())
    }

    fn gradient(&self, gamma: &[T]) -> Result<Vec<T>> {
        check_gamma(gamma, None)?;
        check_weights(&self.weights, gamma.len())?;
        Ok(gamma.iter().enumerate().map(|(i, &g)| weight(&self.weights, i) / g).collect())
    }

    fn hessian(&self, gamma: &[T]) -> Result<Matrix<T>> {
        check_gamma(gamma, None)?;
        check_weights(&self.weights, gamma.len())?;
        let d: Vec<T> = gamma.iter().enumerate().map(|(i, &g)| -weight(&self.weights, i) / (g * g)).collect();
        Ok(Matrix::from_diag(&d))
    }

    fn analytic_b(&self) -> Option<T> {
        Some(T::one())
    }

    fn separable_derivative(&self, i: usize, gamma_i: T) -> Option<T> {
        Some(weight(&self.weights, i) / gamma_i)
    }

    fn is_separable(&self) -> bool {
        true
    }
}

/// Log of the per-link rate: `U(γ) = Σ wᵢ ln log₂(1 + γᵢ/Γ)` with SINR gap `Γ ≥ 1`.
#[derive(Debug, Clone)]
pub struct LogRate<T> {
    gap: T,
    weights: Option<Vec<T>>,
}

/// Value, first and second derivative of `m ↦ ln(c · ln(1 + m/Γ))`.
///
/// The argument is clamped to `m/Γ ≥ rate_domain_floor()`; the flag reports
/// whether the clamp was hit.
fn log_rate_terms<T: Scalar>(m: T, gap: T, log_scale: T) -> (T, T, T, bool) {
    let floor = rate_domain_floor::<T>();
    let s = m / gap;
    let (s, clamped) = if s < floor { (floor, true) } else { (s, false) };
    let l = s.ln_1p();
    let x = gap * (T::one() + s);
    let value = (l * log_scale).ln();
    let d1 = T::one() / (l * x);
    let d2 = -(T::one() + l) / (l * l * x * x);
    (value, d1, d2, clamped)
}

fn warn_clamped(model: &str, index: usize) {
    log::warn!("{model}: SINR at index {index} below the rate domain floor; value clamped");
}

impl<T: Scalar> LogRate<T> {
    pub fn new(gap: T) -> Result<Self> {
        if !(gap >= T::one()) || !gap.is_finite() {
            return Err(Error::Domain(format!("SINR gap must be >= 1, got {gap}")));
        }
        Ok(Self { gap, weights: None })
    }

    pub fn from_gap_db(gap_db: T) -> Result<Self> {
        Self::new(T::lit(10.0).powf(gap_db / T::lit(10.0)))
    }

    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        let w = Some(weights);
        validate_weights(&w)?;
        self.weights = w;
        Ok(self)
    }

    pub fn gap(&self) -> T {
        self.gap
    }

    fn terms(&self, i: usize, g: T) -> (T, T, T) {
        let (v, d1, d2, clamped) = log_rate_terms(g, self.gap, T::one() / T::lit(std::f64::consts::LN_2));
        if clamped {
            warn_clamped("log_rate", i);
        }
        let w = weight(&self.weights, i);
        (w * v, w * d1, w * d2)
    }
}

impl<T: Scalar> Utility<T> for LogRate<T> {
    fn name(&self) -> &'static str {
        "log_rate"
    }

    fn value(&self, gamma: &[T]) -> Result<T> {
        check_gamma(gamma, None)?;
        check_weights(&self.weights, gamma.len())?;
        Ok(gamma.iter().enumerate().map(|(i, &g)| self.terms(i, g).0).sum())
    }

    fn gradient(&self, gamma: &[T]) -> Result<Vec<T>> {
        check_gamma(gamma, None)?;
        check_weights(&self.weights, gamma.len())?;
        Ok(gamma.iter().enumerate().map(|(i, &g)| self.terms(i, g).1).collect())
    }

    fn hessian(&self, gamma: &[T]) -> Result<Matrix<T>> {
        check_gamma(gamma, None)?;
        check_weights(&self.weights, gamma.len())?;
        let d: Vec<T> = gamma.iter().enumerate().map(|(i, &g)| self.terms(i, g).2).collect();
        Ok(Matrix::from_diag(&d))
    }

    fn analytic_b(&self) -> Option<T> {
        Some(T::lit(2.0))
    }

    fn separable_derivative(&self, i: usize, gamma_i: T) -> Option<T> {
        Some(self.terms(i, gamma_i).1)
    }

    fn is_separable(&self) -> bool {
        true
    }
}

/// `U(γ) = Σ γᵢ`. Increasing but not concave in `log γ`; used as a negative
/// control for the log-concavity diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct SumSinr;

impl<T: Scalar> Utility<T> for SumSinr {
    fn name(&self) -> &'static str {
        "sum_sinr"
    }

    fn value(&self, gamma: &[T]) -> Result<T> {
        check_gamma(gamma, None)?;
        Ok(gamma.iter().copied().sum())
    }

    fn gradient(&self, gamma: &[T]) -> Result<Vec<T>> {
        check_gamma(gamma, None)?;
        Ok(vec![T::one(); gamma.len()])
    }

    fn hessian(&self, gamma: &[T]) -> Result<Matrix<T>> {
        check_gamma(gamma, None)?;
        Ok(Matrix::zeros(gamma.len(), gamma.len()))
    }

    fn separable_derivative(&self, _i: usize, _gamma_i: T) -> Option<T> {
        Some(T::one())
    }

    fn is_separable(&self) -> bool {
        true
    }
}

/// `−(1/k) ln(e^{−kx} + e^{−ky})`, evaluated as `min − ln(1 + e^{−k|x−y|})/k`
/// so that large `k|x|` cannot overflow.
pub fn smooth_min<T: Scalar>(x: T, y: T, k: T) -> T {
    let lo = x.min(y);
    lo - (-(k * (x - y).abs())).exp().ln_1p() / k
}

/// Smooth-min value with its first and second partial derivatives:
/// `(m, m_x, m_y, m_xx, m_xy, m_yy)`.
fn smooth_min_derivatives<T: Scalar>(x: T, y: T, k: T) -> [T; 6] {
    let m = smooth_min(x, y, k);
    // weight on x: e^{−kx} / (e^{−kx} + e^{−ky}), computed without overflow
    // floored so the dominated branch keeps a strictly positive derivative
    let e = (-(k * (x - y).abs())).exp().max(T::min_positive_value().sqrt());
    let (wx, wy) = if x <= y { (T::one() / (T::one() + e), e / (T::one() + e)) } else { (e / (T::one() + e), T::one() / (T::one() + e)) };
    let c = k * wx * wy;
    [m, wx, wy, -c, c, -c]
}

/// Harmonic mean `2/(1/x + 1/y)` with its first and second partials.
fn harmonic_mean_derivatives<T: Scalar>(x: T, y: T) -> [T; 6] {
    let two = T::lit(2.0);
    let s = x + y;
    let m = two * x * y / s;
    let s2 = s * s;
    let s3 = s2 * s;
    [m, two * y * y / s2, two * x * x / s2, -T::lit(4.0) * y * y / s3, T::lit(4.0) * x * y / s3, -T::lit(4.0) * x * x / s3]
}

/// Result of a rate evaluation, in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate<T> {
    pub bits: T,
    /// Set when a smooth-min argument is at or below `1/k`, where the
    /// smoothed rate is no longer guaranteed log-concave.
    pub domain_warning: bool,
}

/// Decode-and-forward rate `½ log₂(1 + min(γ_wr, γ_rb)/Γ)`. `k = None` uses
/// the exact minimum, `Some(k)` the smooth approximation.
pub fn relay_rate<T: Scalar>(gamma_wr: T, gamma_rb: T, gap: T, k: Option<T>) -> Rate<T> {
    let (m, warn) = match k {
        None => (gamma_wr.min(gamma_rb), false),
        Some(k) => (smooth_min(gamma_wr, gamma_rb, k), gamma_wr.min(gamma_rb) <= T::one() / k),
    };
    Rate { bits: T::lit(0.5) * (m / gap).ln_1p() / T::lit(std::f64::consts::LN_2), domain_warning: warn }
}

/// Upper bound on the two-slot direct rate: `log₂(1 + γ'/Γ)` with `γ'` the
/// harmonic mean of the two per-slot SINRs.
pub fn direct_rate_bound<T: Scalar>(gamma_slot1: T, gamma_slot2: T, gap: T) -> Rate<T> {
    let hm = T::lit(2.0) / (T::one() / gamma_slot1 + T::one() / gamma_slot2);
    Rate { bits: (hm / gap).ln_1p() / T::lit(std::f64::consts::LN_2), domain_warning: false }
}

/// How one logical user's rate is formed from two coordinates of the
/// stacked SINR vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayRoute {
    /// Transmits in both slots; rate bounded through the harmonic-mean SINR.
    Direct { slot1: usize, slot2: usize },
    /// Source→relay in slot 1, relay→base station in slot 2.
    Relayed { access: usize, forward: usize },
}

impl RelayRoute {
    fn indices(&self) -> (usize, usize) {
        match *self {
            RelayRoute::Direct { slot1, slot2 } => (slot1, slot2),
            RelayRoute::Relayed { access, forward } => (access, forward),
        }
    }
}

/// Sum of log-rates over users of a two-slot relay network. The Hessian
/// couples the two SINRs of every user and is not diagonal.
#[derive(Debug, Clone)]
pub struct RelayUtility<T> {
    routes: Vec<RelayRoute>,
    dim: usize,
    gap: T,
    k: T,
    weights: Option<Vec<T>>,
}

impl<T: Scalar> RelayUtility<T> {
    /// `dim` is the length of the stacked SINR vector; every coordinate must
    /// be used by exactly one route.
    pub fn new(routes: Vec<RelayRoute>, dim: usize, gap: T, k: T) -> Result<Self> {
        if !(k > T::zero()) {
            return Err(Error::Domain(format!("smooth-min sharpness must be positive, got {k}")));
        }
        if !(gap >= T::one()) {
            return Err(Error::Domain(format!("decoding loss must be >= 1, got {gap}")));
        }
        let mut used = vec![false; dim];
        for r in &routes {
            let (a, b) = r.indices();
            for idx in [a, b] {
                if idx >= dim {
                    return Err(Error::Config(format!("route index {idx} outside stacked dimension {dim}")));
                }
                if std::mem::replace(&mut used[idx], true) {
                    return Err(Error::Config(format!("stacked coordinate {idx} used by more than one route")));
                }
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Config(format!("stacked coordinate {i} is not used by any route")));
        }
        Ok(Self { routes, dim, gap, k, weights: None })
    }

    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        if weights.len() != self.routes.len() {
            return Err(Error::Dimension { what: "relay weights", expected: self.routes.len(), found: weights.len() });
        }
        let w = Some(weights);
        validate_weights(&w)?;
        self.weights = w;
        Ok(self)
    }

    pub fn routes(&self) -> &[RelayRoute] {
        &self.routes
    }

    pub fn smooth_min_k(&self) -> T {
        self.k
    }

    pub fn gap(&self) -> T {
        self.gap
    }

    /// Per-user rates in bits with the exact minimum (reporting only).
    pub fn exact_rates(&self, gamma: &[T]) -> Vec<T> {
        self.routes
            .iter()
            .map(|r| match *r {
                RelayRoute::Direct { slot1, slot2 } => direct_rate_bound(gamma[slot1], gamma[slot2], self.gap).bits,
                RelayRoute::Relayed { access, forward } => relay_rate(gamma[access], gamma[forward], self.gap, None).bits,
            })
            .collect()
    }

    /// Indices of relayed users whose smooth-min arguments fall at or below `1/k`.
    pub fn domain_warnings(&self, gamma: &[T]) -> Vec<usize> {
        self.routes
            .iter()
            .enumerate()
            .filter_map(|(u, r)| match *r {
                RelayRoute::Relayed { access, forward } if gamma[access].min(gamma[forward]) <= T::one() / self.k => Some(u),
                _ => None,
            })
            .collect()
    }

    /// `(value, ∂a, ∂b, ∂aa, ∂ab, ∂bb)` of user `u`'s weighted log-rate.
    fn user_terms(&self, u: usize, gamma: &[T]) -> [T; 6] {
        let route = self.routes[u];
        let (a, b) = route.indices();
        let (scale, d) = match route {
            RelayRoute::Direct { .. } => (T::one(), harmonic_mean_derivatives(gamma[a], gamma[b])),
            RelayRoute::Relayed { .. } => (T::lit(0.5), smooth_min_derivatives(gamma[a], gamma[b], self.k)),
        };
        let [m, ma, mb, maa, mab, mbb] = d;
        let (v, g1, g2, clamped) = log_rate_terms(m, self.gap, scale / T::lit(std::f64::consts::LN_2));
        if clamped {
            warn_clamped("relay", u);
        }
        let w = weight(&self.weights, u);
        [
            w * v,
            w * g1 * ma,
            w * g1 * mb,
            w * (g2 * ma * ma + g1 * maa),
            w * (g2 * ma * mb + g1 * mab),
            w * (g2 * mb * mb + g1 * mbb),
        ]
    }
}

impl<T: Scalar> Utility<T> for RelayUtility<T> {
    fn name(&self) -> &'static str {
        "relay"
    }

    fn value(&self, gamma: &[T]) -> Result<T> {
        check_gamma(gamma, Some(self.dim))?;
        Ok((0..self.routes.len()).map(|u| self.user_terms(u, gamma)[0]).sum())
    }

    fn gradient(&self, gamma: &[T]) -> Result<Vec<T>> {
        check_gamma(gamma, Some(self.dim))?;
        let mut g = vec![T::zero(); self.dim];
        for (u, r) in self.routes.iter().enumerate() {
            let (a, b) = r.indices();
            let t = self.user_terms(u, gamma);
            g[a] = t[1];
            g[b] = t[2];
        }
        Ok(g)
    }

    fn gradient_component(&self, i: usize, gamma: &[T]) -> Result<T> {
        check_gamma(gamma, Some(self.dim))?;
        let (u, r) = self
            .routes
            .iter()
            .enumerate()
            .find(|(_, r)| r.indices().0 == i || r.indices().1 == i)
            .ok_or_else(|| Error::Dimension { what: "relay coordinate", expected: self.dim, found: i })?;
        let t = self.user_terms(u, gamma);
        Ok(if r.indices().0 == i { t[1] } else { t[2] })
    }

    fn hessian(&self, gamma: &[T]) -> Result<Matrix<T>> {
        check_gamma(gamma, Some(self.dim))?;
        let mut h = Matrix::zeros(self.dim, self.dim);
        for (u, r) in self.routes.iter().enumerate() {
            let (a, b) = r.indices();
            let t = self.user_terms(u, gamma);
            h[(a, a)] = t[3];
            h[(a, b)] = t[4];
            h[(b, a)] = t[4];
            h[(b, b)] = t[5];
        }
        Ok(h)
    }

    fn sample_range(&self) -> (T, T) {
        (T::one() / self.k, T::lit(1e3))
    }

    fn required_dim(&self) -> Option<usize> {
        Some(self.dim)
    }
}

fn max_eigenvalue<T: Scalar>(m: &Matrix<T>) -> T {
    if m.is_diagonal() {
        m.diagonal().into_iter().fold(T::neg_infinity(), T::max)
    } else {
        symmetric_eigen(m).max()
    }
}

fn spectral_radius_symmetric<T: Scalar>(m: &Matrix<T>) -> T {
    if m.is_diagonal() {
        m.diagonal().into_iter().fold(T::zero(), |a, x| a.max(x.abs()))
    } else {
        symmetric_eigen(m).spectral_radius()
    }
}

/// The matrix `D(γ)∇²U D(γ) + D(γ)D(∇U)`, i.e. the Hessian of `U(eˣ)` in `x = log γ`.
pub fn log_concavity_matrix<T: Scalar, U: Utility<T> + ?Sized>(u: &U, gamma: &[T]) -> Result<Matrix<T>> {
    let h = u.hessian(gamma)?;
    let g = u.gradient(gamma)?;
    let mut c = h.scale_rows_cols(gamma, gamma);
    for i in 0..gamma.len() {
        c[(i, i)] += gamma[i] * g[i];
    }
    Ok(c)
}

/// Returns `(ok, worst_eig)`: the largest eigenvalue of the log-concavity
/// matrix and whether it is at most `LOG_CONCAVITY_TOL`.
pub fn check_log_concavity<T: Scalar, U: Utility<T> + ?Sized>(u: &U, gamma: &[T]) -> Result<(bool, T)> {
    let c = log_concavity_matrix(u, gamma)?;
    let worst = max_eigenvalue(&c);
    Ok((worst <= T::lit(LOG_CONCAVITY_TOL), worst))
}

/// `M_U = D(γ/∇U)^{1/2} ∇²U D(γ/∇U)^{1/2}`.
pub fn curvature_matrix<T: Scalar, U: Utility<T> + ?Sized>(u: &U, gamma: &[T]) -> Result<Matrix<T>> {
    let g = u.gradient(gamma)?;
    if let Some(i) = g.iter().position(|&x| !(x > T::zero())) {
        return Err(Error::UtilityContract { index: i, value: g[i].as_f64() });
    }
    let d: Vec<T> = gamma.iter().zip(&g).map(|(&x, &y)| (x / y).sqrt()).collect();
    Ok(u.hessian(gamma)?.scale_rows_cols(&d, &d))
}

/// Largest `ρ[M_U]` over the samples, never below the model's analytic `B`.
///
/// Sampling gives a lower estimate of the true supremum over all `γ`.
pub fn estimate_b<T: Scalar, U: Utility<T> + ?Sized>(u: &U, samples: &[Vec<T>]) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut b = T::zero();
    for gamma in samples {
        b = b.max(spectral_radius_symmetric(&curvature_matrix(u, gamma)?));
    }
    Ok(u.analytic_b().map_or(b, |a| a.max(b)))
}

/// `count` SINR vectors with coordinates drawn log-uniformly from `[lo, hi]`.
pub fn log_uniform_samples<T: Scalar, R: Rng + ?Sized>(dim: usize, count: usize, lo: T, hi: T, rng: &mut R) -> Vec<Vec<T>> {
    let (a, b) = (lo.ln().as_f64(), hi.ln().as_f64());
    (0..count).map(|_| (0..dim).map(|_| T::lit(rng.random_range(a..=b).exp())).collect()).collect()
}

/// Default number of samples for the `B` estimate.
pub const B_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityDiagnostics<T> {
    pub b_estimate: T,
    pub log_concave_ok: bool,
    /// Most positive eigenvalue of the log-concavity matrix over the samples.
    pub worst_violation: T,
}

/// Runs both diagnostics over `B_SAMPLES` log-uniform draws from the model's
/// sampling range.
pub fn diagnose<T: Scalar, U: Utility<T> + ?Sized, R: Rng + ?Sized>(u: &U, dim: usize, rng: &mut R) -> Result<UtilityDiagnostics<T>> {
    let dim = u.required_dim().unwrap_or(dim);
    let (lo, hi) = u.sample_range();
    let samples = log_uniform_samples(dim, B_SAMPLES, lo, hi, rng);
    let b = estimate_b(u, &samples)?;
    let mut worst = T::neg_infinity();
    for g in &samples {
        worst = worst.max(check_log_concavity(u, g)?.1);
    }
    Ok(UtilityDiagnostics { b_estimate: b, log_concave_ok: worst <= T::lit(LOG_CONCAVITY_TOL), worst_violation: worst })
}

/// `θ_max = 1/(2B − 1)`.
pub fn theta_max<T: Scalar>(b: T) -> T {
    T::one() / (T::lit(2.0) * b - T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gap7db() -> f64 {
        10f64.powf(0.7)
    }

    fn relay_fixture() -> RelayUtility<f64> {
        RelayUtility::new(
            vec![RelayRoute::Relayed { access: 0, forward: 2 }, RelayRoute::Direct { slot1: 1, slot2: 3 }],
            4,
            gap7db(),
            5.0,
        )
        .unwrap()
    }

    fn fd_gradient(u: &dyn Utility<f64>, g: &[f64]) -> Vec<f64> {
        (0..g.len())
            .map(|i| {
                let h = 1e-6 * g[i];
                let mut a = g.to_vec();
                let mut b = g.to_vec();
                a[i] += h;
                b[i] -= h;
                (u.value(&a).unwrap() - u.value(&b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    fn fd_hessian(u: &dyn Utility<f64>, g: &[f64]) -> Matrix<f64> {
        let n = g.len();
        let mut h = Matrix::zeros(n, n);
        for j in 0..n {
            let step = 1e-6 * g[j];
            let mut a = g.to_vec();
            let mut b = g.to_vec();
            a[j] += step;
            b[j] -= step;
            let ga = u.gradient(&a).unwrap();
            let gb = u.gradient(&b).unwrap();
            for i in 0..n {
                h[(i, j)] = (ga[i] - gb[i]) / (2.0 * step);
            }
        }
        h
    }

    fn models() -> Vec<Box<dyn Utility<f64>>> {
        vec![
            Box::new(SumLogSinr::new()),
            Box::new(SumLogSinr::weighted(vec![0.5, 2.0, 1.0, 3.0]).unwrap()),
            Box::new(LogRate::new(gap7db()).unwrap()),
            Box::new(LogRate::new(1.0).unwrap().with_weights(vec![1.0, 2.0, 0.5, 1.5]).unwrap()),
            Box::new(relay_fixture()),
        ]
    }

    #[test]
    fn gradients_and_hessians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for u in models() {
            for gamma in log_uniform_samples(4, 50, 0.3, 300.0, &mut rng) {
                let g = u.gradient(&gamma).unwrap();
                let fd = fd_gradient(u.as_ref(), &gamma);
                for i in 0..4 {
                    // normwise relative error
                    let rel = (g[i] - fd[i]).abs() / g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    assert!(rel <= 1e-5, "{}: grad[{i}] rel err {rel}", u.name());
                    assert!(g[i] > 0.0);
                }
                let h = u.hessian(&gamma).unwrap();
                let fdh = fd_hessian(u.as_ref(), &gamma);
                let scale = h.norm_inf();
                for i in 0..4 {
                    for j in 0..4 {
                        let err = (h[(i, j)] - fdh[(i, j)]).abs() / scale;
                        assert!(err <= 1e-4, "{}: hess[{i},{j}] rel err {err}", u.name());
                    }
                }
            }
        }
    }

    #[test]
    fn sum_log_sinr_concavity_matrix_vanishes() {
        let u = SumLogSinr::<f64>::new();
        for gamma in [vec![0.25, 4.0, 2.0], vec![1e-3, 17.0, 123.4]] {
            let (ok, worst) = check_log_concavity(&u, &gamma).unwrap();
            assert!(ok);
            assert!(worst.abs() <= 1e-15, "worst {worst}");
        }
        let (ok, worst) = check_log_concavity(&u, &[0.5, 2.0, 8.0]).unwrap();
        assert!(ok);
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn log_rate_is_log_concave_at_ten() {
        let u = LogRate::new(5.0).unwrap();
        let (ok, worst) = check_log_concavity(&u, &[10.0; 4]).unwrap();
        assert!(ok && worst < 0.0);
    }

    #[test]
    fn linear_utility_fails_log_concavity() {
        let (ok, worst) = check_log_concavity(&SumSinr, &[1.0, 1.0]).unwrap();
        assert!(!ok);
        assert_eq!(worst, 1.0);
    }

    #[test]
    fn b_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = log_uniform_samples(3, 200, 1e-3, 1e3, &mut rng);
        assert_relative_eq!(estimate_b(&SumLogSinr::new(), &samples).unwrap(), 1.0, epsilon = 1e-12);
        let w = SumLogSinr::weighted(vec![0.2, 5.0, 1.0]).unwrap();
        let raw = samples.iter().map(|g| spectral_radius_symmetric(&curvature_matrix(&w, g).unwrap())).fold(0.0, f64::max);
        assert_relative_eq!(raw, 1.0, epsilon = 1e-12);
        assert_eq!(estimate_b(&LogRate::new(gap7db()).unwrap(), &samples).unwrap(), 2.0);
        assert!(matches!(estimate_b(&SumLogSinr::<f64>::new(), &[]), Err(Error::EmptySamples)));
    }

    #[test]
    fn log_rate_sampled_curvature_stays_below_declared_bound() {
        let u = LogRate::new(gap7db()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in log_uniform_samples(2, 500, 1e-4, 1e5, &mut rng) {
            let rho = spectral_radius_symmetric(&curvature_matrix(&u, &g).unwrap());
            assert!(rho > 1.0 && rho < 2.0, "rho {rho}");
        }
    }

    #[test]
    fn smooth_min_examples() {
        assert_relative_eq!(smooth_min(1.0, 1.0, 5.0), 1.0 - 2f64.ln() / 5.0, epsilon = 1e-15);
        let v = smooth_min(0.0, 10.0, 5.0);
        assert_relative_eq!(v, -(1.0 + (-50f64).exp()).ln() / 5.0, max_relative = 1e-12);
        assert!(v < 0.0 && v > -1e-22);
        let mut prev = f64::NEG_INFINITY;
        for k in [5.0, 50.0, 500.0] {
            let s = smooth_min(2.0, 3.0, k);
            assert!(s >= prev && s <= 2.0 && 2.0 - s <= 2f64.ln() / k);
            prev = s;
        }
        // no overflow for |kx| ~ 1e4
        assert!(smooth_min(-2000.0f64, 1500.0, 5.0).is_finite());
        assert!(smooth_min(2000.0f64, 1999.0, 5.0).is_finite());
    }

    #[test]
    fn rate_examples() {
        assert_relative_eq!(relay_rate(3.0, 3.0, 1.0, None).bits, 1.0, epsilon = 1e-15);
        let r = relay_rate(3.0, 3.0, 1.0, Some(5.0));
        assert_relative_eq!(r.bits, 0.5 * (4.0 - 2f64.ln() / 5.0).log2(), epsilon = 1e-14);
        assert_relative_eq!(r.bits, 0.974557, epsilon = 1e-6);
        assert!(!r.domain_warning);
        assert!(relay_rate(0.1, 3.0, 1.0, Some(5.0)).domain_warning);
        assert_relative_eq!(direct_rate_bound(3.0, 3.0, 1.0).bits, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn hessian_structure() {
        let gamma = [2.0, 3.0, 5.0, 7.0];
        assert!(SumLogSinr::new().hessian(&gamma).unwrap().is_diagonal());
        assert!(LogRate::new(gap7db()).unwrap().hessian(&gamma).unwrap().is_diagonal());
        let h = relay_fixture().hessian(&gamma).unwrap();
        assert!(!h.is_diagonal());
        assert!(h[(0, 2)] != 0.0 && h[(1, 3)] != 0.0);
        assert_eq!(h[(0, 1)], 0.0);
    }

    #[test]
    fn relay_routes_must_cover_dimension() {
        assert!(RelayUtility::new(vec![RelayRoute::Direct { slot1: 0, slot2: 1 }], 3, 1.0, 5.0).is_err());
        assert!(RelayUtility::new(vec![RelayRoute::Direct { slot1: 0, slot2: 0 }], 1, 1.0, 5.0).is_err());
        assert!(RelayUtility::new(vec![RelayRoute::Direct { slot1: 0, slot2: 1 }], 2, 1.0, 0.0).is_err());
    }

    #[test]
    fn relay_gradient_component_matches_full_gradient() {
        let u = relay_fixture();
        let g = [0.7, 2.0, 4.0, 9.0];
        let full = u.gradient(&g).unwrap();
        for i in 0..4 {
            assert_eq!(u.gradient_component(i, &g).unwrap(), full[i]);
        }
    }

    #[test]
    fn theta_max_formula() {
        assert_eq!(theta_max(1.0), 1.0);
        assert_relative_eq!(theta_max(2.0), 1.0 / 3.0);
    }

    #[test]
    fn log_rate_clamps_tiny_sinr() {
        let u = LogRate::new(5.0).unwrap();
        let floor = 5.0 * rate_domain_floor::<f64>();
        let v: f64 = u.value(&[floor * 1e-3]).unwrap();
        assert!(v.is_finite());
        assert_eq!(v, u.value(&[floor]).unwrap());
        assert!(u.value(&[1e-12]).unwrap() < u.value(&[1e-11]).unwrap());
        let (ok, _) = check_log_concavity(&u, &[1e-30, 1.0]).unwrap();
        assert!(ok);
    }

    #[test]
    fn diagnostics_flag_non_concave_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d: UtilityDiagnostics<f64> = diagnose(&SumSinr, 3, &mut rng).unwrap();
        assert!(!d.log_concave_ok && d.worst_violation > 0.0);
        let d = diagnose(&LogRate::new(gap7db()).unwrap(), 3, &mut rng).unwrap();
        assert!(d.log_concave_ok && d.b_estimate == 2.0);
    }
}
