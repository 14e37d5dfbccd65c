//! Independent certification of fixed points.
//!
//! The oracle maximizes `g(y) = U(γ(eʸ))` over the box on `y = log p` by
//! projected gradient ascent. It shares only the model (`V`, `ζ`, `U`) with
//! the fixed-point solver, never the `φ` map. The remaining checks evaluate
//! the optimality defect and the matrix identities the convergence theory
//! rests on.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, symmetric_eigen, InterferenceOperator, Matrix};
use crate::problem::{NormalizedProblem, SinrState};
use crate::scalar::{dot, norm2, norm_inf, Scalar, POWER_FLOOR_W};
use crate::solver::{eval_alpha, eval_phi, fixed_point_state};
use crate::spectral::{spectral_radius, SinrOperator, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::utility::Utility;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig<T> {
    /// Stop when `‖P(y + ∇g) − y‖₂ ≤ tol`.
    pub tol: T,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub armijo: T,
}

impl<T: Scalar> Default for OracleConfig<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-9), max_iter: 100_000, max_halvings: 60, armijo: T::lit(1e-4) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution<T> {
    pub p: Vec<T>,
    pub utility: T,
    /// Multiplier of `x ≤ y − z`: `λ = γ ⊙ ∇U`.
    pub lambda: Vec<T>,
    /// Multiplier of `z ≥ log(Veʸ + ζ)`, solved from stationarity in `y`.
    pub mu: Vec<T>,
    /// Multiplier of the power box (positive at an active upper bound).
    pub beta: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub projected_grad_norm: T,
}

/// Log-domain feasible point: `x = log γ`, `y = log p`, `z = log q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDomainPoint<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Scalar> LogDomainPoint<T> {
    pub fn from_state(s: &SinrState<T>) -> Self {
        Self {
            x: s.gamma.iter().map(|g| g.ln()).collect(),
            y: s.p.iter().map(|p| p.ln()).collect(),
            z: s.q.iter().map(|q| q.ln()).collect(),
        }
    }

    /// Largest violation of `z = log(Veʸ + ζ)` and `x = y − z`.
    pub fn constraint_gap<M: InterferenceOperator<T>>(&self, prob: &NormalizedProblem<T, M>) -> Result<T> {
        let p: Vec<T> = self.y.iter().map(|y| y.exp()).collect();
        let s = prob.interference_and_sinr(&p)?;
        let mut gap = T::zero();
        for i in 0..p.len() {
            gap = gap.max((self.z[i] - s.q[i].ln()).abs());
            gap = gap.max((self.x[i] - (self.y[i] - self.z[i])).abs());
        }
        Ok(gap)
    }
}

struct Eval<T> {
    f: T,
    grad: Vec<T>,
    state: SinrState<T>,
}

/// `g(y)` and `∇g = p ⊙ (α − Vᵀ(γ ⊙ α))`, by the chain rule through `q`.
fn evaluate<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    y: &[T],
) -> Result<Eval<T>> {
    let p: Vec<T> = y.iter().map(|v| v.exp()).collect();
    let state = prob.interference_and_sinr(&p)?;
    let f = u.value(&state.gamma)?;
    let alpha = eval_alpha(&state, u)?;
    let w: Vec<T> = state.gamma.iter().zip(&alpha).map(|(&g, &a)| g * a).collect();
    let mut t = vec![T::zero(); w.len()];
    prob.v().apply_transpose(&w, &mut t);
    let grad = (0..p.len()).map(|i| p[i] * (alpha[i] - t[i])).collect();
    Ok(Eval { f, grad, state })
}

/// Gradient of the log-domain objective at `y`, exposed for checking.
pub fn log_domain_gradient<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    y: &[T],
) -> Result<(T, Vec<T>)> {
    let e = evaluate(prob, u, y)?;
    Ok((e.f, e.grad))
}

struct LogBox<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    gauge: bool,
}

impl<T: Scalar> LogBox<T> {
    fn new<M: InterferenceOperator<T>>(prob: &NormalizedProblem<T, M>) -> Self {
        let floor = T::lit(POWER_FLOOR_W);
        let lo = prob.p_min().iter().map(|&x| x.max(floor).ln()).collect();
        let hi = match prob.p_max() {
            Some(m) => m.iter().map(|x| x.ln()).collect(),
            None => vec![T::infinity(); prob.dim()],
        };
        Self { lo, hi, gauge: prob.is_interference_limited() }
    }

    fn project(&self, y: &mut [T]) {
        if self.gauge {
            // ‖eʸ‖₂ = 1
            let m = y.iter().copied().fold(T::neg_infinity(), T::max);
            let s: T = y.iter().map(|&v| (T::lit(2.0) * (v - m)).exp()).sum();
            let shift = m + s.ln() / T::lit(2.0);
            y.iter_mut().for_each(|v| *v -= shift);
        } else {
            for (i, v) in y.iter_mut().enumerate() {
                *v = v.max(self.lo[i]).min(self.hi[i]);
            }
        }
    }
}

/// Projected gradient ascent with Armijo backtracking on `y = log p`.
///
/// Each trial step starts from a Barzilai-Borwein estimate and is halved
/// until the Armijo condition holds. Noiseless problems are solved on the
/// gauge `‖p‖₂ = 1`.
pub fn oracle_solve<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    cfg: &OracleConfig<T>,
) -> Result<OracleSolution<T>> {
    let n = prob.dim();
    let bx = LogBox::new(prob);
    let mut y: Vec<T> = match prob.p_max() {
        Some(m) => m.iter().map(|&x| (x / T::lit(2.0)).ln()).collect(),
        None => vec![T::zero(); n],
    };
    bx.project(&mut y);
    let mut cur = evaluate(prob, u, &y)?;
    let mut step = T::one();
    let mut iterations = 0;
    let mut converged = false;
    let mut pg_norm = T::infinity();
    let eps = T::epsilon();

    while iterations < cfg.max_iter {
        let mut probe: Vec<T> = y.iter().zip(&cur.grad).map(|(&a, &g)| a + g).collect();
        bx.project(&mut probe);
        pg_norm = norm2(&probe.iter().zip(&y).map(|(&a, &b)| a - b).collect::<Vec<_>>());
        if pg_norm <= cfg.tol {
            converged = true;
            break;
        }
        let slack = T::lit(8.0) * eps * (cur.f.abs() + T::one());
        let mut t = step;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let mut trial: Vec<T> = y.iter().zip(&cur.grad).map(|(&a, &g)| a + t * g).collect();
            bx.project(&mut trial);
            let d: Vec<T> = trial.iter().zip(&y).map(|(&a, &b)| a - b).collect();
            let next = evaluate(prob, u, &trial)?;
            if next.f.is_finite() && next.f >= cur.f + cfg.armijo * dot(&cur.grad, &d) - slack {
                accepted = Some((trial, d, next));
                break;
            }
            t = t / T::lit(2.0);
        }
        let Some((trial, s, next)) = accepted else {
            return Err(Error::LineSearch { iteration: iterations, halvings: cfg.max_halvings });
        };
        // ascent form of the BB1 step: sᵀs / −sᵀ(∇g₊ − ∇g)
        let r: Vec<T> = next.grad.iter().zip(&cur.grad).map(|(&a, &b)| a - b).collect();
        let curv = -dot(&s, &r);
        step = if curv > T::zero() { dot(&s, &s) / curv } else { t * T::lit(2.0) };
        step = step.max(T::lit(1e-12)).min(T::lit(1e12));
        y = trial;
        cur = next;
        iterations += 1;
    }

    let state = cur.state;
    let g = u.gradient(&state.gamma)?;
    let lambda: Vec<T> = state.gamma.iter().zip(&g).map(|(&a, &b)| a * b).collect();
    let active: Vec<bool> = (0..n).map(|i| !bx.gauge && (y[i] <= bx.lo[i] || y[i] >= bx.hi[i])).collect();
    let mu = solve_mu(prob, &state, &lambda, &active);
    let mut t = vec![T::zero(); n];
    let mq: Vec<T> = mu.iter().zip(&state.q).map(|(&m, &q)| m / q).collect();
    prob.v().apply_transpose(&mq, &mut t);
    let beta = (0..n).map(|i| lambda[i] - state.p[i] * t[i]).collect();
    Ok(OracleSolution {
        utility: cur.f,
        p: state.p,
        lambda,
        mu,
        beta,
        iterations,
        converged,
        projected_grad_norm: pg_norm,
    })
}

/// Stationarity in `y` on free coordinates, `λᵢ = pᵢ Σⱼ Vⱼᵢ μⱼ / qⱼ`, and
/// `μᵢ = λᵢ` where a bound is active.
fn solve_mu<T: Scalar, M: InterferenceOperator<T>>(
    prob: &NormalizedProblem<T, M>,
    s: &SinrState<T>,
    lambda: &[T],
    active: &[bool],
) -> Vec<T> {
    let n = lambda.len();
    let v = prob.v();
    let a = Matrix::from_fn(n, n, |i, j| {
        if active[i] {
            if i == j {
                T::one()
            } else {
                T::zero()
            }
        } else {
            s.p[i] * v.entry(j, i) / s.q[j]
        }
    });
    lu_solve(&a, lambda).unwrap_or_else(|| vec![T::nan(); n])
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual<T> {
    /// `p − clamp(p ⊙ φ(p), p_min, p_max)`.
    pub residual: Vec<T>,
    pub norm_inf: T,
    /// `‖residual‖∞ / ‖p‖∞`.
    pub relative: T,
    pub active_lower: Vec<bool>,
    pub active_upper: Vec<bool>,
}

/// Clamped fixed-point defect at `p` using the problem's own bounds
/// (no clamp in the unbounded mode).
pub fn kkt_residual<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    p: &[T],
    prob: &NormalizedProblem<T, M>,
    u: &U,
) -> Result<KktResidual<T>> {
    let st = fixed_point_state(prob, u, p, T::one())?;
    let n = p.len();
    let mut residual = Vec::with_capacity(n);
    let mut lo_flags = vec![false; n];
    let mut hi_flags = vec![false; n];
    for i in 0..n {
        let mut target = p[i] * st.phi[i];
        if let Some(pm) = prob.p_max() {
            if target >= pm[i] {
                target = pm[i];
                hi_flags[i] = true;
            }
            if target <= prob.p_min()[i] {
                target = prob.p_min()[i];
                lo_flags[i] = true;
            }
        }
        residual.push(p[i] - target);
    }
    let norm = norm_inf(&residual);
    Ok(KktResidual { relative: norm / norm_inf(p), norm_inf: norm, residual, active_lower: lo_flags, active_upper: hi_flags })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronCheck<T> {
    pub rho: T,
    /// `1 − cos∠(v, p)` for the dominant eigenvector `v`.
    pub misalignment: T,
}

/// Dominant eigenpair of `S = D(γ(p))V`; for noiseless problems `ρ = 1` with
/// eigenvector `p`.
pub fn perron_check<T: Scalar, M: InterferenceOperator<T>>(prob: &NormalizedProblem<T, M>, p: &[T]) -> Result<PerronCheck<T>> {
    let s = prob.interference_and_sinr(p)?;
    let op = SinrOperator { gamma: &s.gamma, v: prob.v() };
    let (rho, v) = spectral_radius(&op, T::lit(DEFAULT_TOL), DEFAULT_MAX_ITER)?;
    let cos = dot(&v, p) / (norm2(&v) * norm2(p));
    Ok(PerronCheck { rho, misalignment: T::one() - cos })
}

/// `‖Sᵀα − α‖∞ / ‖α‖∞`; zero exactly at a noiseless unconstrained optimum.
pub fn left_eigen_residual<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    p: &[T],
) -> Result<T> {
    let s = prob.interference_and_sinr(p)?;
    let alpha = eval_alpha(&s, u)?;
    let phi = eval_phi(prob, &s, &alpha);
    // Sᵀα = α / φ
    let d: Vec<T> = alpha.iter().zip(&phi).map(|(&a, &f)| a / f - a).collect();
    Ok(norm_inf(&d) / norm_inf(&alpha))
}

/// Central-difference Jacobian of `f` at `x` with relative step `rel`.
pub fn fd_jacobian<T: Scalar>(x: &[T], rel: T, mut f: impl FnMut(&[T]) -> Result<Vec<T>>) -> Result<Matrix<T>> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = rel * x[j].abs().max(T::lit(POWER_FLOOR_W));
        xp[j] = x[j] + h;
        let a = f(&xp)?;
        xp[j] = x[j] - h;
        let b = f(&xp)?;
        xp[j] = x[j];
        cols.push(a.iter().zip(&b).map(|(&u, &v)| (u - v) / (T::lit(2.0) * h)).collect::<Vec<T>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok(Matrix::from_fn(m, n, |i, j| cols[j][i]))
}

pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport<T> {
    /// `(θ, ‖φ_θ′p − p‖∞ / ‖p‖∞)`.
    pub scale_line: Vec<(T, T)>,
    /// Finite-difference `φ′`.
    pub phi_jacobian: Matrix<T>,
    /// `‖A − Aᵀ‖∞ / ‖A‖∞` for `A = D(r)^{1/2} D(α) φ′ D(r)^{1/2}`.
    pub asymmetry: T,
    pub sym_max_eig: T,
    pub sym_min_eig: T,
    /// `−(4B − 2)`.
    pub sym_lower_bound: T,
    /// Spectrum of the second-term matrix of the Jacobian split: NSD, radius
    /// at most 2, one zero eigenvalue.
    pub zero_mode_max_eig: T,
    pub zero_mode_min_eig: T,
    /// Eigenvalues within `1e-6` of zero.
    pub zero_mode_count: usize,
    /// `1 − |cos∠|` between the top eigenvector and `(α ⊙ p)^{1/2}`.
    pub zero_mode_misalignment: T,
    pub s_tilde_norm: T,
    pub failures: Vec<String>,
}

impl<T> JacobianReport<T> {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Finite-difference and closed-form checks of the Jacobian structure at a
/// noiseless unconstrained optimum.
pub fn jacobian_check<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    p_star: &[T],
    prob: &NormalizedProblem<T, M>,
    u: &U,
    thetas: &[T],
    b: T,
) -> Result<JacobianReport<T>> {
    let n = p_star.len();
    let rel = T::lit(FD_STEP);
    let mut failures = Vec::new();
    let st = fixed_point_state(prob, u, p_star, T::one())?;

    let phi_map = |x: &[T]| fixed_point_state(prob, u, x, T::one()).map(|s| s.phi);
    let jphi = fd_jacobian(p_star, rel, phi_map)?;

    let mut scale_line = Vec::new();
    let pn = norm_inf(p_star);
    for &theta in thetas {
        let damped = |x: &[T]| {
            fixed_point_state(prob, u, x, theta).map(|s| (0..x.len()).map(|i| theta * x[i] * s.phi[i] + (T::one() - theta) * x[i]).collect())
        };
        let j = fd_jacobian(p_star, rel, damped)?;
        let jp = j.mul_vec(p_star);
        let err = norm_inf(&jp.iter().zip(p_star).map(|(&a, &b)| a - b).collect::<Vec<_>>()) / pn;
        if err > T::lit(1e-4) {
            failures.push(format!("scale-line eigenvector at theta={theta}: rel err {err}"));
        }
        scale_line.push((theta, err));
    }

    // A = D(√(pα)) φ′ D(√(p/α))
    let left: Vec<T> = (0..n).map(|i| (st.p[i] * st.alpha[i]).sqrt()).collect();
    let right: Vec<T> = (0..n).map(|i| (st.p[i] / st.alpha[i]).sqrt()).collect();
    let a = jphi.scale_rows_cols(&left, &right);
    let asymmetry = a.asymmetry() / a.norm_inf();
    if asymmetry > T::lit(1e-6) {
        failures.push(format!("symmetrized Jacobian asymmetry {asymmetry}"));
    }
    let eig = symmetric_eigen(&a.symmetrized());
    let lower = -(T::lit(4.0) * b - T::lit(2.0));
    if eig.max() > T::lit(1e-6) {
        failures.push(format!("symmetrized Jacobian max eigenvalue {} > 1e-6", eig.max()));
    }
    if eig.min() < lower - T::lit(1e-3) {
        failures.push(format!("symmetrized Jacobian min eigenvalue {} below {}", eig.min(), lower));
    }

    // K = D(r)^{-1/2} S D(r)^{1/2}, r = p/α; the matrix is KᵀK − I.
    let s = Matrix::from_fn(n, n, |i, j| st.gamma[i] * prob.v().entry(i, j));
    let rs: Vec<T> = right.clone();
    let rs_inv: Vec<T> = rs.iter().map(|&x| T::one() / x).collect();
    let k = s.scale_rows_cols(&rs_inv, &rs);
    let l4 = k.transpose().matmul(&k).sub(&Matrix::identity(n)).symmetrized();
    let e4 = symmetric_eigen(&l4);
    let zero_tol = T::lit(1e-6);
    let zero_count = e4.values.iter().filter(|v| v.abs() <= zero_tol).count();
    let target: Vec<T> = left.clone();
    let top = e4.vector(0);
    let misalignment = T::one() - (dot(&top, &target) / (norm2(&top) * norm2(&target))).abs();
    if e4.max() > zero_tol {
        failures.push(format!("second-term matrix not NSD: max eigenvalue {}", e4.max()));
    }
    if zero_count != 1 {
        failures.push(format!("second-term matrix has {zero_count} eigenvalues near zero, expected 1"));
    }
    if misalignment > T::lit(1e-6) {
        failures.push(format!("zero eigenvector misaligned with sqrt(alpha p) by {misalignment}"));
    }
    if e4.spectral_radius() > T::lit(2.0 + 1e-6) {
        failures.push(format!("second-term matrix spectral radius {} > 2", e4.spectral_radius()));
    }

    let st_mat = Matrix::identity(n).sub(&s);
    let s_tilde_norm = symmetric_eigen(&st_mat.transpose().matmul(&st_mat)).max().max(T::zero()).sqrt();

    Ok(JacobianReport {
        scale_line,
        phi_jacobian: jphi,
        asymmetry,
        sym_max_eig: eig.max(),
        sym_min_eig: eig.min(),
        sym_lower_bound: lower,
        zero_mode_max_eig: e4.max(),
        zero_mode_min_eig: e4.min(),
        zero_mode_count: zero_count,
        zero_mode_misalignment: misalignment,
        s_tilde_norm,
        failures,
    })
}

/// `f(x) = ln(aᵀeˣ + a₀)`, evaluated with a max shift.
pub fn log_sum_exp_affine<T: Scalar>(a: &[T], a0: T, x: &[T]) -> T {
    let m = x.iter().copied().fold(T::zero(), T::max);
    let s: T = a.iter().zip(x).map(|(&ai, &xi)| ai * (xi - m).exp()).sum::<T>() + a0 * (-m).exp();
    m + s.ln()
}

/// Closed-form Hessian `((1ᵀu + a₀)D(u) − uuᵀ) / (1ᵀu + a₀)²` with `u = a ⊙ eˣ`.
pub fn log_sum_exp_hessian<T: Scalar>(a: &[T], a0: T, x: &[T]) -> Matrix<T> {
    let m = x.iter().copied().fold(T::zero(), T::max);
    let u: Vec<T> = a.iter().zip(x).map(|(&ai, &xi)| ai * (xi - m).exp()).collect();
    let s: T = u.iter().copied().sum::<T>() + a0 * (-m).exp();
    Matrix::from_fn(u.len(), u.len(), |i, j| {
        let d = if i == j { s * u[i] } else { T::zero() };
        (d - u[i] * u[j]) / (s * s)
    })
}

/// `f(t x₁ + (1 − t) x₂) ≤ t f(x₁) + (1 − t) f(x₂) + slack`.
pub fn convex_combination_holds<T: Scalar>(a: &[T], a0: T, x1: &[T], x2: &[T], t: T, slack: T) -> bool {
    let xm: Vec<T> = x1.iter().zip(x2).map(|(&p, &q)| t * p + (T::one() - t) * q).collect();
    log_sum_exp_affine(a, a0, &xm) <= t * log_sum_exp_affine(a, a0, x1) + (T::one() - t) * log_sum_exp_affine(a, a0, x2) + slack
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub trials: usize,
    pub violations: usize,
    /// Most negative Hessian eigenvalue seen.
    pub min_hessian_eig: f64,
}

pub const CONVEXITY_SLACK: f64 = 1e-12;

/// Random convex-combination trials and Hessian PSD checks of
/// `ln(aᵀeˣ + a₀)`, with `x` drawn uniformly from `[−5, 5]ᴺ`.
pub fn convexity_trials<T: Scalar, R: Rng + ?Sized>(a: &[T], a0: T, trials: usize, rng: &mut R) -> ConvexityReport {
    let n = a.len();
    let slack = T::lit(CONVEXITY_SLACK);
    let draw = |rng: &mut R| -> Vec<T> { (0..n).map(|_| T::lit(rng.random_range(-5.0..=5.0))).collect() };
    let mut violations = 0;
    let mut min_eig = f64::INFINITY;
    for _ in 0..trials {
        let x1 = draw(rng);
        let x2 = draw(rng);
        let t = T::lit(rng.random_range(0.0..=1.0));
        if !convex_combination_holds(a, a0, &x1, &x2, t, slack) {
            violations += 1;
        }
        let h = log_sum_exp_hessian(a, a0, &x1);
        let e = symmetric_eigen(&h).min().as_f64();
        min_eig = min_eig.min(e);
        if e < -CONVEXITY_SLACK {
            violations += 1;
        }
    }
    ConvexityReport { trials, violations, min_hessian_eig: min_eig }
}

pub fn convexity_spotcheck<T: Scalar, R: Rng + ?Sized>(a: &[T], a0: T, trials: usize, rng: &mut R) -> bool {
    convexity_trials(a, a0, trials, rng).violations == 0
}

/// Largest problem size accepted by [`grid_search`].
pub const GRID_MAX_DIM: usize = 5;

/// Exhaustive search over a log-spaced grid spanning the power box.
pub fn grid_search<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    points_per_axis: usize,
) -> Result<(Vec<T>, T)> {
    let n = prob.dim();
    if n > GRID_MAX_DIM {
        return Err(Error::Domain(format!("grid search limited to N <= {GRID_MAX_DIM}, got {n}")));
    }
    let pmax = prob.p_max().ok_or_else(|| Error::Domain("grid search needs a bounded box".into()))?;
    if points_per_axis < 2 {
        return Err(Error::Domain("grid needs at least two points per axis".into()));
    }
    let floor = T::lit(POWER_FLOOR_W);
    let axes: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let lo = prob.p_min()[i].max(floor).ln();
            let hi = pmax[i].ln();
            (0..points_per_axis)
                .map(|k| (lo + (hi - lo) * T::from_usize_lossy(k) / T::from_usize_lossy(points_per_axis - 1)).exp().min(pmax[i]))
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; n];
    let mut best: Option<(Vec<T>, T)> = None;
    loop {
        let p: Vec<T> = (0..n).map(|i| axes[i][idx[i]]).collect();
        let s = prob.interference_and_sinr(&p)?;
        let val = u.value(&s.gamma)?;
        if best.as_ref().is_none_or(|(_, b)| val > *b) {
            best = Some((p, val));
        }
        let mut d = 0;
        loop {
            if d == n {
                return Ok(best.expect("grid is non-empty"));
            }
            idx[d] += 1;
            if idx[d] < points_per_axis {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// One named check in a verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl CheckResult {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value >= threshold, value, threshold }
    }
}
