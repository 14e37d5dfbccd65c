//! The damped fixed-point iteration.
//!
//! With `α = ∇U / q` and `φ = α / (Sᵀα)`, a point is optimal when
//! `p = clamp(p ⊙ φ(p))`. The solver iterates the damped map
//! `φ_θ(p) = θ p ⊙ φ(p) + (1 − θ) p`, either normalized to the unit sphere
//! (noiseless, unbounded problems) or clamped to the power box.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::InterferenceOperator;
use crate::problem::{NormalizedProblem, SinrState};
use crate::scalar::{all_finite, norm2, Scalar, POWER_FLOOR_W};
use crate::utility::{check_log_concavity, diagnose, theta_max, Utility};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// `p ← φ_θ(p/‖p‖₂)`; requires `ζ = 0` and no upper bound.
    UnconstrainedNormalized,
    /// `p ← clamp(φ_θ(p), ε_p, p_max)`.
    MaxClamped,
    /// `p ← clamp(φ_θ(p), p_min, p_max)`.
    MinMaxClamped,
}

impl SolverMode {
    pub fn for_problem<T: Scalar, M: InterferenceOperator<T>>(prob: &NormalizedProblem<T, M>) -> Self {
        if prob.is_interference_limited() {
            SolverMode::UnconstrainedNormalized
        } else {
            SolverMode::MinMaxClamped
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsyncOrder {
    Ascending,
    /// A fresh permutation every sweep, drawn from a generator with this seed.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Sync,
    Async(AsyncOrder),
}

/// When the damping is halved at each `M`-iteration boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalvingRule {
    /// Every boundary, as written in the distributed algorithm. The total
    /// step budget `Σθ` is then finite, so tight tolerances may be unreachable.
    Unconditional,
    /// Only when the largest relative step has not shrunk since the previous
    /// boundary.
    OnStall,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPower<T> {
    /// `p_max` when bounded, all-ones otherwise.
    Default,
    Max,
    Ones,
    Given(Vec<T>),
    /// Uniform in `[0.01, 1]·p_max` (or `[0.01, 1]` when unbounded).
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub theta0: T,
    /// Iterations between θ-halvings; 0 disables the schedule.
    pub halving_period: usize,
    pub halving: HalvingRule,
    /// Stop once `max_i |Δp_i|/p_i ≤ θ·tol`, i.e. once `|φ_i − 1| ≤ tol` on
    /// the free coordinates regardless of the damping in force.
    pub tol: T,
    pub max_iter: usize,
    pub mode: SolverMode,
    pub sweep: Sweep,
    pub p0: InitialPower<T>,
    /// Refuse to start when the log-concavity test fails at `γ(p0)`.
    pub check_log_concavity: bool,
    /// Keep a copy of `p` in every trace record.
    pub record_powers: bool,
}

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_HALVING_PERIOD: usize = 20;

impl<T: Scalar> SolverConfig<T> {
    pub fn new(mode: SolverMode) -> Self {
        Self {
            theta0: T::lit(0.5),
            halving_period: DEFAULT_HALVING_PERIOD,
            halving: HalvingRule::OnStall,
            tol: T::lit(DEFAULT_TOL),
            max_iter: DEFAULT_MAX_ITER,
            mode,
            sweep: Sweep::Sync,
            p0: InitialPower::Default,
            check_log_concavity: true,
            record_powers: false,
        }
    }

    /// Mode from the problem's bounds and `θ0 = min(0.9·θ_max, 0.5)` from the
    /// utility's curvature bound.
    pub fn for_problem<M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
        prob: &NormalizedProblem<T, M>,
        u: &U,
    ) -> Result<Self> {
        let mut cfg = Self::new(SolverMode::for_problem(prob));
        cfg.theta0 = default_theta0(resolve_b(u, prob.dim())?);
        Ok(cfg)
    }

    pub fn with_theta(mut self, theta: T) -> Self {
        self.theta0 = theta;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_sweep(mut self, sweep: Sweep) -> Self {
        self.sweep = sweep;
        self
    }

    pub fn with_p0(mut self, p0: InitialPower<T>) -> Self {
        self.p0 = p0;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate<M: InterferenceOperator<T>>(&self, prob: &NormalizedProblem<T, M>) -> Result<()> {
        if !(self.theta0 > T::zero() && self.theta0 <= T::one()) {
            return Err(Error::Config(format!("theta0 must be in (0, 1], got {}", self.theta0)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        match self.mode {
            SolverMode::UnconstrainedNormalized if !prob.is_interference_limited() => {
                Err(Error::Config("the normalized mode requires zero noise and unbounded powers".into()))
            }
            SolverMode::MaxClamped | SolverMode::MinMaxClamped if prob.p_max().is_none() => {
                Err(Error::Config("clamped modes require p_max".into()))
            }
            _ => Ok(()),
        }
    }
}

/// The utility's analytic `B`, or the sampled estimate when none is declared.
pub fn resolve_b<T: Scalar, U: Utility<T> + ?Sized>(u: &U, dim: usize) -> Result<T> {
    match u.analytic_b() {
        Some(b) => Ok(b),
        None => Ok(diagnose(u, dim, &mut ChaCha8Rng::seed_from_u64(0))?.b_estimate),
    }
}

pub fn default_theta0<T: Scalar>(b: T) -> T {
    (T::lit(0.9) * theta_max(b)).min(T::lit(0.5))
}

/// Algorithm-1 damping schedule: `k, c` start at 1; after each iteration,
/// if `k > cM` the damping may be halved and `c` incremented.
#[derive(Debug, Clone)]
pub struct ThetaSchedule<T> {
    theta: T,
    period: usize,
    rule: HalvingRule,
    k: usize,
    c: usize,
    reference_step: Option<T>,
}

impl<T: Scalar> ThetaSchedule<T> {
    pub fn new(theta0: T, period: usize, rule: HalvingRule) -> Self {
        Self { theta: theta0, period, rule, k: 1, c: 1, reference_step: None }
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// Iteration counter `k` and halving counter `c`.
    pub fn counters(&self) -> (usize, usize) {
        (self.k, self.c)
    }

    /// Records the largest relative step of the iteration just completed.
    pub fn advance(&mut self, step: T) {
        if self.reference_step.is_none() {
            self.reference_step = Some(step);
        }
        if self.period > 0 && self.k > self.c * self.period {
            let halve = match self.rule {
                HalvingRule::Unconditional => true,
                HalvingRule::OnStall => self.reference_step.is_some_and(|r| step >= r),
            };
            if halve {
                self.theta = self.theta / T::lit(2.0);
            }
            self.c += 1;
            self.reference_step = Some(step);
        }
        self.k += 1;
    }
}

/// Everything the iteration computes at one power vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointState<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
    pub gamma: Vec<T>,
    pub alpha: Vec<T>,
    pub phi: Vec<T>,
    pub theta: T,
}

/// `α = ∇U / q`.
pub fn eval_alpha<T: Scalar, U: Utility<T> + ?Sized>(state: &SinrState<T>, u: &U) -> Result<Vec<T>> {
    let g = u.gradient(&state.gamma)?;
    alpha_from_gradient(&g, &state.q)
}

fn alpha_from_gradient<T: Scalar>(g: &[T], q: &[T]) -> Result<Vec<T>> {
    if let Some(i) = g.iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(Error::UtilityContract { index: i, value: g[i].as_f64() });
    }
    Ok(g.iter().zip(q).map(|(&a, &b)| a / b).collect())
}

/// `φ = α / (Vᵀ(γ ⊙ α))`, one transposed product.
pub fn eval_phi<T: Scalar, M: InterferenceOperator<T>>(prob: &NormalizedProblem<T, M>, state: &SinrState<T>, alpha: &[T]) -> Vec<T> {
    let w: Vec<T> = state.gamma.iter().zip(alpha).map(|(&g, &a)| g * a).collect();
    let mut t = vec![T::zero(); w.len()];
    prob.v().apply_transpose(&w, &mut t);
    alpha
        .iter()
        .zip(&t)
        .map(|(&a, &d)| {
            debug_assert!(d > T::zero());
            a / d
        })
        .collect()
}

/// Computes `q, γ, α, φ` at `p`.
pub fn fixed_point_state<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    p: &[T],
    theta: T,
) -> Result<FixedPointState<T>> {
    let s = prob.interference_and_sinr(p)?;
    let alpha = eval_alpha(&s, u)?;
    let phi = eval_phi(prob, &s, &alpha);
    Ok(FixedPointState { p: s.p, q: s.q, gamma: s.gamma, alpha, phi, theta })
}

/// `θ p ⊙ φ + (1 − θ) p`.
pub fn step_damped<T: Scalar>(p: &[T], phi: &[T], theta: T) -> Vec<T> {
    p.iter().zip(phi).map(|(&x, &f)| damped(x, f, theta)).collect()
}

#[inline]
fn damped<T: Scalar>(p: T, phi: T, theta: T) -> T {
    theta * p * phi + (T::one() - theta) * p
}

#[inline]
fn clamp<T: Scalar>(x: T, lo: T, hi: Option<T>) -> T {
    let x = hi.map_or(x, |h| x.min(h));
    x.max(lo)
}

/// Damped step followed by the elementwise clamp to `[p_min, p_max]`.
pub fn step_clamped<T: Scalar>(p: &[T], phi: &[T], theta: T, p_min: &[T], p_max: &[T]) -> Vec<T> {
    p.iter()
        .zip(phi)
        .enumerate()
        .map(|(i, (&x, &f))| clamp(damped(x, f, theta), p_min[i], Some(p_max[i])))
        .collect()
}

/// `φ_θ(p/‖p‖₂)`.
pub fn step_normalized<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    p: &[T],
    prob: &NormalizedProblem<T, M>,
    u: &U,
    theta: T,
) -> Result<Vec<T>> {
    let n = norm2(p);
    if !(n > T::zero()) {
        return Err(Error::Domain("cannot normalize the zero power vector".into()));
    }
    let unit: Vec<T> = p.iter().map(|&x| x / n).collect();
    let st = fixed_point_state(prob, u, &unit, theta)?;
    Ok(step_damped(&unit, &st.phi, theta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub iter: usize,
    pub theta: T,
    /// Utility at the iterate the step was taken from.
    pub utility: T,
    pub max_phi_dev: T,
    pub max_rel_step: T,
    pub p: Option<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// Fractions of `|U*|` for the post-hoc vicinity markers.
pub const MARKER_FRACTIONS: [f64; 3] = [0.05, 0.02, 0.01];

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub termination: Termination,
    /// Utility at the returned power vector.
    pub final_utility: T,
}

impl<T: Scalar> SolverTrace<T> {
    /// `U(p_0), U(p_1), …, U(p_K)`.
    pub fn utilities(&self) -> Vec<T> {
        self.records.iter().map(|r| r.utility).chain(std::iter::once(self.final_utility)).collect()
    }

    /// First `k` after which `|U(p_j) − U*| ≤ frac·|U*|` holds for every `j ≥ k`.
    pub fn iterations_to_within(&self, u_star: T, frac: T) -> Option<usize> {
        let band = frac * u_star.abs();
        let us = self.utilities();
        let mut first = None;
        for (k, &u) in us.iter().enumerate().rev() {
            if (u - u_star).abs() <= band {
                first = Some(k);
            } else {
                break;
            }
        }
        first
    }

    /// Markers for 5%, 2% and 1%.
    pub fn markers(&self, u_star: T) -> [Option<usize>; 3] {
        MARKER_FRACTIONS.map(|f| self.iterations_to_within(u_star, T::lit(f)))
    }

    pub fn csv_header() -> &'static str {
        "iter,theta,utility,max_phi_dev,max_rel_step"
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::csv_header());
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", r.iter, r.theta, r.utility, r.max_phi_dev, r.max_rel_step));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput<T> {
    pub p: Vec<T>,
    pub utility: T,
    pub iterations: usize,
    pub converged: bool,
    pub trace: SolverTrace<T>,
}

/// Per-coordinate clamp bounds for a mode.
pub fn mode_bounds<T: Scalar, M: InterferenceOperator<T>>(prob: &NormalizedProblem<T, M>, mode: SolverMode) -> (Vec<T>, Option<Vec<T>>) {
    let n = prob.dim();
    match mode {
        SolverMode::UnconstrainedNormalized => (vec![T::zero(); n], None),
        SolverMode::MaxClamped => (vec![T::lit(POWER_FLOOR_W); n], prob.p_max().map(<[T]>::to_vec)),
        SolverMode::MinMaxClamped => (prob.p_min().to_vec(), prob.p_max().map(<[T]>::to_vec)),
    }
}

/// Resolves the starting vector, already inside the mode's feasible set.
pub fn initial_power<T: Scalar, M: InterferenceOperator<T>>(prob: &NormalizedProblem<T, M>, cfg: &SolverConfig<T>) -> Result<Vec<T>> {
    let n = prob.dim();
    let pmax = prob.p_max();
    let raw: Vec<T> = match (&cfg.p0, pmax) {
        (InitialPower::Default | InitialPower::Max, Some(m)) => m.to_vec(),
        (InitialPower::Default | InitialPower::Max | InitialPower::Ones, None) | (InitialPower::Ones, Some(_)) => vec![T::one(); n],
        (InitialPower::Given(p), _) => {
            if p.len() != n {
                return Err(Error::Dimension { what: "initial power", expected: n, found: p.len() });
            }
            p.clone()
        }
        (InitialPower::Random { seed }, _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n)
                .map(|i| T::lit(rng.random_range(0.01..=1.0)) * pmax.map_or_else(T::one, |m| m[i]))
                .collect()
        }
    };
    let (lo, hi) = mode_bounds(prob, cfg.mode);
    let p: Vec<T> = raw.iter().enumerate().map(|(i, &x)| clamp(x, lo[i], hi.as_ref().map(|h| h[i]))).collect();
    if let Some(i) = p.iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(Error::Domain(format!("initial power must be positive, p0[{i}] = {}", p[i])));
    }
    Ok(p)
}

fn max_rel_step<T: Scalar>(old: &[T], new: &[T]) -> T {
    old.iter().zip(new).fold(T::zero(), |m, (&a, &b)| m.max((b - a).abs() / a))
}

fn max_phi_dev<T: Scalar>(phi: &[T]) -> T {
    phi.iter().fold(T::zero(), |m, &f| m.max((f - T::one()).abs()))
}

fn scale<T: Scalar>(x: &mut [T], c: T) {
    x.iter_mut().for_each(|v| *v *= c);
}

/// Runs the configured iteration to convergence or `max_iter`.
///
/// A synchronous iteration performs exactly one `V·x` and one `Vᵀ·x`; one
/// more `V·x` evaluates the returned point. Hitting `max_iter` is reported
/// through `converged = false`, not as an error.
pub fn solve<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    cfg: &SolverConfig<T>,
) -> Result<SolveOutput<T>> {
    cfg.validate(prob)?;
    if let Some(d) = u.required_dim() {
        if d != prob.dim() {
            return Err(Error::Dimension { what: "utility", expected: prob.dim(), found: d });
        }
    }
    let mut p = initial_power(prob, cfg)?;
    if cfg.check_log_concavity {
        let s = prob.interference_and_sinr(&p)?;
        let (ok, worst) = check_log_concavity(u, &s.gamma)?;
        if !ok {
            return Err(Error::NotLogConcave { worst_eig: worst.as_f64() });
        }
    }
    let normalized = cfg.mode == SolverMode::UnconstrainedNormalized;
    let (lo, hi) = mode_bounds(prob, cfg.mode);
    let mut sched = ThetaSchedule::new(cfg.theta0, cfg.halving_period, cfg.halving);
    let mut records = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut order: Vec<usize> = (0..prob.dim()).collect();
    let mut shuffle_rng = match cfg.sweep {
        Sweep::Async(AsyncOrder::Shuffled { seed }) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };

    for it in 0..cfg.max_iter {
        let theta = sched.theta();
        let mut st = prob.interference_and_sinr(&p)?;
        if normalized {
            let c = T::one() / norm2(&st.p);
            st = st.scaled_noiseless(c);
        }
        let utility = u.value(&st.gamma)?;
        let (next, phi_dev) = match cfg.sweep {
            Sweep::Sync => {
                let alpha = eval_alpha(&st, u)?;
                let phi = eval_phi(prob, &st, &alpha);
                let next: Vec<T> =
                    (0..p.len()).map(|i| clamp(damped(st.p[i], phi[i], theta), lo[i], hi.as_ref().map(|h| h[i]))).collect();
                (next, max_phi_dev(&phi))
            }
            Sweep::Async(_) => {
                if let Some(rng) = shuffle_rng.as_mut() {
                    order.shuffle(rng);
                }
                async_sweep(prob, u, &st, theta, &lo, hi.as_deref(), &order)?
            }
        };
        if !all_finite(&next) || !utility.is_finite() {
            return Err(Error::NonFinite { iteration: it });
        }
        let step = max_rel_step(&st.p, &next);
        records.push(IterationRecord {
            iter: it,
            theta,
            utility,
            max_phi_dev: phi_dev,
            max_rel_step: step,
            p: cfg.record_powers.then(|| st.p.clone()),
        });
        p = next;
        if step <= theta * cfg.tol {
            termination = Termination::Converged;
            break;
        }
        sched.advance(step);
    }

    if normalized {
        let c = T::one() / norm2(&p);
        scale(&mut p, c);
    }
    let final_state = prob.interference_and_sinr(&p)?;
    let utility = u.value(&final_state.gamma)?;
    if !utility.is_finite() {
        return Err(Error::NonFinite { iteration: records.len() });
    }
    Ok(SolveOutput {
        iterations: records.len(),
        converged: termination == Termination::Converged,
        p,
        utility,
        trace: SolverTrace { records, termination, final_utility: utility },
    })
}

/// Same as [`solve`] with an asynchronous sweep (ascending order unless the
/// configuration already selects one).
pub fn sweep_async<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    cfg: &SolverConfig<T>,
) -> Result<SolveOutput<T>> {
    let mut cfg = cfg.clone();
    if cfg.sweep == Sweep::Sync {
        cfg.sweep = Sweep::Async(AsyncOrder::Ascending);
    }
    solve(prob, u, &cfg)
}

/// One Gauss-Seidel pass: each coordinate in `order` is updated from the
/// freshest values of all others. `q` is refreshed in O(N) per update via
/// the column of `V`. Returns the new powers and the largest `|φ_i − 1|` seen.
fn async_sweep<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    start: &SinrState<T>,
    theta: T,
    lo: &[T],
    hi: Option<&[T]>,
    order: &[usize],
) -> Result<(Vec<T>, T)> {
    let v = prob.v();
    let n = start.len();
    let mut p = start.p.clone();
    let mut q = start.q.clone();
    let mut gamma = start.gamma.clone();
    let mut dev = T::zero();
    for &i in order {
        let g = u.gradient(&gamma)?;
        let alpha = alpha_from_gradient(&g, &q)?;
        let mut denom = T::zero();
        for j in 0..n {
            denom += v.entry(j, i) * (gamma[j] * alpha[j]);
        }
        let phi = alpha[i] / denom;
        dev = dev.max((phi - T::one()).abs());
        let new = clamp(damped(p[i], phi, theta), lo[i], hi.map(|h| h[i]));
        let delta = new - p[i];
        p[i] = new;
        for j in 0..n {
            q[j] += v.entry(j, i) * delta;
            gamma[j] = p[j] / q[j];
        }
    }
    Ok((p, dev))
}

/// Applies a single asynchronous pass at `p` with damping `theta`.
pub fn async_sweep_once<T: Scalar, M: InterferenceOperator<T>, U: Utility<T> + ?Sized>(
    prob: &NormalizedProblem<T, M>,
    u: &U,
    p: &[T],
    theta: T,
    mode: SolverMode,
) -> Result<Vec<T>> {
    let (lo, hi) = mode_bounds(prob, mode);
    let st = prob.interference_and_sinr(p)?;
    let order: Vec<usize> = (0..p.len()).collect();
    Ok(async_sweep(prob, u, &st, theta, &lo, hi.as_deref(), &order)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::PowerBounds;
    use crate::utility::{LogRate, SumLogSinr};
    use approx::assert_relative_eq;

    fn sym2(a: f64, b: f64) -> NormalizedProblem<f64> {
        let v = Matrix::from_rows(&[vec![a, b], vec![b, a]]).unwrap();
        NormalizedProblem::new(v, vec![0.0, 0.0], PowerBounds::unbounded(2)).unwrap()
    }

    #[test]
    fn damped_step_examples() {
        assert_eq!(step_damped(&[1.0, 1.0], &[2.0, 0.5], 1.0), vec![2.0, 0.5]);
        assert_eq!(step_damped(&[1.0, 1.0], &[2.0, 0.5], 0.5), vec![1.5, 0.75]);
        assert_eq!(step_damped(&[0.3, 7.0], &[2.0, 0.5], 0.0), vec![0.3, 7.0]);
    }

    #[test]
    fn clamped_step_examples() {
        let lo = [0.1, 0.1];
        let hi = [1.0, 1.0];
        assert_eq!(step_clamped(&[1.0, 1.0], &[1.5, 0.8], 1.0, &lo, &hi), vec![1.0, 0.8]);
        assert_eq!(step_clamped(&[1.0, 1.0], &[0.05, 0.5], 1.0, &lo, &hi), vec![0.1, 0.5]);
        assert_eq!(step_clamped(&[0.5, 0.5], &[1.2, 0.9], 1.0, &lo, &hi), step_damped(&[0.5, 0.5], &[1.2, 0.9], 1.0));
    }

    #[test]
    fn alpha_examples() {
        let s = SinrState::from_pq(vec![1.0], vec![0.2]);
        // γ = 5, so weight 25 gives ∇U = 5
        let u = SumLogSinr::weighted(vec![25.0]).unwrap();
        assert_relative_eq!(eval_alpha(&s, &u).unwrap()[0], 25.0, epsilon = 1e-12);
        let prob = sym2(0.3, 0.7);
        let p = [0.4, 1.7];
        let st = prob.interference_and_sinr(&p).unwrap();
        let a = eval_alpha(&st, &SumLogSinr::new()).unwrap();
        for i in 0..2 {
            assert_relative_eq!(a[i], 1.0 / p[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn symmetric_equal_powers_are_fixed() {
        let prob = sym2(0.2, 0.5);
        for c in [0.01, 1.0, 30.0] {
            let st = fixed_point_state(&prob, &SumLogSinr::new(), &[c, c], 0.5).unwrap();
            for f in st.phi {
                assert_relative_eq!(f, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn normalized_step_examples() {
        let prob = sym2(0.2, 0.5);
        let out = step_normalized(&[3.0, 3.0], &prob, &SumLogSinr::new(), 0.5).unwrap();
        let r = 0.5f64.sqrt();
        assert_relative_eq!(out[0], r, epsilon = 1e-14);
        assert_relative_eq!(out[1], r, epsilon = 1e-14);
        assert!(step_normalized(&[0.0, 0.0], &prob, &SumLogSinr::new(), 0.5).is_err());
    }

    #[test]
    fn symmetric_two_user_converges_to_equal_unit_powers() {
        let prob = sym2(0.2, 0.5);
        let cfg = SolverConfig::new(SolverMode::UnconstrainedNormalized).with_p0(InitialPower::Given(vec![0.3, 2.0]));
        let out = solve(&prob, &SumLogSinr::new(), &cfg).unwrap();
        assert!(out.converged);
        let r = 0.5f64.sqrt();
        assert_relative_eq!(out.p[0], r, epsilon = 1e-8);
        assert_relative_eq!(out.p[1], r, epsilon = 1e-8);
    }

    #[test]
    fn single_link_goes_to_max_power() {
        let v = Matrix::from_rows(&[vec![0.1]]).unwrap();
        let prob = NormalizedProblem::new(v, vec![0.1], PowerBounds::uniform_max(1, 1.0)).unwrap();
        let u = LogRate::new(10f64.powf(0.7)).unwrap();
        let cfg = SolverConfig::for_problem(&prob, &u).unwrap().with_p0(InitialPower::Given(vec![0.2]));
        let out = solve(&prob, &u, &cfg).unwrap();
        assert!(out.converged);
        assert_eq!(out.p, vec![1.0]);
    }

    #[test]
    fn schedule_follows_k_greater_than_cm() {
        let mut s = ThetaSchedule::new(0.8, 3, HalvingRule::Unconditional);
        let mut seen = Vec::new();
        for _ in 0..10 {
            s.advance(1.0);
            seen.push(s.theta());
        }
        // halvings after iterations 4 and 7 and 10
        assert_eq!(seen, vec![0.8, 0.8, 0.8, 0.4, 0.4, 0.4, 0.2, 0.2, 0.2, 0.1]);
        let mut s = ThetaSchedule::new(0.8, 3, HalvingRule::OnStall);
        for k in 0..10 {
            s.advance(1.0 / (k as f64 + 1.0));
        }
        assert_eq!(s.theta(), 0.8);
        let mut s = ThetaSchedule::new(0.8, 0, HalvingRule::Unconditional);
        for _ in 0..100 {
            s.advance(1.0);
        }
        assert_eq!(s.theta(), 0.8);
    }

    #[test]
    fn markers_are_first_entry_into_band_for_good() {
        let rec = |u: f64| IterationRecord { iter: 0, theta: 0.5, utility: u, max_phi_dev: 0.0, max_rel_step: 0.0, p: None };
        let t = SolverTrace {
            records: vec![rec(-2.0), rec(-1.03), rec(-1.2), rec(-1.04), rec(-1.015)],
            termination: Termination::Converged,
            final_utility: -1.005,
        };
        assert_eq!(t.markers(-1.0), [Some(3), Some(4), Some(5)]);
        assert_eq!(t.iterations_to_within(-1.0, 0.001), None);
    }

    #[test]
    fn rejects_mode_problem_mismatch() {
        let prob = sym2(0.2, 0.5);
        let cfg = SolverConfig::new(SolverMode::MinMaxClamped);
        assert!(matches!(solve(&prob, &SumLogSinr::new(), &cfg), Err(Error::Config(_))));
    }
}
