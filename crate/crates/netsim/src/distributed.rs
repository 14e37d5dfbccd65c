//! Message-level simulation of the distributed iteration.
//!
//! Each node owns its power, its measured interference and its counters. Per
//! iteration every node broadcasts `γ_i` (general utilities only) and then
//! `κ_i = γ_i α_i / h_i`; node `i` forms `φ_i = α_i / Σ_j H_ji κ_j` from the
//! broadcasts and its own gain column and takes the damped, clamped step.
//! Broadcasts are reliable and exact, and interference is measured exactly.

use std::cell::Cell;

use pcsim_core::solver::{initial_power, IterationRecord, ThetaSchedule};
use pcsim_core::{Error, LinkGains, NormalizedProblem, PowerBounds, Result, SolverConfig, SolverMode, Sweep, Utility};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signaling {
    /// γ round plus κ round: `2N` messages per iteration.
    General,
    /// Separable utility: each node derives `α_i` from its own `γ_i`, so only the κ round is needed.
    Num,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Round {
    Gamma,
    Kappa,
}

impl Round {
    pub fn as_str(self) -> &'static str {
        match self {
            Round::Gamma => "gamma",
            Round::Kappa => "kappa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageEntry {
    pub iter: usize,
    pub round: Round,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageLog {
    pub entries: Vec<MessageEntry>,
}

impl MessageLog {
    pub fn record(&mut self, iter: usize, round: Round, count: usize) {
        self.entries.push(MessageEntry { iter, round, count });
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn iterations(&self) -> usize {
        self.entries.last().map_or(0, |e| e.iter + 1)
    }

    /// Messages per iteration, indexed by iteration.
    pub fn per_iteration(&self) -> Vec<usize> {
        let mut out = vec![0; self.iterations()];
        for e in &self.entries {
            out[e.iter] += e.count;
        }
        out
    }

    pub fn csv_header() -> &'static str {
        "iter,round,msg_count"
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::csv_header());
        s.push('\n');
        for e in &self.entries {
            s.push_str(&format!("{},{},{}\n", e.iter, e.round.as_str(), e.count));
        }
        s
    }
}

/// Access-controlled view of the true gains for one node. Reads outside the
/// node's own column are counted as violations.
#[derive(Debug)]
pub struct GainView<'a> {
    gains: &'a LinkGains<f64>,
    owner: usize,
    reads: Cell<usize>,
    violations: Cell<usize>,
}

impl<'a> GainView<'a> {
    pub fn new(gains: &'a LinkGains<f64>, owner: usize) -> Self {
        Self { gains, owner, reads: Cell::new(0), violations: Cell::new(0) }
    }

    /// `h_i` of the owning node.
    pub fn direct(&self) -> f64 {
        self.reads.set(self.reads.get() + 1);
        self.gains.h()[self.owner]
    }

    /// `H[j][i]`: gain from this node's transmitter to receiver `j`.
    pub fn column(&self, j: usize) -> f64 {
        self.entry(j, self.owner)
    }

    /// Any entry `H[j][l]`; `l` other than the owner is a violation.
    pub fn entry(&self, j: usize, l: usize) -> f64 {
        self.reads.set(self.reads.get() + 1);
        if l != self.owner {
            self.violations.set(self.violations.get() + 1);
        }
        self.gains.cross()[(j, l)]
    }

    pub fn reads(&self) -> usize {
        self.reads.get()
    }

    pub fn violations(&self) -> usize {
        self.violations.get()
    }
}

/// The physical medium: a receiver measures its total received power.
pub struct Medium<'a> {
    gains: &'a LinkGains<f64>,
}

impl<'a> Medium<'a> {
    pub fn new(gains: &'a LinkGains<f64>) -> Self {
        Self { gains }
    }

    /// Interference plus noise at receiver `i` (self-interference included).
    pub fn received_interference(&self, i: usize, p: &[f64]) -> f64 {
        let row = self.gains.cross().row(i);
        row.iter().zip(p).map(|(&g, &x)| g * x).sum::<f64>() + self.gains.eta()[i]
    }
}

/// Local state of node `i`.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub phi: f64,
    /// Relative power change of the last update.
    pub eps: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub schedule: ThetaSchedule<f64>,
}

impl NodeState {
    pub fn theta(&self) -> f64 {
        self.schedule.theta()
    }

    /// Algorithm counters `(k, c)`.
    pub fn counters(&self) -> (usize, usize) {
        self.schedule.counters()
    }
}

pub fn init_nodes(p0: &[f64], bounds: &PowerBounds<f64>, cfg: &SolverConfig<f64>) -> Result<Vec<NodeState>> {
    let p_max = bounds.p_max.as_ref().ok_or_else(|| Error::Config("distributed runs require p_max".into()))?;
    Ok(p0
        .iter()
        .enumerate()
        .map(|(i, &p)| NodeState {
            id: i,
            p,
            q: f64::NAN,
            gamma: f64::NAN,
            alpha: f64::NAN,
            kappa: f64::NAN,
            phi: f64::NAN,
            eps: f64::INFINITY,
            p_min: if cfg.mode == SolverMode::MinMaxClamped { bounds.p_min[i] } else { pcsim_core::POWER_FLOOR_W },
            p_max: p_max[i],
            schedule: ThetaSchedule::new(cfg.theta0, cfg.halving_period, cfg.halving),
        })
        .collect())
}

/// Outcome of one synchronous round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// Utility at the powers the round started from.
    pub utility: f64,
    pub theta: f64,
    pub max_eps: f64,
    pub max_phi_dev: f64,
    pub messages: Vec<(Round, usize)>,
    pub nonlocal_reads: usize,
}

/// One lockstep iteration over all nodes. Does not advance the θ schedule.
pub fn run_round<U: Utility<f64> + ?Sized>(nodes: &mut [NodeState], truth: &LinkGains<f64>, u: &U, signaling: Signaling) -> Result<RoundReport> {
    let n = nodes.len();
    if truth.len() != n {
        return Err(Error::Dimension { what: "node count", expected: truth.len(), found: n });
    }
    if signaling == Signaling::Num && !u.is_separable() {
        return Err(Error::Config(format!("{} is not separable; NUM signaling needs a separable utility", u.name())));
    }
    let views: Vec<GainView> = (0..n).map(|i| GainView::new(truth, i)).collect();
    let medium = Medium::new(truth);
    let p: Vec<f64> = nodes.iter().map(|s| s.p).collect();

    // measurement
    for (s, view) in nodes.iter_mut().zip(&views) {
        s.q = medium.received_interference(s.id, &p) / view.direct();
        s.gamma = s.p / s.q;
    }
    let mut messages = Vec::with_capacity(2);
    let gamma_bcast: Vec<f64> = nodes.iter().map(|s| s.gamma).collect();
    let utility = u.value(&gamma_bcast)?;

    // γ round (general utilities), then local α and κ
    if signaling == Signaling::General {
        messages.push((Round::Gamma, n));
    }
    for (s, view) in nodes.iter_mut().zip(&views) {
        let g = match signaling {
            Signaling::General => u.gradient_component(s.id, &gamma_bcast)?,
            Signaling::Num => u
                .separable_derivative(s.id, s.gamma)
                .ok_or_else(|| Error::Config(format!("{} has no per-coordinate derivative", u.name())))?,
        };
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::UtilityContract { index: s.id, value: g });
        }
        s.alpha = g / s.q;
        s.kappa = s.gamma * s.alpha / view.direct();
    }

    // κ round, then local φ and the power update
    messages.push((Round::Kappa, n));
    let kappa_bcast: Vec<f64> = nodes.iter().map(|s| s.kappa).collect();
    let (mut max_eps, mut max_phi_dev) = (0.0f64, 0.0f64);
    let theta = nodes.first().map_or(0.0, NodeState::theta);
    for (s, view) in nodes.iter_mut().zip(&views) {
        let denom: f64 = (0..n).map(|j| view.column(j) * kappa_bcast[j]).sum();
        s.phi = s.alpha / denom;
        let th = s.theta();
        let next = (th * s.p * s.phi + (1.0 - th) * s.p).min(s.p_max).max(s.p_min);
        if !next.is_finite() {
            return Err(Error::NonFinite { iteration: s.counters().0 - 1 });
        }
        s.eps = (next - s.p).abs() / s.p;
        s.p = next;
        max_eps = max_eps.max(s.eps);
        max_phi_dev = max_phi_dev.max((s.phi - 1.0).abs());
    }
    let nonlocal_reads = views.iter().map(GainView::violations).sum();
    Ok(RoundReport { utility, theta, max_eps, max_phi_dev, messages, nonlocal_reads })
}

#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub p: Vec<f64>,
    pub utility: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log: MessageLog,
    pub trace: Vec<IterationRecord<f64>>,
    pub nonlocal_reads: usize,
}

/// Runs rounds until every node's change satisfies `ε ≤ θ·tol` (network-wide
/// maximum, as in the centralized solver) or `max_iter` rounds.
///
/// Uses `cfg`'s damping, schedule, tolerance and starting point; the mode
/// must be clamped and the sweep synchronous.
pub fn run_until_converged<U: Utility<f64> + ?Sized>(
    truth: &LinkGains<f64>,
    bounds: &PowerBounds<f64>,
    u: &U,
    cfg: &SolverConfig<f64>,
    signaling: Signaling,
) -> Result<DistributedRun> {
    if cfg.sweep != Sweep::Sync {
        return Err(Error::Config("the distributed simulation runs synchronous rounds".into()));
    }
    if cfg.mode == SolverMode::UnconstrainedNormalized {
        return Err(Error::Config("the distributed simulation needs a clamped mode".into()));
    }
    let prob = NormalizedProblem::normalize(truth, bounds.clone())?;
    cfg.validate(&prob)?;
    let p0 = initial_power(&prob, cfg)?;
    let mut nodes = init_nodes(&p0, bounds, cfg)?;
    let mut log = MessageLog::default();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut nonlocal_reads = 0;
    for it in 0..cfg.max_iter {
        let p_before: Vec<f64> = nodes.iter().map(|s| s.p).collect();
        let r = run_round(&mut nodes, truth, u, signaling)?;
        for &(round, count) in &r.messages {
            log.record(it, round, count);
        }
        nonlocal_reads += r.nonlocal_reads;
        trace.push(IterationRecord {
            iter: it,
            theta: r.theta,
            utility: r.utility,
            max_phi_dev: r.max_phi_dev,
            max_rel_step: r.max_eps,
            p: cfg.record_powers.then_some(p_before),
        });
        if r.max_eps <= r.theta * cfg.tol {
            converged = true;
            break;
        }
        for s in nodes.iter_mut() {
            s.schedule.advance(r.max_eps);
        }
    }
    let p: Vec<f64> = nodes.iter().map(|s| s.p).collect();
    let utility = u.value(&prob.interference_and_sinr(&p)?.gamma)?;
    Ok(DistributedRun { iterations: trace.len(), p, utility, converged, log, trace, nonlocal_reads })
}
