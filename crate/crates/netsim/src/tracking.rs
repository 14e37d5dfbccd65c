//! Power control under block fading.
//!
//! Power updates happen every `power_update_interval_ms`. Three schedules
//! share the same fading realization:
//!
//! * `instant`: at every update instant the iteration is run to convergence
//!   on the current channel, warm-started from the previous powers;
//! * `half_coherence`: one iteration per update instant on the current
//!   channel (two per block with the default 10 ms / 5 ms);
//! * `pathloss_only`: the optimum for the fading-free channel, held fixed.
//!
//! Utility is always evaluated against the true channel of the instant.

use pcsim_core::{solve, InitialPower, NormalizedProblem, Result, SolverConfig, Utility};
use serde::{Deserialize, Serialize};

use crate::channel::evolve_fading;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Instant,
    HalfCoherence,
    PathlossOnly,
}

impl Schedule {
    pub const ALL: [Schedule; 3] = [Schedule::Instant, Schedule::HalfCoherence, Schedule::PathlossOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Schedule::Instant => "instant",
            Schedule::HalfCoherence => "half_coherence",
            Schedule::PathlossOnly => "pathloss_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub n_blocks: usize,
    /// Relative band used for the warm/cold comparison.
    pub band: f64,
    /// Block length used when the scenario has no finite coherence time.
    pub static_block_ms: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self { n_blocks: 100, band: 0.05, static_block_ms: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackPoint {
    pub t_ms: f64,
    pub schedule: Schedule,
    pub utility: f64,
    pub iters_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackSummary {
    pub mean_instant: f64,
    pub mean_half_coherence: f64,
    pub mean_pathloss_only: f64,
    /// Mean iterations to the band of each block's optimum; `None` without
    /// a block boundary (static channel).
    pub warm_mean_iters: Option<f64>,
    pub cold_mean_iters: Option<f64>,
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub points: Vec<TrackPoint>,
    pub summary: TrackSummary,
}

impl TrackResult {
    pub fn csv_header() -> &'static str {
        "t_ms,schedule,utility,iters_used"
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::csv_header());
        s.push('\n');
        for p in &self.points {
            s.push_str(&format!("{},{},{:.12e},{}\n", p.t_ms, p.schedule.as_str(), p.utility, p.iters_used));
        }
        s
    }

    pub fn series(&self, schedule: Schedule) -> Vec<f64> {
        self.points.iter().filter(|p| p.schedule == schedule).map(|p| p.utility).collect()
    }
}

fn utility_at<U: Utility<f64> + ?Sized>(prob: &NormalizedProblem<f64>, u: &U, p: &[f64]) -> Result<f64> {
    u.value(&prob.interference_and_sinr(p)?.gamma)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len().max(1) as f64
}

/// Runs all three schedules over `tcfg.n_blocks` coherence blocks.
/// `base` supplies damping, tolerance and iteration cap.
pub fn tracking_experiment<U: Utility<f64> + ?Sized>(
    sc: &Scenario,
    u: &U,
    base: &SolverConfig<f64>,
    tcfg: &TrackConfig,
) -> Result<TrackResult> {
    sc.cfg.validate_tracking()?;
    let fading = sc.fading_process();
    let block_ms = sc.cfg.coherence_time_ms.unwrap_or(tcfg.static_block_ms);
    let dt = sc.cfg.power_update_interval_ms;
    let horizon = block_ms * tcfg.n_blocks as f64;
    let n_updates = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;

    let quiet = SolverConfig { check_log_concavity: false, ..base.clone() };
    let static_prob = sc.uplink_problem(None)?;
    let static_opt = solve(&static_prob, u, base)?;
    let p_start = static_opt.p.clone();

    let mut p_instant = p_start.clone();
    let mut p_half = p_start.clone();
    let one_step = SolverConfig { max_iter: 1, halving_period: 0, ..quiet.clone() };

    let mut points = Vec::with_capacity(3 * n_updates);
    let mut block_optima: Vec<(u64, Vec<f64>, f64)> = Vec::new();
    let mut current_block = None;
    let mut block_prob = static_prob.clone();
    for k in 0..n_updates {
        let t = k as f64 * dt;
        let blk = evolve_fading(&fading, t);
        if current_block != Some(blk.index) || k == 0 {
            block_prob = sc.uplink_problem(sc.cfg.coherence_time_ms.map(|_| &blk))?;
            current_block = Some(blk.index);
        }
        let prob = &block_prob;

        let inst = solve(prob, u, &quiet.clone().with_p0(InitialPower::Given(p_instant.clone())))?;
        p_instant = inst.p.clone();
        points.push(TrackPoint { t_ms: t, schedule: Schedule::Instant, utility: inst.utility, iters_used: inst.iterations });
        if block_optima.last().map(|b| b.0) != Some(blk.index) {
            block_optima.push((blk.index, inst.p.clone(), inst.utility));
        }

        let half = solve(prob, u, &one_step.clone().with_p0(InitialPower::Given(p_half.clone())))?;
        p_half = half.p;
        points.push(TrackPoint { t_ms: t, schedule: Schedule::HalfCoherence, utility: half.utility, iters_used: 1 });

        points.push(TrackPoint {
            t_ms: t,
            schedule: Schedule::PathlossOnly,
            utility: utility_at(prob, u, &static_opt.p)?,
            iters_used: if k == 0 { static_opt.iterations } else { 0 },
        });
    }

    // Warm start from the previous block's optimum versus a cold restart.
    let (mut warm, mut cold) = (Vec::new(), Vec::new());
    for w in block_optima.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let blk = fading.block(cur.0);
        let prob = sc.uplink_problem(sc.cfg.coherence_time_ms.map(|_| &blk))?;
        let u_star = cur.2;
        let count = |p0: InitialPower<f64>| -> Result<f64> {
            let out = solve(&prob, u, &quiet.clone().with_p0(p0))?;
            let it = out.trace.iterations_to_within(u_star, tcfg.band).unwrap_or(out.iterations);
            Ok(it as f64)
        };
        warm.push(count(InitialPower::Given(prev.1.clone()))?);
        cold.push(count(base.p0.clone())?);
    }

    let summary = TrackSummary {
        mean_instant: mean(&series(&points, Schedule::Instant)),
        mean_half_coherence: mean(&series(&points, Schedule::HalfCoherence)),
        mean_pathloss_only: mean(&series(&points, Schedule::PathlossOnly)),
        warm_mean_iters: (!warm.is_empty()).then(|| mean(&warm)),
        cold_mean_iters: (!cold.is_empty()).then(|| mean(&cold)),
        blocks: block_optima.len(),
    };
    Ok(TrackResult { points, summary })
}

fn series(points: &[TrackPoint], s: Schedule) -> Vec<f64> {
    points.iter().filter(|p| p.schedule == s).map(|p| p.utility).collect()
}
