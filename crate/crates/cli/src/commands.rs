//! Subcommand implementations.

use std::path::PathBuf;

use anyhow::Context;
use pcsim_core::solver::initial_power;
use pcsim_core::utility::{check_log_concavity, diagnose, LOG_CONCAVITY_TOL};
use pcsim_core::verify::{convexity_trials, jacobian_check, kkt_residual, left_eigen_residual, oracle_solve, perron_check, CheckResult, OracleConfig};
use pcsim_core::{solve, InitialPower, SolverConfig, SolverMode, Sweep, Utility};
use pcsim_netsim::relay::{relay_deployment, Routing};
use pcsim_netsim::{build_relay_problem, generate_topology, run_until_converged, tracking_experiment, TopologyConfig, TrackSummary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{config_error, require_scenario, Overrides, RunConfig, UtilityKind};
use crate::manifest::{Output, RunManifest};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Cdf,
    Verify,
    Relay,
    Track,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Cdf => "cdf",
            Command::Verify => "verify",
            Command::Relay => "relay",
            Command::Track => "track",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub command: Command,
    pub config: PathBuf,
    pub seed: u64,
    pub seeds: u64,
    pub out: PathBuf,
    pub overrides: Overrides,
}

impl RunArgs {
    pub fn seed_list(&self) -> Vec<u64> {
        (self.seed..self.seed + self.seeds.max(1)).collect()
    }
}

/// Thread cap from `PCSIM_THREADS`, if set.
fn thread_cap() -> anyhow::Result<Option<usize>> {
    let Ok(v) = std::env::var("PCSIM_THREADS") else { return Ok(None) };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(config_error(format!("PCSIM_THREADS must be a positive integer, got {v:?}"))),
    }
}

fn pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

/// Runs `f` on every seed in parallel and returns results in seed order.
fn sweep<R: Send>(seeds: &[u64], f: impl Fn(u64) -> anyhow::Result<R> + Sync + Send) -> anyhow::Result<Vec<R>> {
    pool()?.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}

/// Runs one subcommand; returns the process exit code.
pub fn run(args: &RunArgs) -> anyhow::Result<i32> {
    thread_cap()?;
    let (cfg, text) = RunConfig::load(&args.config)?;
    let ov = args.overrides;
    let mode = if ov.asynchronous { "async" } else { "sync" };
    let seeds = match args.command {
        Command::Solve | Command::Verify => vec![args.seed],
        _ => args.seed_list(),
    };
    let manifest = RunManifest::new(args.command.as_str(), &args.config, &text, seeds.clone(), &args.out, mode, ov.theta, ov.tol);
    let out = Output::create(&manifest)?;
    match args.command {
        Command::Solve => cmd_solve(&cfg, args.seed, ov, &out),
        Command::Cdf => cmd_cdf(&cfg, &seeds, ov, &out),
        Command::Verify => cmd_verify(&cfg, args.seed, ov, &out),
        Command::Relay => cmd_relay(&cfg, &seeds, ov, &out),
        Command::Track => cmd_track(&cfg, &seeds, ov, &out),
    }
}

fn sweep_name(s: Sweep) -> &'static str {
    match s {
        Sweep::Sync => "sync",
        Sweep::Async(_) => "async",
    }
}

fn mode_name(m: SolverMode) -> &'static str {
    match m {
        SolverMode::UnconstrainedNormalized => "unconstrained_normalized",
        SolverMode::MaxClamped => "max_clamped",
        SolverMode::MinMaxClamped => "min_max_clamped",
    }
}

#[derive(Serialize)]
struct SolveResult {
    utility_name: &'static str,
    seed: u64,
    n_links: usize,
    mode: &'static str,
    sweep: &'static str,
    theta0: f64,
    tol: f64,
    converged: bool,
    iterations: usize,
    utility: f64,
    p: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relayed: Option<Vec<bool>>,
    non_paper_keys: Vec<&'static str>,
}

fn non_paper(cfg: &RunConfig) -> Vec<&'static str> {
    if cfg.scenario.is_some() {
        TopologyConfig::non_paper_keys().to_vec()
    } else {
        Vec::new()
    }
}

fn cmd_solve(cfg: &RunConfig, seed: u64, ov: Overrides, out: &Output) -> anyhow::Result<i32> {
    let inst = cfg.instance(seed)?;
    let scfg = cfg.solver_config(&inst, seed, ov)?;
    let res = solve(&inst.problem, inst.utility.as_ref(), &scfg).map_err(solve_error)?;
    out.csv("trace.csv", &res.trace.to_csv())?;
    out.json(
        "result.json",
        &SolveResult {
            utility_name: inst.utility.name(),
            seed,
            n_links: inst.problem.dim(),
            mode: mode_name(scfg.mode),
            sweep: sweep_name(scfg.sweep),
            theta0: scfg.theta0,
            tol: scfg.tol,
            converged: res.converged,
            iterations: res.iterations,
            utility: res.utility,
            p: res.p,
            relayed: inst.relayed,
            non_paper_keys: non_paper(cfg),
        },
    )?;
    Ok(if res.converged { 0 } else { 2 })
}

/// A utility that fails the log-concavity test is a verification failure;
/// everything else the solver rejects is a configuration problem.
fn solve_error(e: pcsim_core::Error) -> anyhow::Error {
    match e {
        pcsim_core::Error::NotLogConcave { .. } => anyhow::anyhow!(CliError::Verification(e.to_string())),
        other => config_error(other),
    }
}

/// Nearest-rank percentile of a sorted slice.
pub fn percentile(sorted: &[usize], q: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

#[derive(Debug, Clone, Serialize)]
pub struct CdfRow {
    pub seed: u64,
    pub markers: [Option<usize>; 3],
    pub iterations: usize,
    pub converged: bool,
    pub oracle_certified: bool,
    /// Relative KKT residual at the returned powers.
    pub kkt_relative: f64,
}

#[derive(Serialize)]
struct CdfSummary {
    seeds: usize,
    flagged: usize,
    median_iters_5pct: Option<usize>,
    p90_iters_5pct: Option<usize>,
    p90_iters_2pct: Option<usize>,
    p90_iters_1pct: Option<usize>,
    non_paper_keys: Vec<&'static str>,
}

/// Oracle KKT residual accepted as a certificate of optimality.
pub const ORACLE_CERT_KKT: f64 = 1e-6;

pub fn cdf_row(cfg: &RunConfig, seed: u64, ov: Overrides) -> anyhow::Result<CdfRow> {
    let inst = cfg.instance(seed)?;
    let u = inst.utility.as_ref();
    let oracle = oracle_solve(&inst.problem, u, &OracleConfig::default())?;
    let cert = oracle.converged && kkt_residual(&oracle.p, &inst.problem, u)?.relative <= ORACLE_CERT_KKT;
    let scfg = cfg.solver_config(&inst, seed, ov)?.with_p0(InitialPower::Random { seed });
    let res = solve(&inst.problem, u, &scfg).map_err(solve_error)?;
    let kkt_relative = kkt_residual(&res.p, &inst.problem, u)?.relative;
    Ok(CdfRow { seed, markers: res.trace.markers(oracle.utility), iterations: res.iterations, converged: res.converged, oracle_certified: cert, kkt_relative })
}

fn cmd_cdf(cfg: &RunConfig, seeds: &[u64], ov: Overrides, out: &Output) -> anyhow::Result<i32> {
    let rows = sweep(seeds, |s| cdf_row(cfg, s, ov))?;
    let fmt = |m: Option<usize>| m.map_or_else(String::new, |v| v.to_string());
    let mut csv = String::from("seed,iters_5pct,iters_2pct,iters_1pct,flag\n");
    let mut flagged = 0;
    for r in &rows {
        let flag = if !r.oracle_certified {
            "oracle_uncertified"
        } else if r.markers.iter().any(Option::is_none) {
            "band_not_reached"
        } else {
            "ok"
        };
        if flag != "ok" {
            flagged += 1;
        }
        csv.push_str(&format!("{},{},{},{},{flag}\n", r.seed, fmt(r.markers[0]), fmt(r.markers[1]), fmt(r.markers[2])));
    }
    let sorted = |k: usize| {
        let mut v: Vec<usize> = rows.iter().filter_map(|r| r.markers[k]).collect();
        v.sort_unstable();
        v
    };
    let cols = [sorted(0), sorted(1), sorted(2)];
    for (name, q) in [("median", 0.5), ("p90", 0.9)] {
        csv.push_str(&format!("{name},{},{},{},summary\n", fmt(percentile(&cols[0], q)), fmt(percentile(&cols[1], q)), fmt(percentile(&cols[2], q))));
    }
    out.csv("cdf.csv", &csv)?;
    out.json(
        "cdf_summary.json",
        &CdfSummary {
            seeds: rows.len(),
            flagged,
            median_iters_5pct: percentile(&cols[0], 0.5),
            p90_iters_5pct: percentile(&cols[0], 0.9),
            p90_iters_2pct: percentile(&cols[1], 0.9),
            p90_iters_1pct: percentile(&cols[2], 0.9),
            non_paper_keys: non_paper(cfg),
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct VerifyReport {
    utility_name: &'static str,
    seed: u64,
    n_links: usize,
    interference_limited: bool,
    passed: bool,
    checks: Vec<CheckResult>,
}

pub const KKT_TOL: f64 = 1e-8;
pub const ORACLE_REL_TOL: f64 = 1e-6;
pub const CONVEXITY_DRAWS: usize = 1000;

/// All verification checks for one instance.
pub fn verify_checks(cfg: &RunConfig, seed: u64, ov: Overrides) -> anyhow::Result<(Vec<CheckResult>, bool, &'static str, usize)> {
    let inst = cfg.instance(seed)?;
    let prob = &inst.problem;
    let u = inst.utility.as_ref();
    let n = prob.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let limited = prob.is_interference_limited();

    let diag = diagnose::<f64, _, _>(u, n, &mut rng)?;
    checks.push(CheckResult::at_most("log_concavity_sampled", diag.worst_violation, LOG_CONCAVITY_TOL));
    if !checks[0].passed {
        return Ok((checks, limited, u.name(), n));
    }
    let scfg = cfg.solver_config(&inst, seed, ov)?;
    let p0 = initial_power(prob, &scfg)?;
    let (_, worst) = check_log_concavity(u, &prob.interference_and_sinr(&p0)?.gamma)?;
    checks.push(CheckResult::at_most("log_concavity_at_p0", worst, LOG_CONCAVITY_TOL));
    if checks.iter().any(|c| !c.passed) {
        return Ok((checks, limited, u.name(), n));
    }

    let res = solve(prob, u, &scfg).map_err(solve_error)?;
    checks.push(CheckResult::at_least("solver_converged", f64::from(u8::from(res.converged)), 1.0));
    checks.push(CheckResult::at_most("kkt_relative", kkt_residual(&res.p, prob, u)?.relative, KKT_TOL));
    let oracle = oracle_solve(prob, u, &OracleConfig::default())?;
    checks.push(CheckResult::at_most("oracle_relative_gap", (res.utility - oracle.utility).abs() / oracle.utility.abs().max(f64::MIN_POSITIVE), ORACLE_REL_TOL));

    // log-sum-exp convexity of every interference constraint's first row
    let v = pcsim_core::linalg::densify(prob.v());
    let conv = convexity_trials(v.row(0), prob.zeta()[0], CONVEXITY_DRAWS, &mut rng);
    checks.push(CheckResult::at_most("convexity_violations", conv.violations as f64, 0.0));

    if limited {
        let p: Vec<f64> = pcsim_core::random::positive_vector(n, &mut rng);
        let pc = perron_check(prob, &p)?;
        checks.push(CheckResult::at_most("perron_radius_error", (pc.rho - 1.0).abs(), 1e-10));
        checks.push(CheckResult::at_most("perron_misalignment", pc.misalignment, 1e-10));
        checks.push(CheckResult::at_most("left_eigen_residual", left_eigen_residual(prob, u, &res.p)?, 1e-6));
        let b = pcsim_core::solver::resolve_b(u, n)?;
        let j = jacobian_check(&res.p, prob, u, &[0.1, 0.5, 1.0], b)?;
        checks.push(CheckResult::at_most("jacobian_sym_max_eig", j.sym_max_eig, 1e-6));
        checks.push(CheckResult::at_least("jacobian_sym_min_eig_margin", j.sym_min_eig - j.sym_lower_bound, -1e-3));
        checks.push(CheckResult::at_most("jacobian_zero_mode_misalignment", j.zero_mode_misalignment, 1e-6));
        let scale = j.scale_line.iter().map(|&(_, e)| e).fold(0.0, f64::max);
        checks.push(CheckResult::at_most("scale_line_error", scale, 1e-4));
        checks.push(CheckResult::at_most("jacobian_failures", j.failures.len() as f64, 0.0));
    }
    Ok((checks, limited, u.name(), n))
}

fn cmd_verify(cfg: &RunConfig, seed: u64, ov: Overrides, out: &Output) -> anyhow::Result<i32> {
    let (checks, limited, name, n) = verify_checks(cfg, seed, ov)?;
    let passed = checks.iter().all(|c| c.passed);
    out.json("verify.json", &VerifyReport { utility_name: name, seed, n_links: n, interference_limited: limited, passed, checks })?;
    Ok(if passed { 0 } else { 3 })
}

#[derive(Debug, Clone, Serialize)]
pub struct RelayRow {
    pub seed: u64,
    pub relayed_users: usize,
    pub no_relay_max: f64,
    pub no_relay_pc: f64,
    pub relay_max: f64,
    pub relay_pc: f64,
    pub no_relay_converged: bool,
    pub relay_converged: bool,
}

/// The four arms for one seed. Both arms share the deployment with relays
/// placed; the no-relay arm routes every user directly.
pub fn relay_row(cfg: &RunConfig, seed: u64, ov: Overrides) -> anyhow::Result<RelayRow> {
    let topo = require_scenario(cfg, "relay")?;
    let rcfg = &cfg.relay;
    let dep = generate_topology(&topo, seed);
    let (dep_r, relayed) = relay_deployment(&dep, &topo, seed, rcfg).map_err(config_error)?;
    let routes = [vec![false; relayed.len()], relayed.clone()];
    let mut arms = [(0.0, 0.0, false); 2];
    for (arm, routing) in routes.iter().enumerate() {
        let (prob, u) = build_relay_problem(&dep_r, &topo, seed, routing, rcfg).map_err(config_error)?;
        let pmax = prob.p_max().expect("relay problems are boxed").to_vec();
        let at_max = u.value(&prob.interference_and_sinr(&pmax)?.gamma)?;
        let theta = ov.theta.or(cfg.solver.theta).or(rcfg.theta);
        let mut scfg = SolverConfig::new(SolverMode::MinMaxClamped).with_p0(InitialPower::Max).with_max_iter(cfg.solver.max_iter);
        scfg.theta0 = match theta {
            Some(t) => t,
            None => pcsim_core::solver::default_theta0(pcsim_core::solver::resolve_b(&u, prob.dim())?),
        };
        scfg.tol = ov.tol.unwrap_or(cfg.solver.tol);
        scfg.check_log_concavity = false;
        if ov.asynchronous {
            scfg.sweep = Sweep::Async(pcsim_core::solver::AsyncOrder::Ascending);
        }
        let res = solve(&prob, &u, &scfg).map_err(solve_error)?;
        arms[arm] = (at_max, res.utility, res.converged);
    }
    Ok(RelayRow {
        seed,
        relayed_users: relayed.iter().filter(|&&r| r).count(),
        no_relay_max: arms[0].0,
        no_relay_pc: arms[0].1,
        relay_max: arms[1].0,
        relay_pc: arms[1].1,
        no_relay_converged: arms[0].2,
        relay_converged: arms[1].2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaySummary {
    pub seeds: usize,
    pub mean_no_relay_max: f64,
    pub mean_no_relay_pc: f64,
    pub mean_relay_max: f64,
    pub mean_relay_pc: f64,
    pub relay_pc_beats_relay_max: bool,
    pub relay_pc_beats_no_relay_pc: bool,
    pub relaying_helps: bool,
    /// Seeds where a power-control arm ends below its max-power arm by more than 1e-9.
    pub pc_below_max: usize,
    pub pc_not_converged: usize,
}

pub fn relay_summary(rows: &[RelayRow]) -> RelaySummary {
    let n = rows.len().max(1) as f64;
    let mean = |f: fn(&RelayRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let (a, b, c, d) = (mean(|r| r.no_relay_max), mean(|r| r.no_relay_pc), mean(|r| r.relay_max), mean(|r| r.relay_pc));
    RelaySummary {
        seeds: rows.len(),
        mean_no_relay_max: a,
        mean_no_relay_pc: b,
        mean_relay_max: c,
        mean_relay_pc: d,
        relay_pc_beats_relay_max: d > c,
        relay_pc_beats_no_relay_pc: d > b,
        relaying_helps: (c + d) > (a + b),
        pc_below_max: rows.iter().filter(|r| r.no_relay_pc < r.no_relay_max - 1e-9 || r.relay_pc < r.relay_max - 1e-9).count(),
        pc_not_converged: rows.iter().map(|r| usize::from(!r.no_relay_converged) + usize::from(!r.relay_converged)).sum(),
    }
}

fn cmd_relay(cfg: &RunConfig, seeds: &[u64], ov: Overrides, out: &Output) -> anyhow::Result<i32> {
    require_scenario(cfg, "relay")?;
    if let Routing::Explicit(v) = &cfg.relay.routing {
        let n = cfg.scenario.as_ref().map_or(0, TopologyConfig::n_users);
        if v.len() != n {
            return Err(config_error(format!("relay.routing lists {} users, scenario has {n}", v.len())));
        }
    }
    let rows = sweep(seeds, |s| relay_row(cfg, s, ov))?;
    let mut csv = String::from("seed,relayed_users,no_relay_max,no_relay_pc,relay_max,relay_pc,no_relay_converged,relay_converged\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{}\n",
            r.seed, r.relayed_users, r.no_relay_max, r.no_relay_pc, r.relay_max, r.relay_pc, r.no_relay_converged, r.relay_converged
        ));
    }
    out.csv("relay.csv", &csv)?;
    out.json("relay_summary.json", &relay_summary(&rows))?;
    Ok(0)
}

#[derive(Serialize)]
struct TrackSeed {
    seed: u64,
    summary: TrackSummary,
    messages_per_iteration: usize,
    distributed_iterations: usize,
    distributed_converged: bool,
    nonlocal_reads: usize,
}

#[derive(Serialize)]
struct TrackReport {
    seeds: Vec<TrackSeed>,
    mean_instant: f64,
    mean_half_coherence: f64,
    mean_pathloss_only: f64,
    non_paper_keys: Vec<&'static str>,
}

fn cmd_track(cfg: &RunConfig, seeds: &[u64], ov: Overrides, out: &Output) -> anyhow::Result<i32> {
    require_scenario(cfg, "track")?;
    if cfg.utility == UtilityKind::Relay {
        return Err(config_error("track runs the direct uplink; use \"log_rate\" or \"sum_log_sinr\""));
    }
    let results = sweep(seeds, |seed| {
        let inst = cfg.instance(seed)?;
        let sc = inst.scenario.as_ref().context("scenario instance")?;
        let base = cfg.solver_config(&inst, seed, ov)?;
        let tr = tracking_experiment(sc, inst.utility.as_ref(), &base, &cfg.track).map_err(config_error)?;
        let sync = SolverConfig { sweep: Sweep::Sync, ..base };
        let gains = inst.gains.as_ref().context("uplink gains")?;
        let dist = run_until_converged(gains, &inst.bounds, inst.utility.as_ref(), &sync, cfg.signaling).map_err(config_error)?;
        Ok((seed, tr, dist))
    })?;
    let mut report = Vec::new();
    for (seed, tr, dist) in &results {
        out.csv(&format!("track_seed{seed}.csv"), &tr.to_csv())?;
        out.csv(&format!("messages_seed{seed}.csv"), &dist.log.to_csv())?;
        report.push(TrackSeed {
            seed: *seed,
            summary: tr.summary.clone(),
            messages_per_iteration: dist.log.per_iteration().first().copied().unwrap_or(0),
            distributed_iterations: dist.iterations,
            distributed_converged: dist.converged,
            nonlocal_reads: dist.nonlocal_reads,
        });
    }
    let n = report.len().max(1) as f64;
    let mean = |f: fn(&TrackSummary) -> f64| report.iter().map(|r| f(&r.summary)).sum::<f64>() / n;
    let summary = TrackReport {
        mean_instant: mean(|s| s.mean_instant),
        mean_half_coherence: mean(|s| s.mean_half_coherence),
        mean_pathloss_only: mean(|s| s.mean_pathloss_only),
        seeds: report,
        non_paper_keys: non_paper(cfg),
    };
    out.json("track_summary.json", &summary)?;
    Ok(0)
}
