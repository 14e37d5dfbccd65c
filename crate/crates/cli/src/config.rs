//! Run configuration files.
//!
//! ```json
//! {
//!   "utility": "log_rate",
//!   "gamma_gap_db": 7.0,
//!   "scenario": { "n_cells": 7, "coherence_time_ms": 10.0 },
//!   "solver": { "tol": 1e-9 },
//!   "relay": { "routing": "auto" },
//!   "track": { "n_blocks": 100 }
//! }
//! ```
//!
//! Exactly one of `"problem"` (explicit gains, see `pcsim_core::io`) and
//! `"scenario"` (generated network) must be present.

use std::path::Path;

use anyhow::{anyhow, bail};
use pcsim_core::io::ProblemDoc;
use pcsim_core::solver::{resolve_b, default_theta0, AsyncOrder, HalvingRule, DEFAULT_HALVING_PERIOD, DEFAULT_MAX_ITER, DEFAULT_TOL};
use pcsim_core::utility::SumSinr;
use pcsim_core::{InitialPower, LinkGains, LogRate, NormalizedProblem, PowerBounds, SolverConfig, SolverMode, SumLogSinr, Sweep, Utility};
use pcsim_netsim::relay::relay_deployment;
use pcsim_netsim::{build_relay_problem, RelayConfig, Scenario, Signaling, TopologyConfig, TrackConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    SumLogSinr,
    LogRate,
    Relay,
    /// Not log-concave; accepted so that `verify` can demonstrate the check failing.
    SumSinr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    #[default]
    Default,
    Max,
    Ones,
    /// Uniform in `[0.01, 1]·p_max`, seeded by the run seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Halving {
    #[default]
    OnStall,
    Unconditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Initial damping; `None` derives it from the utility's curvature bound.
    pub theta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub halving_period: usize,
    pub halving: Halving,
    pub p0: StartPoint,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { theta: None, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, halving_period: DEFAULT_HALVING_PERIOD, halving: Halving::OnStall, p0: StartPoint::Default }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub utility: UtilityKind,
    #[serde(default = "default_gap_db")]
    pub gamma_gap_db: f64,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub problem: Option<ProblemDoc>,
    #[serde(default)]
    pub scenario: Option<TopologyConfig>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub relay: RelayConfig,
    #[serde(default)]
    pub track: TrackConfig,
    #[serde(default = "default_signaling")]
    pub signaling: Signaling,
}

fn default_gap_db() -> f64 {
    7.0
}

fn default_signaling() -> Signaling {
    Signaling::General
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub asynchronous: bool,
    pub theta: Option<f64>,
    pub tol: Option<f64>,
}

/// A concrete problem instance for one seed.
pub struct Instance {
    pub problem: NormalizedProblem<f64>,
    /// Physical gains, kept for the distributed simulation.
    pub gains: Option<LinkGains<f64>>,
    pub bounds: PowerBounds<f64>,
    pub utility: Box<dyn Utility<f64>>,
    pub scenario: Option<Scenario>,
    /// Relay flags when the utility is the relay model.
    pub relayed: Option<Vec<bool>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Ok((Self::from_json(&text)?, text))
    }

    fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |m: String| Err(CliError::Config(m));
        match (&self.problem, &self.scenario) {
            (Some(_), Some(_)) => return cfg_err("config: \"problem\" and \"scenario\" are mutually exclusive".into()),
            (None, None) => return cfg_err("config: one of \"problem\" or \"scenario\" is required".into()),
            _ => {}
        }
        if let Some(s) = &self.scenario {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.utility == UtilityKind::Relay && self.scenario.is_none() {
            return cfg_err("config: \"utility\": \"relay\" needs a \"scenario\"".into());
        }
        if !(self.gamma_gap_db >= 0.0 && self.gamma_gap_db.is_finite()) {
            return cfg_err("config: \"gamma_gap_db\" must be a non-negative number".into());
        }
        if let Some(t) = self.solver.theta {
            if !(t > 0.0 && t <= 1.0) {
                return cfg_err("config: \"solver.theta\" must lie in (0, 1]".into());
            }
        }
        if !(self.solver.tol > 0.0) {
            return cfg_err("config: \"solver.tol\" must be positive".into());
        }
        self.relay.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Problem, gains and utility for one seed.
    pub fn instance(&self, seed: u64) -> anyhow::Result<Instance> {
        if let Some(doc) = &self.problem {
            let gains = doc.gains::<f64>().map_err(config_error)?;
            let bounds = doc.bounds::<f64>();
            let problem = NormalizedProblem::normalize(&gains, bounds.clone()).map_err(config_error)?;
            let utility = self.plain_utility(problem.dim())?;
            return Ok(Instance { problem, gains: Some(gains), bounds, utility, scenario: None, relayed: None });
        }
        let topo = self.scenario.as_ref().expect("validated");
        let sc = Scenario::generate(topo, seed).map_err(config_error)?;
        if self.utility == UtilityKind::Relay {
            let (dep, relayed) = relay_deployment(&sc.dep, topo, seed, &self.relay).map_err(config_error)?;
            let (problem, u) = build_relay_problem(&dep, topo, seed, &relayed, &self.relay).map_err(config_error)?;
            let u = match &self.weights {
                Some(w) => u.with_weights(w.clone()).map_err(config_error)?,
                None => u,
            };
            let bounds = problem.bounds();
            return Ok(Instance { problem, gains: None, bounds, utility: Box::new(u), scenario: Some(sc), relayed: Some(relayed) });
        }
        let gains = sc.uplink_gains(None)?;
        let bounds = sc.bounds();
        let problem = NormalizedProblem::normalize(&gains, bounds.clone())?;
        let utility = self.plain_utility(problem.dim())?;
        Ok(Instance { problem, gains: Some(gains), bounds, utility, scenario: Some(sc), relayed: None })
    }

    /// Non-relay utility for `n` links.
    pub fn plain_utility(&self, n: usize) -> anyhow::Result<Box<dyn Utility<f64>>> {
        if let Some(w) = &self.weights {
            if w.len() != n {
                return Err(config_error(format!("\"weights\" has {} entries, problem has {n} links", w.len())));
            }
        }
        let gap = 10f64.powf(self.gamma_gap_db / 10.0);
        Ok(match self.utility {
            UtilityKind::SumLogSinr => match &self.weights {
                Some(w) => Box::new(SumLogSinr::weighted(w.clone()).map_err(config_error)?),
                None => Box::new(SumLogSinr::new()),
            },
            UtilityKind::LogRate => {
                let u = LogRate::new(gap).map_err(config_error)?;
                match &self.weights {
                    Some(w) => Box::new(u.with_weights(w.clone()).map_err(config_error)?),
                    None => Box::new(u),
                }
            }
            UtilityKind::SumSinr => Box::new(SumSinr),
            UtilityKind::Relay => return Err(config_error("relay utility needs a scenario")),
        })
    }

    /// Solver settings for an instance; the relay model defaults to the
    /// clamped mode from `p_max` with the relay damping.
    pub fn solver_config(&self, inst: &Instance, seed: u64, ov: Overrides) -> anyhow::Result<SolverConfig<f64>> {
        let s = &self.solver;
        let mut cfg = SolverConfig::new(SolverMode::for_problem(&inst.problem));
        let theta = ov.theta.or(s.theta).or(if self.utility == UtilityKind::Relay { self.relay.theta } else { None });
        cfg.theta0 = match theta {
            Some(t) => t,
            None => default_theta0(resolve_b(inst.utility.as_ref(), inst.problem.dim())?),
        };
        if !(cfg.theta0 > 0.0 && cfg.theta0 <= 1.0) {
            return Err(config_error(format!("theta must lie in (0, 1], got {}", cfg.theta0)));
        }
        cfg.tol = ov.tol.unwrap_or(s.tol);
        if !(cfg.tol > 0.0) {
            return Err(config_error("tol must be positive"));
        }
        cfg.max_iter = s.max_iter;
        cfg.halving_period = s.halving_period;
        cfg.halving = match s.halving {
            Halving::OnStall => HalvingRule::OnStall,
            Halving::Unconditional => HalvingRule::Unconditional,
        };
        cfg.p0 = match s.p0 {
            StartPoint::Default => InitialPower::Default,
            StartPoint::Max => InitialPower::Max,
            StartPoint::Ones => InitialPower::Ones,
            StartPoint::Random => InitialPower::Random { seed },
        };
        if self.utility == UtilityKind::Relay {
            // the smoothed relay rate is log-concave only where both hops
            // exceed 1/k, which p0 need not satisfy
            cfg.check_log_concavity = false;
        }
        if ov.asynchronous {
            cfg.sweep = Sweep::Async(AsyncOrder::Ascending);
        }
        Ok(cfg)
    }
}

pub fn config_error(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow!(CliError::Config(e.to_string()))
}

pub fn require_scenario(cfg: &RunConfig, what: &str) -> anyhow::Result<TopologyConfig> {
    match &cfg.scenario {
        Some(s) => Ok(s.clone()),
        None => bail!(CliError::Config(format!("{what} needs a \"scenario\" section"))),
    }
}
