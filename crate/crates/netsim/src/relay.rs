//! Two-slot decode-and-forward relaying mapped onto one stacked problem.
//!
//! With `U` users the stacked problem has `2U` links. Link `u` is user `u`'s
//! slot-1 transmission (to its cell's relay when relayed, else to its base
//! station); link `U + u` is the slot-2 transmission (relay to base station,
//! or the user again). A relayed stream keeps its user's subchannel. Links
//! only interfere within their slot and subchannel, up to small leakage
//! factors that keep every coupling strictly positive.

use pcsim_core::{Error, NormalizedProblem, PowerBounds, RelayRoute, RelayUtility, Result, POWER_FLOOR_W};
use serde::{Deserialize, Serialize};

use crate::channel::{subchannels, Channel, Link};
use crate::config::{db_to_linear, ChannelAccess, TopologyConfig};
use crate::topology::{distance, Deployment, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routing {
    /// Users whose direct gain is below the network median are relay
    /// candidates; a candidate is relayed when both hops beat its direct
    /// large-scale gain by `relay_margin_db`.
    Auto,
    AllDirect,
    /// One flag per user, `true` for relayed.
    Explicit(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelayConfig {
    pub gamma_gap_db: f64,
    pub smooth_min_k: f64,
    /// Coupling between links in different slots, relative to the physical gain.
    pub slot_leakage: f64,
    /// Relay distance from the base station as a fraction of the cell radius.
    pub relay_distance_fraction: f64,
    pub relay_margin_db: f64,
    pub routing: Routing,
    /// Damping for the relay problem; `None` derives it from the sampled curvature bound.
    pub theta: Option<f64>,
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self {
            gamma_gap_db: 7.0,
            smooth_min_k: 5.0,
            slot_leakage: 1e-12,
            relay_distance_fraction: 0.5,
            relay_margin_db: 6.0,
            routing: Routing::Auto,
            theta: Some(0.5),
        }
    }
}

impl RelayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_gap_db >= 0.0 && self.gamma_gap_db.is_finite()) {
            return Err(Error::Config("relay.gamma_gap_db must be a non-negative number".into()));
        }
        if !(self.smooth_min_k > 0.0 && self.smooth_min_k.is_finite()) {
            return Err(Error::Config("relay.smooth_min_k must be positive".into()));
        }
        if !(self.slot_leakage > 0.0 && self.slot_leakage < 1.0) {
            return Err(Error::Config("relay.slot_leakage must lie in (0, 1)".into()));
        }
        if !(self.relay_distance_fraction > 0.0 && self.relay_distance_fraction < 1.0) {
            return Err(Error::Config("relay.relay_distance_fraction must lie in (0, 1)".into()));
        }
        if !self.relay_margin_db.is_finite() {
            return Err(Error::Config("relay.relay_margin_db must be finite".into()));
        }
        if let Some(t) = self.theta {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config("relay.theta must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Users whose large-scale direct gain is below the network median.
pub fn median_candidates(dep: &Deployment, cfg: &TopologyConfig, seed: u64) -> Result<Vec<bool>> {
    let bare = Deployment { relays: None, ..dep.clone() };
    let ch = Channel::new(&bare, cfg, seed)?;
    let direct: Vec<f64> = dep.serving.iter().enumerate().map(|(u, &c)| ch.gain(c, u, None)).collect();
    let mut sorted = direct.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    Ok(direct.iter().map(|&g| g < median).collect())
}

/// Keeps the candidates whose weaker hop (user to relay, relay to base
/// station) exceeds the direct gain by `margin_db`.
pub fn two_hop_filter(dep: &Deployment, cfg: &TopologyConfig, seed: u64, candidates: &[bool], margin_db: f64) -> Result<Vec<bool>> {
    let ch = Channel::new(dep, cfg, seed)?;
    if !ch.has_relays() {
        return Err(Error::Config("two-hop routing needs relays".into()));
    }
    let margin = db_to_linear(margin_db);
    Ok(candidates
        .iter()
        .enumerate()
        .map(|(u, &cand)| {
            let c = dep.serving[u];
            let direct = ch.gain(ch.base_station_rx(c), u, None);
            let hop1 = ch.gain(ch.relay_rx(c), u, None);
            let hop2 = ch.gain(ch.base_station_rx(c), ch.relay_tx(c), None);
            cand && hop1.min(hop2) >= margin * direct
        })
        .collect())
}

/// Deployment with relays placed and the per-user relay flags.
pub fn relay_deployment(dep: &Deployment, cfg: &TopologyConfig, seed: u64, rcfg: &RelayConfig) -> Result<(Deployment, Vec<bool>)> {
    let n = dep.n_users();
    match &rcfg.routing {
        Routing::Auto => {
            let cand = median_candidates(dep, cfg, seed)?;
            let with = place_relays(dep, &cand, rcfg.relay_distance_fraction);
            let relayed = two_hop_filter(&with, cfg, seed, &cand, rcfg.relay_margin_db)?;
            Ok((with, relayed))
        }
        Routing::AllDirect => Ok((place_relays(dep, &vec![false; n], rcfg.relay_distance_fraction), vec![false; n])),
        Routing::Explicit(v) if v.len() == n => Ok((place_relays(dep, v, rcfg.relay_distance_fraction), v.clone())),
        Routing::Explicit(v) => Err(Error::Config(format!("relay.routing lists {} users, deployment has {}", v.len(), n))),
    }
}

/// One relay per cell, `fraction·R` from the base station in the direction of
/// the centroid of the cell's relayed users (along +x if it has none).
pub fn place_relays(dep: &Deployment, relayed: &[bool], fraction: f64) -> Deployment {
    let r = dep.cell_radius_m * fraction;
    let relays = (0..dep.n_cells())
        .map(|c| {
            let bs = dep.base_stations[c];
            let members: Vec<Point> = dep.users_in_cell(c).filter(|&u| relayed[u]).map(|u| dep.users[u]).collect();
            let mut dir = [1.0, 0.0];
            if !members.is_empty() {
                let k = members.len() as f64;
                let cx = members.iter().map(|p| p[0]).sum::<f64>() / k - bs[0];
                let cy = members.iter().map(|p| p[1]).sum::<f64>() / k - bs[1];
                let len = cx.hypot(cy);
                if len > 0.0 {
                    dir = [cx / len, cy / len];
                }
            }
            [bs[0] + r * dir[0], bs[1] + r * dir[1]]
        })
        .collect();
    Deployment { relays: Some(relays), ..dep.clone() }
}

/// Stacked link list in the layout described in the module docs.
pub fn relay_links(dep: &Deployment, ch: &Channel, relayed: &[bool], access: ChannelAccess) -> Result<Vec<Link>> {
    if relayed.iter().any(|&r| r) && !ch.has_relays() {
        return Err(Error::Config("routing relays a user but the deployment has no relays".into()));
    }
    let n = dep.n_users();
    let sub = subchannels(dep, access);
    let mut links = Vec::with_capacity(2 * n);
    for u in 0..n {
        let c = dep.serving[u];
        let rx = if relayed[u] { ch.relay_rx(c) } else { ch.base_station_rx(c) };
        links.push(Link { tx: u, rx, slot: 0, subchannel: sub[u] });
    }
    for u in 0..n {
        let c = dep.serving[u];
        let tx = if relayed[u] { ch.relay_tx(c) } else { u };
        links.push(Link { tx, rx: ch.base_station_rx(c), slot: 1, subchannel: sub[u] });
    }
    Ok(links)
}

pub fn relay_routes(relayed: &[bool]) -> Vec<RelayRoute> {
    let n = relayed.len();
    relayed
        .iter()
        .enumerate()
        .map(|(u, &r)| if r { RelayRoute::Relayed { access: u, forward: n + u } } else { RelayRoute::Direct { slot1: u, slot2: n + u } })
        .collect()
}

/// The stacked `2U`-link problem (box `[ε_p, p_max]` on every link) and its
/// relay utility. `dep` must carry relays whenever `relayed` has a `true`.
pub fn build_relay_problem(
    dep: &Deployment,
    cfg: &TopologyConfig,
    seed: u64,
    relayed: &[bool],
    rcfg: &RelayConfig,
) -> Result<(NormalizedProblem<f64>, RelayUtility<f64>)> {
    rcfg.validate()?;
    if relayed.len() != dep.n_users() {
        return Err(Error::Config(format!("routing lists {} users, deployment has {}", relayed.len(), dep.n_users())));
    }
    let ch = Channel::new(dep, cfg, seed)?;
    let links = relay_links(dep, &ch, relayed, cfg.channel_access)?;
    let gains = ch.link_gains(&links, None, rcfg.slot_leakage)?;
    let n = links.len();
    let bounds = PowerBounds::boxed(vec![POWER_FLOOR_W; n], vec![cfg.p_max_w(); n]);
    let prob = NormalizedProblem::normalize(&gains, bounds)?;
    let u = RelayUtility::new(relay_routes(relayed), n, db_to_linear(rcfg.gamma_gap_db), rcfg.smooth_min_k)?;
    Ok((prob, u))
}

/// Mean relay-to-base-station distance, for reporting.
pub fn mean_relay_offset(dep: &Deployment) -> Option<f64> {
    let r = dep.relays.as_ref()?;
    Some(r.iter().zip(&dep.base_stations).map(|(a, b)| distance(*a, *b)).sum::<f64>() / r.len() as f64)
}
