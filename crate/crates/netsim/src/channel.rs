//! Path loss, log-normal shadowing and block Rayleigh fading.
//!
//! Every transmitter/receiver node pair has one large-scale gain
//! `G_ant·G_ref·(d/d₀)^(−n)·10^(X/10)` with `X ~ N(0, σ²)` dB, drawn once per
//! seed. Block fading multiplies it by a unit-mean exponential factor that is
//! redrawn independently at every coherence-block boundary.

use pcsim_core::{Error, LinkGains, Matrix, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::config::{db_to_linear, ChannelAccess, TopologyConfig};
use crate::topology::{distance, Deployment, Point, STREAM_FADING_BASE, STREAM_SHADOWING, STREAM_SHADOWING_RELAY};

/// Below this transmitter/receiver separation (metres) nodes count as colocated.
pub const COLOCATION_M: f64 = 1e-6;

/// Indices into [`Channel`]'s transmitter and receiver node lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub tx: usize,
    pub rx: usize,
    /// Time slot; links in different slots are orthogonal up to the slot leakage.
    pub slot: usize,
    /// Subchannel; links on different subchannels are orthogonal up to the subchannel leakage.
    pub subchannel: usize,
}

/// Large-scale gains between all transmitter nodes (users, then relays) and
/// all receiver nodes (base stations, then relays).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    n_users: usize,
    n_cells: usize,
    has_relays: bool,
    /// `large_scale[(rx, tx)]`.
    large_scale: Matrix<f64>,
    shadowing_db: Matrix<f64>,
    noise_w: f64,
    kappa_si: f64,
    subchannel_leakage: f64,
}

pub fn pathloss_gain(cfg: &TopologyConfig, d: f64) -> Result<f64> {
    if !(d > COLOCATION_M) {
        return Err(Error::Domain(format!("colocated transmitter and receiver (distance {d} m)")));
    }
    Ok(cfg.reference_gain() * (d / cfg.reference_distance_m).powf(-cfg.pathloss_exponent))
}

fn shadowing_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Channel {
    /// Shadowing is drawn in a fixed (rx, tx) order over the full node set, so
    /// adding or ignoring relays never changes the user/base-station draws.
    pub fn new(dep: &Deployment, cfg: &TopologyConfig, seed: u64) -> Result<Self> {
        let (tx, rx) = nodes(dep);
        let n_cells = dep.n_cells();
        let n_users = dep.n_users();
        let mut rng = shadowing_rng(seed, STREAM_SHADOWING);
        let mut shadowing_db = Matrix::zeros(rx.len(), tx.len());
        let sigma = cfg.shadowing_sigma_db;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        };
        for r in 0..n_cells {
            for t in 0..n_users {
                shadowing_db[(r, t)] = draw(&mut rng);
            }
        }
        if rx.len() > n_cells {
            let mut rng = shadowing_rng(seed, STREAM_SHADOWING_RELAY);
            for r in 0..rx.len() {
                for t in 0..tx.len() {
                    if r >= n_cells || t >= n_users {
                        shadowing_db[(r, t)] = draw(&mut rng);
                    }
                }
            }
        }
        let mut large_scale = Matrix::zeros(rx.len(), tx.len());
        for (r, &pr) in rx.iter().enumerate() {
            for (t, &pt) in tx.iter().enumerate() {
                if is_same_relay(r, t, n_cells, n_users) {
                    continue;
                }
                let d = distance(pr, pt);
                large_scale[(r, t)] = pathloss_gain(cfg, d)? * db_to_linear(shadowing_db[(r, t)]);
            }
        }
        // A relay never hears its own slot-2 transmission in slot 1; the entry
        // only enters through slot leakage, so use the weakest physical gain.
        let weakest = (0..rx.len())
            .flat_map(|r| (0..tx.len()).map(move |t| (r, t)))
            .filter(|&(r, t)| !is_same_relay(r, t, n_cells, n_users))
            .map(|(r, t)| large_scale[(r, t)])
            .fold(f64::INFINITY, f64::min);
        for c in 0..dep.relays.as_ref().map_or(0, Vec::len) {
            large_scale[(n_cells + c, n_users + c)] = weakest;
        }
        Ok(Self {
            n_users,
            n_cells,
            has_relays: dep.relays.is_some(),
            large_scale,
            shadowing_db,
            noise_w: cfg.noise_w(),
            kappa_si: cfg.kappa_si,
            subchannel_leakage: cfg.subchannel_leakage,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.large_scale.cols()
    }

    pub fn n_rx(&self) -> usize {
        self.large_scale.rows()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn has_relays(&self) -> bool {
        self.has_relays
    }

    pub fn base_station_rx(&self, cell: usize) -> usize {
        cell
    }

    pub fn relay_rx(&self, cell: usize) -> usize {
        self.n_cells + cell
    }

    pub fn relay_tx(&self, cell: usize) -> usize {
        self.n_users + cell
    }

    pub fn shadowing_db(&self) -> &Matrix<f64> {
        &self.shadowing_db
    }

    /// Large-scale gain times the current fading factor.
    pub fn gain(&self, rx: usize, tx: usize, fading: Option<&FadingBlock>) -> f64 {
        self.large_scale[(rx, tx)] * fading.map_or(1.0, |f| f.gains[(rx, tx)])
    }

    /// Link-level gains. `H_ii = κ_si·h_i`; links in different slots or on
    /// different subchannels couple through the leakage factors times their
    /// physical gain.
    pub fn link_gains(&self, links: &[Link], fading: Option<&FadingBlock>, slot_leakage: f64) -> Result<LinkGains<f64>> {
        let n = links.len();
        let h: Vec<f64> = links.iter().map(|l| self.gain(l.rx, l.tx, fading)).collect();
        let cross = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                return self.kappa_si * h[i];
            }
            let (li, lj) = (links[i], links[j]);
            let mut g = self.gain(li.rx, lj.tx, fading);
            if li.slot != lj.slot {
                g *= slot_leakage;
            }
            if li.subchannel != lj.subchannel {
                g *= self.subchannel_leakage;
            }
            g
        });
        LinkGains::new(h, cross, vec![self.noise_w; n])
    }
}

fn is_same_relay(rx: usize, tx: usize, n_cells: usize, n_users: usize) -> bool {
    rx >= n_cells && tx >= n_users && rx - n_cells == tx - n_users
}

/// Transmitter positions (users, then relays) and receiver positions (base
/// stations, then relays).
pub fn nodes(dep: &Deployment) -> (Vec<Point>, Vec<Point>) {
    let mut tx = dep.users.clone();
    let mut rx = dep.base_stations.clone();
    if let Some(r) = &dep.relays {
        tx.extend_from_slice(r);
        rx.extend_from_slice(r);
    }
    (tx, rx)
}

/// Subchannel of every user: its rank among its cell's users under OFDM,
/// zero for shared access.
pub fn subchannels(dep: &Deployment, access: ChannelAccess) -> Vec<usize> {
    let mut next = vec![0usize; dep.n_cells()];
    dep.serving
        .iter()
        .map(|&c| match access {
            ChannelAccess::Shared => 0,
            ChannelAccess::Ofdm => {
                next[c] += 1;
                next[c] - 1
            }
        })
        .collect()
}

/// Uplink links: user `i` to its serving base station, all in one slot.
pub fn uplink_links(dep: &Deployment, access: ChannelAccess) -> Vec<Link> {
    let sub = subchannels(dep, access);
    dep.serving.iter().enumerate().map(|(u, &c)| Link { tx: u, rx: c, slot: 0, subchannel: sub[u] }).collect()
}

/// Uplink gains of every user to its serving base station.
pub fn channel_gains(dep: &Deployment, cfg: &TopologyConfig, seed: u64, fading: Option<&FadingBlock>) -> Result<LinkGains<f64>> {
    Channel::new(dep, cfg, seed)?.link_gains(&uplink_links(dep, cfg.channel_access), fading, 1.0)
}

/// Fading factors in force during one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingBlock {
    pub index: u64,
    /// `gains[(rx, tx)]`, unit-mean exponential.
    pub gains: Matrix<f64>,
}

/// Piecewise-constant block fading. `coherence_ms = None` is a static
/// channel whose factors are all one.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingProcess {
    pub coherence_ms: Option<f64>,
    pub seed: u64,
    pub n_rx: usize,
    pub n_tx: usize,
}

impl FadingProcess {
    pub fn new(coherence_ms: Option<f64>, seed: u64, channel: &Channel) -> Self {
        Self { coherence_ms, seed, n_rx: channel.n_rx(), n_tx: channel.n_tx() }
    }

    pub fn block_index(&self, t_ms: f64) -> u64 {
        match self.coherence_ms {
            Some(c) => (t_ms / c).floor() as u64,
            None => 0,
        }
    }

    /// The block of factors with index `k`; independent across `k`.
    pub fn block(&self, k: u64) -> FadingBlock {
        if self.coherence_ms.is_none() {
            return FadingBlock { index: 0, gains: Matrix::from_fn(self.n_rx, self.n_tx, |_, _| 1.0) };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(STREAM_FADING_BASE + k);
        let gains = Matrix::from_fn(self.n_rx, self.n_tx, |_, _| {
            let x: f64 = Exp1.sample(&mut rng);
            x.max(f64::MIN_POSITIVE)
        });
        FadingBlock { index: k, gains }
    }
}

/// Fading block in force at time `t_ms` (non-negative).
pub fn evolve_fading(proc: &FadingProcess, t_ms: f64) -> FadingBlock {
    debug_assert!(t_ms >= 0.0);
    proc.block(proc.block_index(t_ms.max(0.0)))
}
