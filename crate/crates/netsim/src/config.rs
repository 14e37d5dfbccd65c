//! Scenario parameters.
//!
//! Defaults follow the seven-cell evaluation setup. Transmit-power cap, noise
//! floor, self-interference floor and minimum user distance have no published
//! value and are marked `non_paper` in [`TopologyConfig::non_paper_keys`].

use pcsim_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub n_cells: usize,
    pub users_per_cell: usize,
    pub cell_radius_m: f64,
    pub carrier_hz: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub antenna_gain_db: f64,
    /// `None` is an infinite coherence time: a static channel without fading.
    pub coherence_time_ms: Option<f64>,
    pub power_update_interval_ms: f64,
    pub noise_dbm: f64,
    pub p_max_dbm: f64,
    pub kappa_si: f64,
    pub reference_distance_m: f64,
    /// Multiply every link by the free-space loss at the reference distance.
    pub free_space_reference: bool,
    /// Users are placed at least this far from their base station.
    pub min_distance_m: f64,
    pub channel_access: ChannelAccess,
    /// Coupling between different subchannels, relative to the physical gain.
    pub subchannel_leakage: f64,
    pub seed: u64,
}

/// How users of one cell share the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelAccess {
    /// The `k`-th user of every cell uses subchannel `k`: users interfere only
    /// with same-index users of other cells.
    Ofdm,
    /// Every user interferes with every other user.
    Shared,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            n_cells: 7,
            users_per_cell: 10,
            cell_radius_m: 500.0,
            carrier_hz: 1e9,
            pathloss_exponent: 3.79,
            shadowing_sigma_db: 9.0,
            antenna_gain_db: 15.0,
            coherence_time_ms: None,
            power_update_interval_ms: 5.0,
            noise_dbm: -104.0,
            p_max_dbm: 23.0,
            kappa_si: 1e-4,
            reference_distance_m: 1.0,
            free_space_reference: true,
            min_distance_m: 10.0,
            channel_access: ChannelAccess::Ofdm,
            subchannel_leakage: 1e-12,
            seed: 0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

impl TopologyConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str| Err(Error::Config(format!("scenario.{k} must be positive and finite")));
        if self.n_cells == 0 {
            return bad("n_cells");
        }
        if self.users_per_cell == 0 {
            return bad("users_per_cell");
        }
        for (k, v) in [
            ("cell_radius_m", self.cell_radius_m),
            ("carrier_hz", self.carrier_hz),
            ("pathloss_exponent", self.pathloss_exponent),
            ("power_update_interval_ms", self.power_update_interval_ms),
            ("kappa_si", self.kappa_si),
            ("reference_distance_m", self.reference_distance_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(k);
            }
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::Config("scenario.shadowing_sigma_db must be non-negative".into()));
        }
        if !self.antenna_gain_db.is_finite() || !self.noise_dbm.is_finite() || !self.p_max_dbm.is_finite() {
            return Err(Error::Config("scenario: dB quantities must be finite".into()));
        }
        if !(self.min_distance_m.is_finite() && self.min_distance_m >= 0.0 && self.min_distance_m < self.cell_radius_m / 2.0) {
            return Err(Error::Config("scenario.min_distance_m must lie in [0, cell_radius_m/2)".into()));
        }
        if let Some(t) = self.coherence_time_ms {
            if !(t.is_finite() && t > 0.0) {
                return bad("coherence_time_ms");
            }
        }
        if !(self.subchannel_leakage > 0.0 && self.subchannel_leakage < 1.0) {
            return Err(Error::Config("scenario.subchannel_leakage must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Update interval must not exceed the coherence time when fading is on.
    pub fn validate_tracking(&self) -> Result<()> {
        self.validate()?;
        if let Some(t) = self.coherence_time_ms {
            if self.power_update_interval_ms > t {
                return Err(Error::Config("scenario.power_update_interval_ms exceeds coherence_time_ms".into()));
            }
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_cells * self.users_per_cell
    }

    pub fn p_max_w(&self) -> f64 {
        dbm_to_watts(self.p_max_dbm)
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Distance-independent factor: antenna gain times (optionally) free-space loss at `d₀`.
    pub fn reference_gain(&self) -> f64 {
        let g = db_to_linear(self.antenna_gain_db);
        if self.free_space_reference {
            let lambda = SPEED_OF_LIGHT / self.carrier_hz;
            g * (lambda / (4.0 * std::f64::consts::PI * self.reference_distance_m)).powi(2)
        } else {
            g
        }
    }

    /// Keys whose defaults are not published values.
    pub fn non_paper_keys() -> &'static [&'static str] {
        &["noise_dbm", "p_max_dbm", "kappa_si", "min_distance_m", "free_space_reference", "subchannel_leakage"]
    }
}
