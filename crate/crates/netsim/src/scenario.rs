//! A generated deployment together with its channel.

use pcsim_core::{LinkGains, NormalizedProblem, PowerBounds, Result, POWER_FLOOR_W};

use crate::channel::{uplink_links, Channel, FadingBlock, FadingProcess};
use crate::config::TopologyConfig;
use crate::topology::{generate_topology, Deployment};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: TopologyConfig,
    pub seed: u64,
    pub dep: Deployment,
    pub channel: Channel,
}

impl Scenario {
    pub fn generate(cfg: &TopologyConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let dep = generate_topology(cfg, seed);
        let channel = Channel::new(&dep, cfg, seed)?;
        Ok(Self { cfg: cfg.clone(), seed, dep, channel })
    }

    pub fn n_links(&self) -> usize {
        self.dep.n_users()
    }

    /// `[ε_p, p_max]` on every uplink.
    pub fn bounds(&self) -> PowerBounds<f64> {
        let n = self.n_links();
        PowerBounds::boxed(vec![POWER_FLOOR_W; n], vec![self.cfg.p_max_w(); n])
    }

    pub fn uplink_gains(&self, fading: Option<&FadingBlock>) -> Result<LinkGains<f64>> {
        self.channel.link_gains(&uplink_links(&self.dep, self.cfg.channel_access), fading, 1.0)
    }

    pub fn uplink_problem(&self, fading: Option<&FadingBlock>) -> Result<NormalizedProblem<f64>> {
        NormalizedProblem::normalize(&self.uplink_gains(fading)?, self.bounds())
    }

    pub fn fading_process(&self) -> FadingProcess {
        FadingProcess::new(self.cfg.coherence_time_ms, self.seed, &self.channel)
    }
}
