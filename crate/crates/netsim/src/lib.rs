//! Multi-cell network model and message-level simulation of the distributed
//! power-control iteration.

pub mod channel;
pub mod config;
pub mod distributed;
pub mod relay;
pub mod scenario;
pub mod topology;
pub mod tracking;

pub use channel::{channel_gains, evolve_fading, Channel, FadingBlock, FadingProcess, Link};
pub use config::TopologyConfig;
pub use distributed::{run_round, run_until_converged, DistributedRun, MessageLog, NodeState, Signaling};
pub use relay::{build_relay_problem, RelayConfig, Routing};
pub use scenario::Scenario;
pub use topology::{generate_topology, Deployment};
pub use tracking::{tracking_experiment, Schedule, TrackConfig, TrackResult, TrackSummary};
