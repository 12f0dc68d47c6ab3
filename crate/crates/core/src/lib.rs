//! Throughput model of a relay-assisted wireless network carrying both
//! cacheable and non-cacheable traffic.
//!
//! U1 sends packets to D, optionally through a full-duplex relay R that
//! queues up to `B` packets. The relay's remaining `F - B` storage slots cache
//! popular files for U2, which otherwise fetches from a data center behind BS.
//!
//! - [`phy`]: link success probabilities under Rayleigh fading.
//! - [`content`]: Zipf popularity and cache placement.
//! - [`chain`]: the relay queue's Markov chain and its stationary distribution.
//! - [`throughput`]: closed-form throughputs.
//! - [`oracle`]: exact enumeration of per-slot events.
//! - [`sim`]: seeded Monte Carlo simulation.
//! - [`config`], [`experiment`]: configuration files, sweeps and CSV output.

pub mod chain;
pub mod config;
pub mod content;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod phy;
pub mod sim;
pub mod throughput;

pub use chain::{ChainCoefficients, SteadyState, TrafficParams};
pub use config::{ExperimentConfig, Scenario};
pub use content::CacheConfig;
pub use error::{Error, Result};
pub use oracle::SlotSemantics;
pub use phy::{LinkBudget, NetworkGeometry, Node, NodeSet, SuccessProbs};
pub use sim::{SimConfig, SimResult};
pub use throughput::{Source, ThroughputReport};
