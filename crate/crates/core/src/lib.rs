//! Multi-agent benchmark for spectrum allocation in dynamic channel bonding
//! WLANs.
//!
//! - [`spectrum`]: actions, channelization, bonding, overlap rules
//! - [`deployment`]: BSS layout and interference matrix from TOML
//! - [`sim`]: CSMA/CA simulator mapping a global configuration to throughput
//! - [`dataset`]: exhaustive configuration → throughput table
//! - [`agents`]: ε-greedy, contextual ε-greedy, Q-learning and baselines
//! - [`harness`]: multi-agent episodes, gains, and run summaries

pub mod agents;
pub mod dataset;
pub mod deployment;
pub mod error;
pub mod harness;
pub mod seed;
pub mod sim;
pub mod spectrum;

pub use deployment::{Bss, Deployment, RadioParams, RunSettings};
pub use error::{Error, Result};
pub use sim::{simulate, GlobalConfig, MacParams, SimResult};
pub use spectrum::{Action, ActionSpace, ChannelSet, InterferenceMatrix};
