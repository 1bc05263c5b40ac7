//! Simulation library for NFV resource allocation with learned service
//! prioritization and starvation-aware scheduling.
//!
//! The pipeline per episode:
//!
//! 1. [`workload`] generates a batch of service function chains.
//! 2. [`dypr`] assigns each one a dynamic priority with an online ridge
//!    regression model.
//! 3. [`adsch`] orders the queue, either with a DDPG agent or one of the
//!    FIFO / WFQ / static-priority baselines.
//! 4. [`admission`] rejects services whose accumulated wait exceeds their
//!    threshold waiting time.
//! 5. [`embed`] places admitted chains onto the [`substrate`] with a double
//!    deep Q-learning agent.
//!
//! [`harness`] drives the loop across episodes, schedulers and seeds and
//! writes the metrics files.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admission;
pub mod adsch;
pub mod approximator;
pub mod dypr;
pub mod embed;
pub mod error;
pub mod harness;
pub mod replay;
pub mod rng;
pub mod substrate;
pub mod workload;

pub use adsch::{DdpgAgent, DdpgConfig, RewardParams, SchedState, SchedulerKind};
pub use approximator::{Activation, Adam, Mlp};
pub use dypr::{ModelState, PriorityLabel, RidgeModel};
pub use embed::{DdqlAgent, DdqlConfig, EmbedParams, PlacementOutcome};
pub use error::{Error, Result};
pub use harness::{EpisodeMetrics, ScenarioConfig};
pub use substrate::{Demand, SubstrateNetwork};
pub use workload::{ServiceRequest, WorkloadConfig};
