//! Adaptive scheduling: orders the queue of prioritized services.
//!
//! The learned scheduler is a DDPG agent whose action is a rank in `[0, 1]`
//! per service, trained on a reward that adds a beneficial cost (short
//! waiting threshold, high reliability, high priority) to a starvation cost
//! that only low-priority services earn, and only near the front of the
//! queue. FIFO, WFQ and static-priority baselines share the same interface.

mod baseline;
mod ddpg;
mod reward;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{fifo_order, priority_order, wfq_order};
pub use ddpg::{DdpgAgent, DdpgConfig, RankedQueue, Transition};
pub use reward::{beneficial_cost, reward, starvation_cost, starving_flag, RewardParams};

use crate::error::Error;
use crate::workload::ServiceRequest;

/// Scheduler input for one service. All components lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedState {
    /// Threshold waiting time, min-max normalized over the current batch.
    pub wait_norm: f64,
    pub reliability: f64,
    pub priority: f64,
}

impl SchedState {
    pub fn to_array(&self) -> [f64; 3] {
        [self.wait_norm, self.reliability, self.priority]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        SchedState {
            wait_norm: a[0],
            reliability: a[1],
            priority: a[2],
        }
    }

    /// States for a batch, normalizing waiting thresholds within the batch.
    pub fn for_batch(services: &[ServiceRequest]) -> Vec<SchedState> {
        let lo = services
            .iter()
            .map(|s| s.threshold_wait)
            .fold(f64::INFINITY, f64::min);
        let hi = services
            .iter()
            .map(|s| s.threshold_wait)
            .fold(f64::NEG_INFINITY, f64::max);
        services
            .iter()
            .map(|s| SchedState {
                wait_norm: if hi > lo {
                    (s.threshold_wait - lo) / (hi - lo)
                } else {
                    0.0
                },
                reliability: s.reliability.clamp(0.0, 1.0),
                priority: s.priority().clamp(0.0, 1.0),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Fifo,
    Wfq,
    Priority,
    Ddpg,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 4] = [
        SchedulerKind::Fifo,
        SchedulerKind::Wfq,
        SchedulerKind::Priority,
        SchedulerKind::Ddpg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::Fifo => "fifo",
            SchedulerKind::Wfq => "wfq",
            SchedulerKind::Priority => "priority",
            SchedulerKind::Ddpg => "ddpg",
        }
    }

    pub fn is_learning(self) -> bool {
        self == SchedulerKind::Ddpg
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(SchedulerKind::Fifo),
            "wfq" => Ok(SchedulerKind::Wfq),
            "priority" => Ok(SchedulerKind::Priority),
            "ddpg" => Ok(SchedulerKind::Ddpg),
            other => Err(Error::Config(format!("unknown scheduler `{other}`"))),
        }
    }
}

/// Queue position of every service given an order of service indices.
pub fn positions(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }
    pos
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_kinds() {
        for k in SchedulerKind::ALL {
            assert_eq!(k.as_str().parse::<SchedulerKind>().unwrap(), k);
        }
        assert!("lifo".parse::<SchedulerKind>().is_err());
    }

    #[test]
    fn positions_invert_order() {
        assert_eq!(positions(&[2, 0, 1]), vec![1, 2, 0]);
    }
}
