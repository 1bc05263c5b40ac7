use serde::{Deserialize, Serialize};

use super::SchedState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Scale applied to every reward term.
    pub points: f64,
    pub alpha: f64,
    /// Per-position decay of the starvation bonus.
    pub decay_base: f64,
    /// Services at or below this priority are potentially starving.
    pub starving_threshold: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            points: 10.0,
            alpha: 1.0,
            decay_base: 0.1,
            starving_threshold: 0.2,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.points > 0.0) {
            return Err(Error::Config("reward points must be > 0".into()));
        }
        if !(self.decay_base > 0.0 && self.decay_base < 1.0) {
            return Err(Error::Config("decay base must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// `(1 - n(T)) * pts + reliability * pts + priority * pts`.
pub fn beneficial_cost(state: &SchedState, points: f64) -> f64 {
    (1.0 - state.wait_norm) * points + state.reliability * points + state.priority * points
}

pub fn starving_flag(priority: f64, threshold: f64) -> u8 {
    u8::from(priority <= threshold)
}

/// `alpha * base^position * pts` for starving services, zero otherwise.
pub fn starvation_cost(priority: f64, position: usize, params: &RewardParams) -> f64 {
    if starving_flag(priority, params.starving_threshold) == 0 {
        return 0.0;
    }
    let exp = i32::try_from(position).unwrap_or(i32::MAX);
    params.alpha * params.decay_base.powi(exp) * params.points
}

pub fn reward(state: &SchedState, position: usize, params: &RewardParams) -> f64 {
    beneficial_cost(state, params.points) + starvation_cost(state.priority, position, params)
}
