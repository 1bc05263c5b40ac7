use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedParams {
    /// Points per reward term on a successful placement.
    pub points: f64,
    /// Reward for a failed placement attempt.
    pub penalty: f64,
    /// Attempts per VNF; `None` uses the node count.
    pub max_attempts: Option<usize>,
}

impl Default for EmbedParams {
    fn default() -> Self {
        EmbedParams {
            points: 10.0,
            penalty: -10.0,
            max_attempts: None,
        }
    }
}

/// Inputs of the success branch of the local reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    /// Available over initialized resources of the chosen node.
    pub availability: f64,
    pub priority: f64,
    pub reliability: f64,
    /// Placement speed factor in `(0, 1]`.
    pub placement: f64,
}

pub fn quality_term(available: f64, initialized: f64, points: f64) -> Result<f64> {
    if !(initialized > 0.0) {
        return Err(Error::InvalidArgument(
            "initialized resources must be > 0".into(),
        ));
    }
    if available < 0.0 || available > initialized {
        return Err(Error::InvalidArgument(format!(
            "available {available} outside [0, {initialized}]"
        )));
    }
    Ok(available / initialized * points)
}

/// `(max - attempts + 1) / max`: 1 for a first-try success.
pub fn placement_factor(attempts: usize, max_attempts: usize) -> Result<f64> {
    if attempts == 0 || attempts > max_attempts {
        return Err(Error::InvalidArgument(format!(
            "attempts {attempts} outside [1, {max_attempts}]"
        )));
    }
    Ok((max_attempts - attempts + 1) as f64 / max_attempts as f64)
}

pub fn placement_term(attempts: usize, max_attempts: usize, points: f64) -> Result<f64> {
    Ok(placement_factor(attempts, max_attempts)? * points)
}

/// Quality + priority + reliability + placement terms on success, the
/// penalty otherwise.
pub fn local_reward(success: bool, terms: &RewardTerms, params: &EmbedParams) -> f64 {
    if !success {
        return params.penalty;
    }
    let p = params.points;
    terms.availability * p + terms.priority * p + terms.reliability * p + terms.placement * p
}
