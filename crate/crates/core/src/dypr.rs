//! Dynamic prioritization: online ridge regression from QoS tolerances to a
//! priority in `[0, 1]`.
//!
//! The model starts in `Observe`, handing out uniform random priorities
//! while it fills its memory. Past the observation threshold it refits on
//! every arrival (`Train`) and checks itself on a held-out slice of memory
//! every few transitions. Once the check clears the accuracy target it
//! freezes (`Predict`).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelState {
    Observe,
    Train,
    Predict,
}

impl ModelState {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelState::Observe => "observe",
            ModelState::Train => "train",
            ModelState::Predict => "predict",
        }
    }
}

/// A priority value split into its tenths (macro class) and hundredths
/// (micro class) digits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityLabel {
    pub value: f64,
    pub macro_class: u8,
    pub micro_class: u8,
}

impl PriorityLabel {
    pub fn from_value(value: f64) -> Self {
        let value = value.clamp(0.0, 1.0);
        // The nudge keeps values such as 0.29 from flooring to 28 hundredths.
        let hundredths = (value * 100.0 + 1e-9).floor() as u32;
        let macro_class = (hundredths / 10).min(9) as u8;
        let micro_class = (hundredths % 10) as u8;
        PriorityLabel {
            value,
            macro_class,
            micro_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Minimizes `sum (y - w.x - b)^2 + lambda * |w|^2` in closed form on
/// centered data. The intercept is not penalized.
pub fn fit_ridge(features: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<RidgeFit> {
    if features.is_empty() || features.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "ridge fit needs a non-empty batch with matching targets ({} rows, {} targets)",
            features.len(),
            targets.len()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(
            "lambda must be finite and >= 0".into(),
        ));
    }
    let n = features.len();
    let p = features[0].len();
    if features.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension {
            expected: p,
            got: features
                .iter()
                .map(|r| r.len())
                .find(|&l| l != p)
                .unwrap_or(p),
        });
    }

    let x = DMatrix::from_fn(n, p, |i, j| features[i][j]);
    let y = DVector::from_column_slice(targets);
    let x_mean: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let y_mean = y.mean();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - x_mean[j]);
    let yc = y.add_scalar(-y_mean);

    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += lambda;
    }
    let rhs = xc.transpose() * yc;

    if lambda == 0.0 {
        let eig = gram.clone().symmetric_eigen();
        let max = eig.eigenvalues.amax();
        let min = eig.eigenvalues.min();
        if max == 0.0 || min <= max * 1e-12 {
            return Err(Error::Singular(
                "collinear or constant features with lambda = 0; use lambda > 0".into(),
            ));
        }
    }

    let w = gram
        .cholesky()
        .ok_or_else(|| {
            Error::Singular("normal equations are not positive definite; use lambda > 0".into())
        })?
        .solve(&rhs);
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(RidgeFit { weights, intercept })
}

/// `|pred - target| / max(target, floor) <= tolerance`, counted as a fraction.
pub fn accuracy_of(predictions: &[f64], targets: &[f64], tolerance: f64, floor: f64) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let hits = predictions
        .iter()
        .zip(targets)
        .filter(|(&p, &y)| (p - y).abs() / y.max(floor) <= tolerance + 1e-12)
        .count();
    hits as f64 / predictions.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeConfig {
    pub lambda: f64,
    pub observation_threshold: usize,
    pub batch_size: usize,
    pub check_every: usize,
    /// Every `holdout_every`-th stored transition is held out for the
    /// accuracy check (5 -> 20%).
    pub holdout_every: usize,
    pub accuracy_target: f64,
    pub relative_tolerance: f64,
    pub tolerance_floor: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            lambda: 0.1,
            observation_threshold: 32,
            batch_size: 32,
            check_every: 16,
            holdout_every: 5,
            accuracy_target: 0.80,
            relative_tolerance: 0.10,
            tolerance_floor: 0.1,
        }
    }
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("ridge: lambda must be >= 0".into()));
        }
        if self.batch_size == 0 || self.check_every == 0 || self.holdout_every < 2 {
            return Err(Error::Config(
                "ridge: batch_size and check_every must be positive, holdout_every >= 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.accuracy_target) {
            return Err(Error::Config(
                "ridge: accuracy_target must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sample {
    features: Vec<f64>,
    target: f64,
}

/// Serializable snapshot of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeCheckpoint {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub state: ModelState,
    /// Per-feature `(min, max)` used for normalization.
    pub ranges: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RidgeModel {
    config: RidgeConfig,
    state: ModelState,
    fit: Option<RidgeFit>,
    memory: Vec<Sample>,
    ranges: Vec<(f64, f64)>,
    transitions: usize,
    last_accuracy: Option<f64>,
}

impl RidgeModel {
    pub fn new(config: RidgeConfig) -> Self {
        RidgeModel {
            config,
            state: ModelState::Observe,
            fit: None,
            memory: Vec::new(),
            ranges: Vec::new(),
            transitions: 0,
            last_accuracy: None,
        }
    }

    pub fn config(&self) -> &RidgeConfig {
        &self.config
    }

    pub fn state(&self) -> ModelState {
        self.state
    }

    pub fn transitions(&self) -> usize {
        self.transitions
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    pub fn last_accuracy(&self) -> Option<f64> {
        self.last_accuracy
    }

    pub fn fit(&self) -> Option<&RidgeFit> {
        self.fit.as_ref()
    }

    fn is_holdout(&self, index: usize) -> bool {
        index % self.config.holdout_every == self.config.holdout_every - 1
    }

    fn update_ranges(&mut self, x: &[f64]) {
        if self.ranges.is_empty() {
            self.ranges = x.iter().map(|&v| (v, v)).collect();
        } else {
            for (r, &v) in self.ranges.iter_mut().zip(x) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.ranges)
            .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    fn store(&mut self, x: &[f64], y: f64) {
        self.update_ranges(x);
        self.memory.push(Sample {
            features: x.to_vec(),
            target: y,
        });
    }

    /// Indices of the training (non-held-out) part of memory, excluding the
    /// newest entry; a uniform draw without replacement of up to `batch_size`.
    pub(crate) fn sample_batch_indices(&self, rng: &mut SimRng) -> Vec<usize> {
        let pool: Vec<usize> = (0..self.memory.len().saturating_sub(1))
            .filter(|&i| !self.is_holdout(i))
            .collect();
        let k = self.config.batch_size.min(pool.len());
        rand::seq::index::sample(rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    }

    fn train_on_batch(&mut self, rng: &mut SimRng) -> Result<()> {
        let mut idx = self.sample_batch_indices(rng);
        let newest = self.memory.len() - 1;
        if !self.is_holdout(newest) {
            idx.push(newest);
        }
        let xs: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| self.normalize(&self.memory[i].features))
            .collect();
        let ys: Vec<f64> = idx.iter().map(|&i| self.memory[i].target).collect();
        self.fit = Some(fit_ridge(&xs, &ys, self.config.lambda)?);
        Ok(())
    }

    fn holdout_accuracy(&self) -> Option<f64> {
        let held: Vec<&Sample> = self
            .memory
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_holdout(*i))
            .map(|(_, s)| s)
            .collect();
        if held.is_empty() {
            return None;
        }
        let preds: Vec<f64> = held.iter().map(|s| self.value(&s.features)).collect();
        let ys: Vec<f64> = held.iter().map(|s| s.target).collect();
        Some(accuracy_of(
            &preds,
            &ys,
            self.config.relative_tolerance,
            self.config.tolerance_floor,
        ))
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.fit {
            Some(f) => f.predict(&self.normalize(x)).clamp(0.0, 1.0),
            None => 0.0,
        }
    }

    /// Handles one arriving service: observes its features and target and
    /// returns the priority to assign.
    pub fn ingest(&mut self, features: &[f64], observed: f64, rng: &mut SimRng) -> Result<f64> {
        if features.iter().any(|v| !v.is_finite()) || !observed.is_finite() {
            return Err(Error::NonFinite("ridge features"));
        }
        if let Some(&(_, _)) = self.ranges.first() {
            if features.len() != self.ranges.len() {
                return Err(Error::Dimension {
                    expected: self.ranges.len(),
                    got: features.len(),
                });
            }
        }
        self.transitions += 1;

        if self.state == ModelState::Observe
            && self.memory.len() >= self.config.observation_threshold
        {
            self.state = ModelState::Train;
        }

        match self.state {
            ModelState::Observe => {
                self.store(features, observed);
                Ok(rng.random::<f64>())
            }
            ModelState::Train => {
                self.store(features, observed);
                self.train_on_batch(rng)?;
                if self.transitions.is_multiple_of(self.config.check_every) {
                    self.last_accuracy = self.holdout_accuracy();
                    if self
                        .last_accuracy
                        .is_some_and(|a| a >= self.config.accuracy_target)
                    {
                        self.state = ModelState::Predict;
                    }
                }
                Ok(self.value(features))
            }
            ModelState::Predict => Ok(self.value(features)),
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<PriorityLabel> {
        if self.state == ModelState::Observe || self.fit.is_none() {
            return Err(Error::InvalidState(
                "ridge model has not been trained yet".into(),
            ));
        }
        if features.len() != self.ranges.len() {
            return Err(Error::Dimension {
                expected: self.ranges.len(),
                got: features.len(),
            });
        }
        Ok(PriorityLabel::from_value(self.value(features)))
    }

    /// Accuracy of the current fit on `(features, target)` pairs.
    pub fn accuracy(&self, eval: &[(Vec<f64>, f64)]) -> f64 {
        let preds: Vec<f64> = eval.iter().map(|(x, _)| self.value(x)).collect();
        let ys: Vec<f64> = eval.iter().map(|(_, y)| *y).collect();
        accuracy_of(
            &preds,
            &ys,
            self.config.relative_tolerance,
            self.config.tolerance_floor,
        )
    }

    pub fn checkpoint(&self) -> RidgeCheckpoint {
        let fit = self.fit.clone().unwrap_or(RidgeFit {
            weights: vec![0.0; self.ranges.len()],
            intercept: 0.0,
        });
        RidgeCheckpoint {
            weights: fit.weights,
            intercept: fit.intercept,
            lambda: self.config.lambda,
            state: self.state,
            ranges: self.ranges.clone(),
        }
    }

    /// Rebuilds a frozen model from a checkpoint. Memory is not restored.
    pub fn from_checkpoint(ck: RidgeCheckpoint, mut config: RidgeConfig) -> Result<Self> {
        if ck.weights.len() != ck.ranges.len() {
            return Err(Error::Checkpoint(
                "weights and ranges differ in length".into(),
            ));
        }
        config.lambda = ck.lambda;
        Ok(RidgeModel {
            config,
            state: ck.state,
            fit: (ck.state != ModelState::Observe).then_some(RidgeFit {
                weights: ck.weights,
                intercept: ck.intercept,
            }),
            memory: Vec::new(),
            ranges: ck.ranges,
            transitions: 0,
            last_accuracy: None,
        })
    }
}
