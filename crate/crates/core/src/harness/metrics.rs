use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adsch::SchedulerKind;
use crate::dypr::ModelState;
use crate::error::{Error, Result};

pub const CLASS_COUNT: usize = 10;

/// Column order of the per-episode metrics file.
pub const METRICS_HEADER: [&str; 12] = [
    "episode",
    "scheduler",
    "offered",
    "accepted",
    "accepted_low",
    "offered_low",
    "sar",
    "sar_low",
    "timeouts",
    "rr_state",
    "rr_accuracy",
    "mean_reward",
];

const CLASS_HEADER_TAIL: [&str; 6] = [
    "offered_high",
    "accepted_high",
    "embed_rejected",
    "mean_wait",
    "total_reward",
    "embed_reward",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub scheduler: SchedulerKind,
    pub offered: usize,
    pub accepted: usize,
    /// Services at or below the starving threshold.
    pub offered_low: usize,
    pub accepted_low: usize,
    /// Services above 0.8.
    pub offered_high: usize,
    pub accepted_high: usize,
    pub timeouts: usize,
    pub embed_rejected: usize,
    pub class_offered: [usize; CLASS_COUNT],
    pub class_accepted: [usize; CLASS_COUNT],
    pub mean_wait: f64,
    /// Mean scheduling reward over offered services.
    pub mean_reward: f64,
    pub total_reward: f64,
    /// Sum of embedding rewards.
    pub embed_reward: f64,
    pub rr_state: ModelState,
    pub rr_accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EpisodeMetrics {
    pub fn empty(episode: usize, scheduler: SchedulerKind) -> Self {
        EpisodeMetrics {
            episode,
            scheduler,
            offered: 0,
            accepted: 0,
            offered_low: 0,
            accepted_low: 0,
            offered_high: 0,
            accepted_high: 0,
            timeouts: 0,
            embed_rejected: 0,
            class_offered: [0; CLASS_COUNT],
            class_accepted: [0; CLASS_COUNT],
            mean_wait: 0.0,
            mean_reward: 0.0,
            total_reward: 0.0,
            embed_reward: 0.0,
            rr_state: ModelState::Observe,
            rr_accuracy: None,
        }
    }

    pub fn sar(&self) -> Option<f64> {
        ratio(self.accepted, self.offered)
    }

    pub fn sar_low(&self) -> Option<f64> {
        ratio(self.accepted_low, self.offered_low)
    }

    pub fn sar_high(&self) -> Option<f64> {
        ratio(self.accepted_high, self.offered_high)
    }

    /// Acceptance over everything except the low band.
    pub fn sar_beneficial(&self) -> Option<f64> {
        ratio(
            self.accepted - self.accepted_low,
            self.offered - self.offered_low,
        )
    }

    /// Conservation and per-class consistency.
    pub fn check(&self) -> Result<()> {
        let fail = |what: &str| {
            Err(Error::InvalidState(format!(
                "episode {}: {what}",
                self.episode
            )))
        };
        if self.accepted + self.timeouts + self.embed_rejected != self.offered {
            return fail("accepted + timeouts + embed rejections != offered");
        }
        if self.accepted_low > self.offered_low
            || self.accepted_high > self.offered_high
            || self.offered_low + self.offered_high > self.offered
        {
            return fail("band counters out of range");
        }
        if self.class_offered.iter().sum::<usize>() != self.offered
            || self.class_accepted.iter().sum::<usize>() != self.accepted
        {
            return fail("per-class counters do not sum to the totals");
        }
        if self
            .class_accepted
            .iter()
            .zip(&self.class_offered)
            .any(|(a, o)| a > o)
        {
            return fail("class accepted exceeds offered");
        }
        Ok(())
    }

    pub fn row(&self) -> MetricsRow {
        MetricsRow {
            episode: self.episode,
            scheduler: self.scheduler.as_str().to_string(),
            offered: self.offered,
            accepted: self.accepted,
            accepted_low: self.accepted_low,
            offered_low: self.offered_low,
            sar: self.sar(),
            sar_low: self.sar_low(),
            timeouts: self.timeouts,
            rr_state: self.rr_state.as_str().to_string(),
            rr_accuracy: self.rr_accuracy,
            mean_reward: self.mean_reward,
        }
    }

    fn class_record(&self) -> Vec<String> {
        let mut rec = vec![self.episode.to_string()];
        rec.extend(self.class_offered.iter().map(|c| c.to_string()));
        rec.extend(self.class_accepted.iter().map(|c| c.to_string()));
        rec.push(self.offered_high.to_string());
        rec.push(self.accepted_high.to_string());
        rec.push(self.embed_rejected.to_string());
        rec.push(self.mean_wait.to_string());
        rec.push(self.total_reward.to_string());
        rec.push(self.embed_reward.to_string());
        rec
    }
}

/// One line of the metrics file. Undefined rates are empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub scheduler: String,
    pub offered: usize,
    pub accepted: usize,
    pub accepted_low: usize,
    pub offered_low: usize,
    pub sar: Option<f64>,
    pub sar_low: Option<f64>,
    pub timeouts: usize,
    pub rr_state: String,
    pub rr_accuracy: Option<f64>,
    pub mean_reward: f64,
}

impl MetricsRow {
    pub fn sar_beneficial(&self) -> Option<f64> {
        ratio(
            self.accepted - self.accepted_low,
            self.offered - self.offered_low,
        )
    }
}

pub fn write_metrics(path: impl AsRef<Path>, metrics: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.serialize(m.row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_classes(path: impl AsRef<Path>, metrics: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["episode".to_string()];
    header.extend((0..CLASS_COUNT).map(|c| format!("offered_c{c}")));
    header.extend((0..CLASS_COUNT).map(|c| format!("accepted_c{c}")));
    header.extend(CLASS_HEADER_TAIL.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for m in metrics {
        w.write_record(m.class_record())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a metrics file, rejecting any header other than the expected one.
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty metrics file", path.display())))??;
    if header.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: unexpected header `{}`",
            path.display(),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let header = csv::StringRecord::from(METRICS_HEADER.to_vec());
    records
        .map(|rec| {
            let rec = rec?;
            rec.deserialize::<MetricsRow>(Some(&header))
                .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EpisodeMetrics {
        let mut m = EpisodeMetrics::empty(3, SchedulerKind::Wfq);
        m.offered = 10;
        m.accepted = 4;
        m.timeouts = 5;
        m.embed_rejected = 1;
        m.offered_low = 2;
        m.accepted_low = 0;
        m.offered_high = 3;
        m.accepted_high = 2;
        m.class_offered = [1, 1, 2, 1, 1, 1, 0, 0, 2, 1];
        m.class_accepted = [0, 0, 1, 0, 1, 0, 0, 0, 1, 1];
        m.rr_state = ModelState::Train;
        m.rr_accuracy = Some(0.75);
        m.mean_reward = 12.5;
        m
    }

    #[test]
    fn rates() {
        let m = sample();
        m.check().unwrap();
        assert_eq!(m.sar(), Some(0.4));
        assert_eq!(m.sar_low(), Some(0.0));
        assert_eq!(m.sar_beneficial(), Some(0.5));
        let e = EpisodeMetrics::empty(0, SchedulerKind::Fifo);
        e.check().unwrap();
        assert_eq!(e.sar(), None);
        assert_eq!(e.sar_low(), None);
    }

    #[test]
    fn conservation_violation_is_reported() {
        let mut m = sample();
        m.timeouts += 1;
        assert!(m.check().is_err());
        let mut m = sample();
        m.class_accepted[0] += 1;
        assert!(m.check().is_err());
    }

    #[test]
    fn csv_round_trip_with_nulls() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut empty = EpisodeMetrics::empty(4, SchedulerKind::Wfq);
        empty.rr_state = ModelState::Predict;
        write_metrics(&p, &[sample(), empty.clone()]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(&METRICS_HEADER.join(",")));
        assert!(text
            .lines()
            .nth(2)
            .unwrap()
            .contains("4,wfq,0,0,0,0,,,0,predict,,0"));
        let rows = read_metrics(&p).unwrap();
        assert_eq!(rows, vec![sample().row(), empty.row()]);
    }

    #[test]
    fn schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "episode,scheduler,sar\n1,fifo,0.5\n").unwrap();
        assert!(matches!(read_metrics(&p), Err(Error::Schema(_))));
    }
}
