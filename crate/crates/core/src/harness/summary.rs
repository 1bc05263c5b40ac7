use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{read_metrics, MetricsRow};
use crate::error::{Error, Result};

/// The metrics of one (scheduler, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricStream {
    pub scheduler: String,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
}

impl MetricStream {
    pub fn load(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        let rows = read_metrics(path.as_ref())?;
        let scheduler = rows
            .first()
            .map(|r| r.scheduler.clone())
            .ok_or_else(|| Error::Schema(format!("{}: no episodes", path.as_ref().display())))?;
        Ok(MetricStream {
            scheduler,
            seed,
            rows,
        })
    }
}

/// Mean of the defined values among the last 10% of `values` (at least one).
pub fn tail_mean(values: &[Option<f64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let window = values.len().div_ceil(10).max(1);
    let defined: Vec<f64> = values[values.len() - window..]
        .iter()
        .flatten()
        .copied()
        .collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub scheduler: String,
    pub runs: usize,
    pub sar: Option<f64>,
    pub sar_beneficial: Option<f64>,
    pub sar_low: Option<f64>,
    /// Low-priority SAR over the static-priority baseline's.
    pub low_ratio: Option<f64>,
    pub beneficial_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

/// Per-scheduler tail SARs averaged over seeds, with ratios against the
/// `priority` scheduler when it is present.
pub fn summarize(streams: &[MetricStream]) -> Result<ComparisonTable> {
    if streams.is_empty() {
        return Err(Error::InvalidArgument("nothing to summarize".into()));
    }
    for s in streams {
        if let Some(bad) = s.rows.iter().find(|r| r.scheduler != s.scheduler) {
            return Err(Error::Schema(format!(
                "stream `{}` seed {} contains rows of `{}`",
                s.scheduler, s.seed, bad.scheduler
            )));
        }
    }
    let mut names: Vec<&str> = Vec::new();
    for s in streams {
        if !names.contains(&s.scheduler.as_str()) {
            names.push(&s.scheduler);
        }
    }
    let mut rows: Vec<TableRow> = names
        .iter()
        .map(|&name| {
            let own: Vec<&MetricStream> = streams.iter().filter(|s| s.scheduler == name).collect();
            let tail = |f: fn(&MetricsRow) -> Option<f64>| {
                mean(
                    own.iter()
                        .map(|s| tail_mean(&s.rows.iter().map(f).collect::<Vec<_>>())),
                )
            };
            TableRow {
                scheduler: name.to_string(),
                runs: own.len(),
                sar: tail(|r| r.sar),
                sar_beneficial: tail(|r| r.sar_beneficial()),
                sar_low: tail(|r| r.sar_low),
                low_ratio: None,
                beneficial_ratio: None,
            }
        })
        .collect();
    if let Some(base) = rows.iter().find(|r| r.scheduler == "priority").cloned() {
        for r in rows.iter_mut() {
            r.low_ratio = ratio(r.sar_low, base.sar_low);
            r.beneficial_ratio = ratio(r.sar_beneficial, base.sar_beneficial);
        }
    }
    Ok(ComparisonTable { rows })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

impl ComparisonTable {
    pub fn row(&self, scheduler: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.scheduler == scheduler)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>4} {:>8} {:>10} {:>8} {:>10} {:>10}",
            "scheduler", "runs", "sar", "sar_benef", "sar_low", "low/prio", "benef/prio"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>4} {:>8} {:>10} {:>8} {:>10} {:>10}",
                r.scheduler,
                r.runs,
                cell(r.sar),
                cell(r.sar_beneficial),
                cell(r.sar_low),
                cell(r.low_ratio),
                cell(r.beneficial_ratio)
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        scheduler: &str,
        offered: usize,
        accepted: usize,
        offered_low: usize,
        accepted_low: usize,
    ) -> MetricsRow {
        let r = |a: usize, o: usize| (o > 0).then(|| a as f64 / o as f64);
        MetricsRow {
            episode: 0,
            scheduler: scheduler.into(),
            offered,
            accepted,
            accepted_low,
            offered_low,
            sar: r(accepted, offered),
            sar_low: r(accepted_low, offered_low),
            timeouts: offered - accepted,
            rr_state: "predict".into(),
            rr_accuracy: None,
            mean_reward: 0.0,
        }
    }

    fn stream(name: &str, seed: u64, rows: Vec<MetricsRow>) -> MetricStream {
        MetricStream {
            scheduler: name.into(),
            seed,
            rows,
        }
    }

    #[test]
    fn tail_window() {
        let v: Vec<Option<f64>> = (0..20).map(|i| Some(i as f64)).collect();
        assert_eq!(tail_mean(&v), Some(18.5));
        assert_eq!(tail_mean(&[Some(1.0), Some(3.0)]), Some(3.0));
        assert_eq!(tail_mean(&[Some(1.0), None]), None);
        assert_eq!(tail_mean(&[]), None);
    }

    #[test]
    fn identical_streams_give_unit_ratios() {
        let rows = vec![row("x", 10, 5, 2, 1); 5];
        let streams: Vec<MetricStream> = ["fifo", "priority", "ddpg"]
            .iter()
            .map(|n| {
                let mut rs = rows.clone();
                rs.iter_mut().for_each(|r| r.scheduler = n.to_string());
                stream(n, 1, rs)
            })
            .collect();
        let t = summarize(&streams).unwrap();
        for r in &t.rows {
            assert_eq!(r.low_ratio, Some(1.0));
            assert_eq!(r.beneficial_ratio, Some(1.0));
        }
    }

    #[test]
    fn zero_low_offers_skip_ratio() {
        let t = summarize(&[
            stream("priority", 1, vec![row("priority", 10, 5, 0, 0)]),
            stream("ddpg", 1, vec![row("ddpg", 10, 5, 0, 0)]),
        ])
        .unwrap();
        assert_eq!(t.row("ddpg").unwrap().sar_low, None);
        assert_eq!(t.row("ddpg").unwrap().low_ratio, None);
    }

    #[test]
    fn hand_computed_table() {
        // priority: tail episode 10/20 overall, 1/4 low -> beneficial 9/16.
        // ddpg seeds: low 2/4 and 3/4 -> 0.625; ratio 0.625 / 0.25 = 2.5.
        let prio = stream("priority", 1, vec![row("priority", 20, 10, 4, 1)]);
        let d1 = stream("ddpg", 1, vec![row("ddpg", 20, 10, 4, 2)]);
        let d2 = stream("ddpg", 2, vec![row("ddpg", 20, 12, 4, 3)]);
        let t = summarize(&[prio, d1, d2]).unwrap();
        let p = t.row("priority").unwrap();
        assert_eq!(p.sar_beneficial, Some(9.0 / 16.0));
        let d = t.row("ddpg").unwrap();
        assert_eq!(d.runs, 2);
        assert_eq!(d.sar, Some(0.55));
        assert_eq!(d.sar_low, Some(0.625));
        assert_eq!(d.low_ratio, Some(2.5));
        assert!(
            (d.beneficial_ratio.unwrap() - ((8.0 / 16.0 + 9.0 / 16.0) / 2.0) / (9.0 / 16.0)).abs()
                < 1e-12
        );
        assert!(t.to_text().contains("ddpg"));
    }

    #[test]
    fn mixed_stream_is_schema_error() {
        let s = stream(
            "fifo",
            1,
            vec![row("fifo", 1, 1, 0, 0), row("wfq", 1, 1, 0, 0)],
        );
        assert!(matches!(summarize(&[s]), Err(Error::Schema(_))));
        assert!(summarize(&[]).is_err());
    }
}
