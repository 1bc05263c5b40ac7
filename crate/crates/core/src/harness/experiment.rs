use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ScenarioConfig;
use super::episode::{run_episode, Run};
use super::metrics::{write_classes, write_metrics, EpisodeMetrics};
use super::summary::{summarize, ComparisonTable, MetricStream};
use crate::adsch::SchedulerKind;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSpec {
    pub scheduler: SchedulerKind,
    pub seed: u64,
}

impl RunSpec {
    pub fn dir_name(&self) -> String {
        format!("{}-seed{}", self.scheduler, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub dir: Option<PathBuf>,
    pub metrics: Vec<EpisodeMetrics>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    topology: &'a str,
    scenario: String,
    runs: Vec<RunSpec>,
    config: &'a ScenarioConfig,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn manifest<'a>(config: &'a ScenarioConfig, runs: Vec<RunSpec>) -> Manifest<'a> {
    Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        topology: &config.topology,
        scenario: config.scenario.to_string(),
        runs,
        config,
    }
}

/// Runs every episode of one (scheduler, seed) pair. With `out`, writes
/// `metrics.csv`, `classes.csv`, `manifest.json` and, when auditing,
/// `audit.jsonl` into `out/<scheduler>-seed<seed>/`.
pub fn run_single(config: &ScenarioConfig, spec: RunSpec, out: Option<&Path>) -> Result<RunOutput> {
    let mut run = Run::new(config, spec.scheduler, spec.seed)?;
    let dir = out.map(|o| o.join(spec.dir_name()));
    let mut audit = match &dir {
        Some(d) if config.audit => {
            fs::create_dir_all(d)?;
            Some(BufWriter::new(fs::File::create(d.join("audit.jsonl"))?))
        }
        _ => None,
    };
    let mut metrics = Vec::with_capacity(config.episodes);
    for e in 0..config.episodes {
        metrics.push(run_episode(&mut run, e)?);
        let records = run.take_audit();
        if let Some(w) = audit.as_mut() {
            for r in records {
                serde_json::to_writer(&mut *w, &r)?;
                w.write_all(b"\n")?;
            }
        }
    }
    if let Some(w) = audit.as_mut() {
        w.flush()?;
    }
    if let Some(d) = &dir {
        fs::create_dir_all(d)?;
        write_metrics(d.join("metrics.csv"), &metrics)?;
        write_classes(d.join("classes.csv"), &metrics)?;
        write_json(&d.join("manifest.json"), &manifest(config, vec![spec]))?;
        if let Some(agent) = run.ddpg() {
            agent.save(d.join("ddpg"))?;
        }
        run.ddql().save(d.join("ddql.json"))?;
    }
    log::info!(
        "finished {} ({} episodes)",
        spec.dir_name(),
        config.episodes
    );
    Ok(RunOutput { spec, dir, metrics })
}

/// Every scheduler on every seed, in parallel, followed by the summary
/// table (`summary.csv`, `summary.txt`) and the top-level manifest.
pub fn run_experiment(
    config: &ScenarioConfig,
    out: &Path,
) -> Result<(Vec<RunOutput>, ComparisonTable)> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let specs: Vec<RunSpec> = config
        .seeds
        .iter()
        .flat_map(|&seed| {
            config
                .schedulers
                .iter()
                .map(move |&scheduler| RunSpec { scheduler, seed })
        })
        .collect();
    write_json(&out.join("manifest.json"), &manifest(config, specs.clone()))?;
    let outputs: Vec<RunOutput> = specs
        .par_iter()
        .map(|&spec| run_single(config, spec, Some(out)))
        .collect::<Result<_>>()?;
    let streams: Vec<MetricStream> = outputs
        .iter()
        .map(|o| MetricStream {
            scheduler: o.spec.scheduler.to_string(),
            seed: o.spec.seed,
            rows: o.metrics.iter().map(|m| m.row()).collect(),
        })
        .collect();
    let table = summarize(&streams)?;
    table.write_csv(out.join("summary.csv"))?;
    fs::write(out.join("summary.txt"), table.to_text())?;
    Ok((outputs, table))
}

/// Reads every `*/metrics.csv` below `dir` and summarizes them.
pub fn summarize_dir(dir: &Path) -> Result<ComparisonTable> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("metrics.csv").is_file())
        .collect();
    entries.sort();
    let streams = entries
        .iter()
        .map(|p| {
            let seed = p
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.rsplit_once("-seed"))
                .and_then(|(_, s)| s.parse().ok())
                .unwrap_or(0);
            MetricStream::load(p.join("metrics.csv"), seed)
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(&streams)
}
