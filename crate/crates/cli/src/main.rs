use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nfvsched::approximator::NetShape;
use nfvsched::harness::{run_experiment, summarize_dir, CpuScenario};
use nfvsched::workload::{generate_batch, write_batch};
use nfvsched::{ScenarioConfig, SchedulerKind};

#[derive(Parser)]
#[command(
    name = "nfvsched",
    version,
    about = "Starvation-aware NFV scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scheduler on every seed and write metrics plus a summary table.
    Run(RunArgs),
    /// Rebuild the comparison table from an existing output directory.
    Summarize { dir: PathBuf },
    /// Write one batch of service requests as JSON lines.
    Generate(GenerateArgs),
    /// Print a configuration file with every field filled in.
    Config {
        /// Start from the desk preset (200 episodes of 50 services).
        #[arg(long)]
        desk: bool,
    },
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration; unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the desk preset instead of full scale.
    #[arg(long, conflicts_with = "config")]
    desk: bool,
    /// Built-in topology name (netrail, bteurope) or topology file.
    #[arg(long)]
    topology: Option<String>,
    /// CPU scenario: 12-4 or 12-8.
    #[arg(long)]
    scenario: Option<CpuScenario>,
}

impl Overrides {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?
            }
            None if self.desk => ScenarioConfig::desk(),
            None => ScenarioConfig::default(),
        };
        if let Some(t) = &self.topology {
            cfg.topology = t.clone();
        }
        if let Some(s) = self.scenario {
            cfg.scenario = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    base: Overrides,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seeds to run; repeat the flag for several.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Schedulers to run; repeat the flag for several.
    #[arg(long = "scheduler")]
    schedulers: Vec<SchedulerKind>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    services: Option<usize>,
    /// Hidden geometry for every network, as LAYERSxUNITS (e.g. 2x64).
    #[arg(long, value_parser = parse_shape)]
    hidden: Option<NetShape>,
    /// Write a per-service placement log.
    #[arg(long)]
    audit: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    base: Overrides,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Output file; one request per line.
    #[arg(long)]
    out: PathBuf,
}

fn parse_shape(s: &str) -> Result<NetShape> {
    let Some((l, u)) = s.split_once(['x', 'X']) else {
        bail!("expected LAYERSxUNITS, got `{s}`");
    };
    Ok(NetShape::small(l.trim().parse()?, u.trim().parse()?))
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = args.base.resolve()?;
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds;
    }
    if !args.schedulers.is_empty() {
        cfg.schedulers = args.schedulers;
    }
    if let Some(e) = args.episodes {
        cfg.episodes = e;
    }
    if let Some(s) = args.services {
        cfg.services_per_episode = s;
    }
    if let Some(shape) = args.hidden {
        cfg.ddpg.actor_shape = shape;
        cfg.ddpg.critic_shape = shape;
        cfg.ddql.shape = shape;
    }
    cfg.audit |= args.audit;
    cfg.validate()?;
    log::info!(
        "{} {}: {} episodes x {} services, {} runs",
        cfg.topology,
        cfg.scenario,
        cfg.episodes,
        cfg.services_per_episode,
        cfg.seeds.len() * cfg.schedulers.len()
    );
    let (_, table) = run_experiment(&cfg, &args.out)?;
    print!("{}", table.to_text());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Summarize { dir } => {
            let table =
                summarize_dir(&dir).with_context(|| format!("summarizing {}", dir.display()))?;
            print!("{}", table.to_text());
            Ok(())
        }
        Command::Generate(args) => {
            let cfg = args.base.resolve()?;
            let batch = generate_batch(args.seed, args.count, &cfg.effective_workload());
            write_batch(&args.out, &batch)?;
            eprintln!("wrote {} requests to {}", batch.len(), args.out.display());
            Ok(())
        }
        Command::Config { desk } => {
            let cfg = if desk {
                ScenarioConfig::desk()
            } else {
                ScenarioConfig::default()
            };
            print!("{}", cfg.to_toml_string()?);
            Ok(())
        }
    }
}
