//! Episode loop, experiment runner and result files.

mod config;
mod episode;
mod experiment;
mod metrics;
mod summary;

pub use config::{CpuScenario, ScenarioConfig};
pub use episode::{run_episode, AuditRecord, Run};
pub use experiment::{run_experiment, run_single, summarize_dir, RunOutput, RunSpec};
pub use metrics::{
    read_metrics, write_metrics, EpisodeMetrics, MetricsRow, CLASS_COUNT, METRICS_HEADER,
};
pub use summary::{summarize, tail_mean, ComparisonTable, MetricStream, TableRow};
