use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adsch::{DdpgConfig, RewardParams, SchedulerKind};
use crate::dypr::RidgeConfig;
use crate::embed::{DdqlConfig, EmbedParams};
use crate::error::{Error, Result};
use crate::substrate::SubstrateNetwork;
use crate::workload::WorkloadConfig;

/// Node CPU and largest per-VNF CPU demand, written `node-vnf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CpuScenario {
    C12x4,
    C12x8,
}

impl CpuScenario {
    pub fn node_cpu(self) -> u32 {
        12
    }

    pub fn vnf_cpu_max(self) -> u32 {
        match self {
            CpuScenario::C12x4 => 4,
            CpuScenario::C12x8 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CpuScenario::C12x4 => "12-4",
            CpuScenario::C12x8 => "12-8",
        }
    }
}

impl fmt::Display for CpuScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CpuScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "12-4" => Ok(CpuScenario::C12x4),
            "12-8" => Ok(CpuScenario::C12x8),
            other => Err(Error::Config(format!(
                "unknown cpu scenario `{other}` (expected 12-4 or 12-8)"
            ))),
        }
    }
}

impl Serialize for CpuScenario {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CpuScenario {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const MAX_SERVICES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Built-in topology name or a path to a topology file.
    pub topology: String,
    pub scenario: CpuScenario,
    pub episodes: usize,
    pub services_per_episode: usize,
    pub schedulers: Vec<SchedulerKind>,
    pub seeds: Vec<u64>,
    /// Whether the embedding agent keeps learning during the run.
    pub embed_learning: bool,
    /// Writes a per-service placement log next to the metrics.
    pub audit: bool,
    pub workload: WorkloadConfig,
    pub ridge: RidgeConfig,
    pub reward: RewardParams,
    pub ddpg: DdpgConfig,
    pub ddql: DdqlConfig,
    pub embed: EmbedParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            topology: "netrail".into(),
            scenario: CpuScenario::C12x4,
            episodes: 2000,
            services_per_episode: MAX_SERVICES,
            schedulers: SchedulerKind::ALL.to_vec(),
            seeds: vec![1],
            embed_learning: true,
            audit: false,
            workload: WorkloadConfig::default(),
            ridge: RidgeConfig::default(),
            reward: RewardParams::default(),
            ddpg: DdpgConfig::default(),
            ddql: DdqlConfig::default(),
            embed: EmbedParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// 200 episodes of 50 services: minutes instead of hours.
    pub fn desk() -> Self {
        ScenarioConfig {
            episodes: 200,
            services_per_episode: 50,
            ..Default::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Workload with the scenario's per-VNF CPU cap applied.
    pub fn effective_workload(&self) -> WorkloadConfig {
        WorkloadConfig {
            vnf_cpu_max: self.scenario.vnf_cpu_max(),
            ..self.workload.clone()
        }
    }

    pub fn network(&self) -> Result<SubstrateNetwork> {
        Ok(SubstrateNetwork::resolve(&self.topology)?.with_uniform_cpu(self.scenario.node_cpu()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be positive".into()));
        }
        if self.services_per_episode > MAX_SERVICES {
            return Err(Error::Config(format!(
                "services_per_episode must be at most {MAX_SERVICES}"
            )));
        }
        if self.schedulers.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "need at least one scheduler and one seed".into(),
            ));
        }
        let mut seen = self.schedulers.clone();
        seen.sort_by_key(|s| s.as_str());
        seen.dedup();
        if seen.len() != self.schedulers.len() {
            return Err(Error::Config("schedulers listed twice".into()));
        }
        self.effective_workload().validate()?;
        self.ridge.validate()?;
        self.reward.validate()?;
        self.ddpg.validate()?;
        self.ddql.validate()?;
        if !(self.embed.penalty.is_finite() && self.embed.points.is_finite()) {
            return Err(Error::Config("embed reward points must be finite".into()));
        }
        if self.embed.max_attempts == Some(0) {
            return Err(Error::Config("embed.max_attempts must be positive".into()));
        }
        self.network()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
        ScenarioConfig::desk().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig::desk();
        cfg.scenario = CpuScenario::C12x8;
        cfg.schedulers = vec![SchedulerKind::Fifo, SchedulerKind::Ddpg];
        cfg.seeds = vec![3, 4];
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = ScenarioConfig::from_toml_str(
            "topology = \"bteurope\"\nscenario = \"12-8\"\nepisodes = 5\n[reward]\ndecay_base = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.topology, "bteurope");
        assert_eq!(cfg.effective_workload().vnf_cpu_max, 8);
        assert_eq!(cfg.reward.decay_base, 0.5);
        assert_eq!(cfg.services_per_episode, MAX_SERVICES);
    }

    #[test]
    fn invalid_configs() {
        for text in [
            "episodes = 0",
            "services_per_episode = 101",
            "scenario = \"16-4\"",
            "schedulers = []",
            "schedulers = [\"fifo\", \"fifo\"]",
            "topology = \"atlantis\"",
            "unknown_knob = 1",
            "[ddpg]\nbatch_size = 0",
        ] {
            assert!(ScenarioConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}
