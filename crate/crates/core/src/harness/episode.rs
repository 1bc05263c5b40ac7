use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::metrics::EpisodeMetrics;
use crate::admission::{admit, WaitMatrix};
use crate::adsch::{
    fifo_order, positions, priority_order, reward, wfq_order, DdpgAgent, SchedState, SchedulerKind,
    Transition,
};
use crate::dypr::{PriorityLabel, RidgeModel};
use crate::embed::{embed_service, state_size, DdqlAgent};
use crate::error::Result;
use crate::rng::{stream, SimRng, Stream};
use crate::substrate::SubstrateNetwork;
use crate::workload::{generate_batch, WorkloadConfig};

const HIGH_PRIORITY: f64 = 0.8;

/// Per-service trace line written when auditing is enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub episode: usize,
    pub service: usize,
    pub position: usize,
    pub assigned_priority: f64,
    pub true_priority: f64,
    pub threshold_wait: f64,
    pub total_wait: f64,
    pub admitted: bool,
    pub embedded: bool,
    pub duration: usize,
    pub hosts: Vec<usize>,
    pub reward: f64,
}

/// One scheduler on one seed: the agents and streams that persist across
/// episodes.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: ScenarioConfig,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    workload: WorkloadConfig,
    network: SubstrateNetwork,
    ridge: RidgeModel,
    ddpg: Option<DdpgAgent>,
    ddql: DdqlAgent,
    workload_rng: SimRng,
    dypr_rng: SimRng,
    audit: Vec<AuditRecord>,
}

impl Run {
    pub fn new(config: &ScenarioConfig, scheduler: SchedulerKind, seed: u64) -> Result<Self> {
        config.validate()?;
        let network = config.network()?;
        let h = network.node_count();
        Ok(Run {
            workload: config.effective_workload(),
            ridge: RidgeModel::new(config.ridge.clone()),
            ddpg: scheduler
                .is_learning()
                .then(|| DdpgAgent::new(config.ddpg.clone(), seed)),
            ddql: DdqlAgent::new(config.ddql.clone(), state_size(h), h, seed),
            workload_rng: stream(seed, Stream::Workload),
            dypr_rng: stream(seed, Stream::Dypr),
            network,
            audit: Vec::new(),
            config: config.clone(),
            scheduler,
            seed,
        })
    }

    pub fn ridge(&self) -> &RidgeModel {
        &self.ridge
    }

    pub fn ddpg(&self) -> Option<&DdpgAgent> {
        self.ddpg.as_ref()
    }

    pub fn ddql(&self) -> &DdqlAgent {
        &self.ddql
    }

    /// Initial substrate; every episode starts from a copy of it.
    pub fn network(&self) -> &SubstrateNetwork {
        &self.network
    }

    pub fn take_audit(&mut self) -> Vec<AuditRecord> {
        std::mem::take(&mut self.audit)
    }
}

/// One episode: fresh substrate and batch, prioritization, queue ordering,
/// then sequential admission and embedding. Learning agents are updated at
/// the end.
pub fn run_episode(run: &mut Run, episode: usize) -> Result<EpisodeMetrics> {
    let cfg = &run.config;
    let mut network = run.network.clone();
    let batch_seed: u64 = run.workload_rng.random();
    let mut services = generate_batch(batch_seed, cfg.services_per_episode, &run.workload);
    let n = services.len();

    for s in services.iter_mut() {
        let p = run
            .ridge
            .ingest(&s.qos.features(), s.true_priority, &mut run.dypr_rng)?;
        s.assigned_priority = Some(p);
    }

    let states = SchedState::for_batch(&services);
    let mut ranks: Option<Vec<f64>> = None;
    let order = match run.scheduler {
        SchedulerKind::Fifo => fifo_order(&services),
        SchedulerKind::Wfq => wfq_order(&services),
        SchedulerKind::Priority => priority_order(&services),
        SchedulerKind::Ddpg => {
            let agent = run.ddpg.as_mut().expect("learning scheduler has an agent");
            let q = agent.rank_queue(&states, true)?;
            ranks = Some(q.ranks);
            q.order
        }
    };
    let pos = positions(&order);

    let mut m = EpisodeMetrics::empty(episode, run.scheduler);
    m.offered = n;
    let low = cfg.reward.starving_threshold;
    let rewards: Vec<f64> = (0..n)
        .map(|i| reward(&states[i], pos[i], &cfg.reward))
        .collect();
    let mut waits = WaitMatrix::new(n);
    let mut total_wait = 0.0;

    for (k, &i) in order.iter().enumerate() {
        let svc = &services[i];
        let wait = waits.total_wait(k)?;
        total_wait += wait;
        let is_low = svc.true_priority <= low;
        let is_high = svc.true_priority > HIGH_PRIORITY;
        let class = PriorityLabel::from_value(svc.true_priority).macro_class as usize;
        m.class_offered[class] += 1;
        m.offered_low += usize::from(is_low);
        m.offered_high += usize::from(is_high);

        let admitted = admit(wait, svc.threshold_wait) == 1;
        let mut embedded = false;
        let mut duration = 0;
        let mut hosts = Vec::new();
        if admitted {
            let out = embed_service(
                &mut run.ddql,
                &mut network,
                svc,
                &cfg.embed,
                cfg.embed_learning,
            )?;
            duration = out.steps;
            m.embed_reward += out.total_reward;
            embedded = out.success;
            hosts = out.assignments;
        } else {
            m.timeouts += 1;
        }
        waits.record_deployment(k, duration as f64)?;

        if embedded {
            m.accepted += 1;
            m.class_accepted[class] += 1;
            m.accepted_low += usize::from(is_low);
            m.accepted_high += usize::from(is_high);
        } else if admitted {
            m.embed_rejected += 1;
        }
        if cfg.audit {
            run.audit.push(AuditRecord {
                episode,
                service: svc.id,
                position: k,
                assigned_priority: svc.priority(),
                true_priority: svc.true_priority,
                threshold_wait: svc.threshold_wait,
                total_wait: wait,
                admitted,
                embedded,
                duration,
                hosts,
                reward: rewards[i],
            });
        }
    }

    if let (Some(agent), Some(ranks)) = (run.ddpg.as_mut(), ranks) {
        for i in 0..n {
            let last = i + 1 == n;
            agent.remember(Transition {
                state: states[i].to_array(),
                action: ranks[i],
                reward: rewards[i],
                next_state: if last {
                    states[i].to_array()
                } else {
                    states[i + 1].to_array()
                },
                done: last,
            });
        }
        let updates = agent.config().updates_per_episode.unwrap_or(n);
        for _ in 0..updates {
            agent.train_step()?;
        }
        agent.end_episode();
    }
    run.ddql.end_episode();

    m.total_reward = rewards.iter().sum();
    if n > 0 {
        m.mean_reward = m.total_reward / n as f64;
        m.mean_wait = total_wait / n as f64;
    }
    m.rr_state = run.ridge.state();
    m.rr_accuracy = run.ridge.last_accuracy();
    m.check()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::NetShape;

    fn quick(scheduler: SchedulerKind) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::desk();
        cfg.episodes = 3;
        cfg.services_per_episode = 20;
        cfg.schedulers = vec![scheduler];
        cfg.ddpg.actor_shape = NetShape::small(1, 8);
        cfg.ddpg.critic_shape = NetShape::small(1, 8);
        cfg.ddpg.batch_size = 8;
        cfg.ddql.shape = NetShape::small(1, 8);
        cfg
    }

    #[test]
    fn empty_episode() {
        let mut cfg = quick(SchedulerKind::Fifo);
        cfg.services_per_episode = 0;
        let mut run = Run::new(&cfg, SchedulerKind::Fifo, 1).unwrap();
        let m = run_episode(&mut run, 0).unwrap();
        assert_eq!(m.offered, 0);
        assert_eq!(m.sar(), None);
    }

    #[test]
    fn infeasible_services_are_embedding_rejections() {
        let mut cfg = quick(SchedulerKind::Fifo);
        cfg.workload.threshold_wait = crate::workload::Range::new(1000.0, 1000.0);
        cfg.workload.short_wait_fraction = 0.0;
        let mut run = Run::new(&cfg, SchedulerKind::Fifo, 2).unwrap();
        // No node can host even a single core.
        run.network = run.network.clone().with_uniform_cpu(0);
        let m = run_episode(&mut run, 0).unwrap();
        assert_eq!(m.sar(), Some(0.0));
        assert_eq!(m.timeouts, 0);
        assert_eq!(m.embed_rejected, m.offered);
    }

    #[test]
    fn baseline_episodes_are_reproducible() {
        for s in [
            SchedulerKind::Fifo,
            SchedulerKind::Wfq,
            SchedulerKind::Priority,
        ] {
            let cfg = quick(s);
            let mut a = Run::new(&cfg, s, 9).unwrap();
            let mut b = Run::new(&cfg, s, 9).unwrap();
            for e in 0..3 {
                assert_eq!(
                    run_episode(&mut a, e).unwrap(),
                    run_episode(&mut b, e).unwrap()
                );
            }
        }
    }

    #[test]
    fn ddpg_episode_fills_replay() {
        let cfg = quick(SchedulerKind::Ddpg);
        let mut run = Run::new(&cfg, SchedulerKind::Ddpg, 4).unwrap();
        for e in 0..2 {
            run_episode(&mut run, e).unwrap();
        }
        assert_eq!(run.ddpg().unwrap().buffer_len(), 40);
    }

    #[test]
    fn audit_records_every_service() {
        let mut cfg = quick(SchedulerKind::Priority);
        cfg.audit = true;
        let mut run = Run::new(&cfg, SchedulerKind::Priority, 5).unwrap();
        let m = run_episode(&mut run, 0).unwrap();
        let audit = run.take_audit();
        assert_eq!(audit.len(), m.offered);
        assert_eq!(audit.iter().filter(|r| r.embedded).count(), m.accepted);
        // Queue order follows assigned priority classes.
        let labels: Vec<_> = audit
            .iter()
            .map(|r| PriorityLabel::from_value(r.assigned_priority))
            .collect();
        assert!(labels
            .windows(2)
            .all(|w| (w[0].macro_class, w[0].micro_class) >= (w[1].macro_class, w[1].micro_class)));
        // Waits only grow along the queue.
        assert!(audit.windows(2).all(|w| w[0].total_wait <= w[1].total_wait));
    }
}
