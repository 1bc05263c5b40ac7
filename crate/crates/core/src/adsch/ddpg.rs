use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SchedState;
use crate::approximator::{Activation, Adam, Mlp, NetShape};
use crate::error::{Error, Result};
use crate::replay::ReplayBuffer;
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub actor_shape: NetShape,
    pub critic_shape: NetShape,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub memory_size: usize,
    pub tau: f64,
    pub noise_sigma: f64,
    /// Multiplier applied to `noise_sigma` after each episode.
    pub noise_decay: f64,
    /// Gradient steps after each episode; `None` means one per stored
    /// transition.
    pub updates_per_episode: Option<usize>,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            actor_shape: NetShape::default(),
            critic_shape: NetShape::default(),
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            batch_size: 64,
            memory_size: 50_000,
            tau: 0.001,
            noise_sigma: 0.1,
            noise_decay: 0.999,
            updates_per_episode: None,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.memory_size < self.batch_size {
            return Err(Error::Config(
                "ddpg: need 0 < batch_size <= memory_size".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(
                "ddpg: gamma and tau must lie in [0, 1]".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) || !(self.actor_lr > 0.0) || !(self.critic_lr > 0.0) {
            return Err(Error::Config(
                "ddpg: learning rates must be > 0 and sigma >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: [f64; 3],
    pub action: f64,
    pub reward: f64,
    pub next_state: [f64; 3],
    pub done: bool,
}

/// Ranks and the resulting service order (indices, front first).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedQueue {
    pub ranks: Vec<f64>,
    pub order: Vec<usize>,
}

impl RankedQueue {
    /// Sorts by rank, highest first; equal ranks keep arrival order.
    pub fn from_ranks(ranks: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..ranks.len()).collect();
        order.sort_by(|&a, &b| ranks[b].total_cmp(&ranks[a]));
        RankedQueue { ranks, order }
    }
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    config: DdpgConfig,
    actor: Mlp,
    critic: Mlp,
    target_actor: Mlp,
    target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    buffer: ReplayBuffer<Transition>,
    sigma: f64,
    noise_rng: SimRng,
    sample_rng: SimRng,
}

fn critic_input(state: &[f64; 3], action: f64) -> Vec<f64> {
    vec![state[0], state[1], state[2], action]
}

impl DdpgAgent {
    pub fn new(config: DdpgConfig, seed: u64) -> Self {
        let mut init = stream(seed, Stream::DdpgInit);
        let actor = Mlp::new(
            &config.actor_shape.sizes(3, 1),
            Activation::Sigmoid,
            Activation::Sigmoid,
            &mut init,
        );
        let critic = Mlp::new(
            &config.critic_shape.sizes(4, 1),
            Activation::Sigmoid,
            Activation::Identity,
            &mut init,
        );
        DdpgAgent {
            actor_opt: Adam::new(&actor, config.actor_lr),
            critic_opt: Adam::new(&critic, config.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(config.memory_size),
            sigma: config.noise_sigma,
            noise_rng: stream(seed, Stream::DdpgNoise),
            sample_rng: stream(seed, Stream::DdpgSample),
            config,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.config
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn target_actor(&self) -> &Mlp {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &Mlp {
        &self.target_critic
    }

    pub fn noise_sigma(&self) -> f64 {
        self.sigma
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn rank(&self, state: &SchedState) -> Result<f64> {
        Ok(self.actor.forward(&state.to_array())?[0])
    }

    /// Ranks every service and sorts the queue. With `explore`, Gaussian
    /// noise is added to each rank and clipped to `[0, 1]`.
    pub fn rank_queue(&mut self, states: &[SchedState], explore: bool) -> Result<RankedQueue> {
        let inputs: Vec<Vec<f64>> = states.iter().map(|s| s.to_array().to_vec()).collect();
        let out = self.actor.forward_batch(&inputs)?;
        let noise = Normal::new(0.0, self.sigma.max(0.0)).expect("finite sigma");
        let ranks = out
            .into_iter()
            .map(|o| {
                let mut r = o[0];
                if explore && self.sigma > 0.0 {
                    r += noise.sample(&mut self.noise_rng);
                }
                r.clamp(0.0, 1.0)
            })
            .collect();
        Ok(RankedQueue::from_ranks(ranks))
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn end_episode(&mut self) {
        self.sigma *= self.config.noise_decay;
    }

    /// `r + gamma * Q'(s', mu'(s')) * (1 - done)` per transition.
    pub fn critic_targets(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        let next: Vec<Vec<f64>> = batch.iter().map(|t| t.next_state.to_vec()).collect();
        let next_actions = self.target_actor.forward_batch(&next)?;
        let q_in: Vec<Vec<f64>> = batch
            .iter()
            .zip(&next_actions)
            .map(|(t, a)| critic_input(&t.next_state, a[0]))
            .collect();
        let q_next = self.target_critic.forward_batch(&q_in)?;
        Ok(batch
            .iter()
            .zip(&q_next)
            .map(|(t, q)| {
                let cont = if t.done { 0.0 } else { 1.0 };
                t.reward + self.config.gamma * q[0] * cont
            })
            .collect())
    }

    /// One update on a sampled minibatch; `None` until the buffer holds a
    /// full batch.
    pub fn train_step(&mut self) -> Result<Option<(f64, f64)>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch: Vec<Transition> = self
            .buffer
            .sample(self.config.batch_size, &mut self.sample_rng)
            .into_iter()
            .copied()
            .collect();
        self.train_on(&batch).map(Some)
    }

    /// Critic regression to the TD target, actor ascent on the critic, then
    /// soft target updates. Returns `(critic loss, mean Q(s, mu(s)))`.
    pub fn train_on(&mut self, batch: &[Transition]) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty training batch".into()));
        }
        let targets = self.critic_targets(batch)?;

        let q_in: Vec<Vec<f64>> = batch
            .iter()
            .map(|t| critic_input(&t.state, t.action))
            .collect();
        let q = self.critic.forward_train(&q_in)?;
        let n = batch.len() as f64;
        let critic_loss = q
            .iter()
            .zip(&targets)
            .map(|(q, y)| (q[0] - y).powi(2))
            .sum::<f64>()
            / n;
        if !critic_loss.is_finite() {
            return Err(Error::NonFinite("critic loss"));
        }
        let grads: Vec<Vec<f64>> = q
            .iter()
            .zip(&targets)
            .map(|(q, y)| vec![2.0 * (q[0] - y)])
            .collect();
        let (g, _) = self.critic.backward(&grads)?;
        self.critic_opt.step(&mut self.critic, &g)?;

        let states: Vec<Vec<f64>> = batch.iter().map(|t| t.state.to_vec()).collect();
        let actions = self.actor.forward_train(&states)?;
        let qa_in: Vec<Vec<f64>> = batch
            .iter()
            .zip(&actions)
            .map(|(t, a)| critic_input(&t.state, a[0]))
            .collect();
        let qa = self.critic.forward_train(&qa_in)?;
        let objective = qa.iter().map(|v| v[0]).sum::<f64>() / n;
        if !objective.is_finite() {
            return Err(Error::NonFinite("actor objective"));
        }
        // Minimize -Q: the critic's input gradient w.r.t. the action slot
        // becomes the actor's output gradient.
        let neg: Vec<Vec<f64>> = vec![vec![-1.0]; batch.len()];
        let (_, input_grads) = self.critic.backward(&neg)?;
        let actor_out: Vec<Vec<f64>> = input_grads.iter().map(|g| vec![g[3]]).collect();
        let (ga, _) = self.actor.backward(&actor_out)?;
        self.actor_opt.step(&mut self.actor, &ga)?;
        self.critic.clear_tape();

        self.target_actor
            .soft_update_from(&self.actor, self.config.tau);
        self.target_critic
            .soft_update_from(&self.critic, self.config.tau);
        Ok((critic_loss, objective))
    }

    pub fn save(&self, dir: impl AsRef<std::path::Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.actor.save(dir.join("actor.json"))?;
        self.critic.save(dir.join("critic.json"))?;
        Ok(())
    }
}
