use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::{Activation, Adam, Mlp, NetShape};
use crate::error::{Error, Result};
use crate::replay::ReplayBuffer;
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdqlConfig {
    pub shape: NetShape,
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub memory_size: usize,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    /// Hard target sync period, in gradient steps.
    pub target_sync: usize,
    /// One gradient step per this many stored transitions.
    pub train_every: usize,
}

impl Default for DdqlConfig {
    fn default() -> Self {
        DdqlConfig {
            shape: NetShape::small(2, 64),
            learning_rate: 1e-3,
            gamma: 0.9,
            batch_size: 32,
            memory_size: 10_000,
            epsilon_start: 1.0,
            epsilon_decay: 0.995,
            epsilon_min: 0.05,
            target_sync: 100,
            train_every: 1,
        }
    }
}

impl DdqlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.memory_size < self.batch_size {
            return Err(Error::Config(
                "ddql: need 0 < batch_size <= memory_size".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_min)
            || !(0.0..=1.0).contains(&self.epsilon_decay)
        {
            return Err(Error::Config(
                "ddql: epsilon schedule must lie in [0, 1]".into(),
            ));
        }
        if self.target_sync == 0 || self.train_every == 0 {
            return Err(Error::Config(
                "ddql: target_sync and train_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTransition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Actions available in `next_state`.
    pub next_mask: Vec<bool>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct DdqlAgent {
    config: DdqlConfig,
    online: Mlp,
    target: Mlp,
    opt: Adam,
    buffer: ReplayBuffer<EmbedTransition>,
    epsilon: f64,
    updates: usize,
    stored: usize,
    eps_rng: SimRng,
    sample_rng: SimRng,
}

fn masked_argmax(q: &[f64], mask: &[bool]) -> Option<usize> {
    q.iter()
        .enumerate()
        .filter(|(i, _)| mask.get(*i).copied().unwrap_or(false))
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

impl DdqlAgent {
    pub fn new(config: DdqlConfig, state_size: usize, actions: usize, seed: u64) -> Self {
        let mut init = stream(seed, Stream::DdqlInit);
        let online = Mlp::new(
            &config.shape.sizes(state_size, actions),
            Activation::Sigmoid,
            Activation::Identity,
            &mut init,
        );
        DdqlAgent {
            opt: Adam::new(&online, config.learning_rate),
            target: online.clone(),
            online,
            buffer: ReplayBuffer::new(config.memory_size),
            epsilon: config.epsilon_start,
            updates: 0,
            stored: 0,
            eps_rng: stream(seed, Stream::DdqlEpsilon),
            sample_rng: stream(seed, Stream::DdqlSample),
            config,
        }
    }

    pub fn config(&self) -> &DdqlConfig {
        &self.config
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, eps: f64) {
        self.epsilon = eps.clamp(0.0, 1.0);
    }

    pub fn state_size(&self) -> usize {
        self.online.input_size()
    }

    pub fn actions(&self) -> usize {
        self.online.output_size()
    }

    pub fn end_episode(&mut self) {
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_min);
    }

    /// Epsilon-greedy over the allowed actions; `None` when nothing is allowed.
    pub fn select_action(&mut self, state: &[f64], mask: &[bool]) -> Result<Option<usize>> {
        let allowed: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        if allowed.is_empty() {
            return Ok(None);
        }
        if self.eps_rng.random::<f64>() < self.epsilon {
            return Ok(Some(allowed[self.eps_rng.random_range(0..allowed.len())]));
        }
        let q = self.online.forward(state)?;
        Ok(masked_argmax(&q, mask))
    }

    /// Double-Q targets: the online net picks the next action, the target
    /// net values it.
    pub fn targets(&self, batch: &[EmbedTransition]) -> Result<Vec<f64>> {
        let next: Vec<Vec<f64>> = batch.iter().map(|t| t.next_state.clone()).collect();
        let q_online = self.online.forward_batch(&next)?;
        let q_target = self.target.forward_batch(&next)?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if t.done {
                    return t.reward;
                }
                match masked_argmax(&q_online[i], &t.next_mask) {
                    Some(a) => t.reward + self.config.gamma * q_target[i][a],
                    None => t.reward,
                }
            })
            .collect())
    }

    pub fn remember(&mut self, t: EmbedTransition) -> Result<Option<f64>> {
        self.buffer.push(t);
        self.stored += 1;
        if self.stored.is_multiple_of(self.config.train_every) {
            self.train_step()
        } else {
            Ok(None)
        }
    }

    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch: Vec<EmbedTransition> = self
            .buffer
            .sample(self.config.batch_size, &mut self.sample_rng)
            .into_iter()
            .cloned()
            .collect();
        self.train_on(&batch).map(Some)
    }

    /// One Adam step on the squared TD error of the taken actions.
    pub fn train_on(&mut self, batch: &[EmbedTransition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty training batch".into()));
        }
        let y = self.targets(batch)?;
        let states: Vec<Vec<f64>> = batch.iter().map(|t| t.state.clone()).collect();
        let q = self.online.forward_train(&states)?;
        let n_act = self.actions();
        let mut loss = 0.0;
        let grads: Vec<Vec<f64>> = batch
            .iter()
            .zip(&q)
            .zip(&y)
            .map(|((t, qs), &target)| {
                let err = qs[t.action] - target;
                loss += err * err;
                let mut g = vec![0.0; n_act];
                g[t.action] = 2.0 * err;
                g
            })
            .collect();
        loss /= batch.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("ddql loss"));
        }
        let (g, _) = self.online.backward(&grads)?;
        self.opt.step(&mut self.online, &g)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync) {
            self.target.copy_from(&self.online);
        }
        Ok(loss)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.online.save(path)
    }

    #[cfg(test)]
    pub(crate) fn nets_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        (&mut self.online, &mut self.target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> DdqlAgent {
        DdqlAgent::new(
            DdqlConfig {
                shape: NetShape::small(1, 4),
                batch_size: 2,
                gamma: 0.5,
                ..Default::default()
            },
            2,
            2,
            seed,
        )
    }

    fn tr(
        state: [f64; 2],
        action: usize,
        reward: f64,
        next: [f64; 2],
        done: bool,
    ) -> EmbedTransition {
        EmbedTransition {
            state: state.to_vec(),
            action,
            reward,
            next_state: next.to_vec(),
            next_mask: vec![true, true],
            done,
        }
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let agent = tiny(1);
        let b = vec![
            tr([1.0, 0.0], 0, 3.5, [0.0, 1.0], true),
            tr([0.0, 1.0], 1, -2.0, [1.0, 0.0], true),
        ];
        assert_eq!(agent.targets(&b).unwrap(), vec![3.5, -2.0]);
    }

    #[test]
    fn equal_nets_reduce_to_max_target() {
        let agent = tiny(2);
        assert_eq!(agent.online(), agent.target());
        let b = vec![tr([1.0, 0.0], 0, 1.0, [0.3, 0.8], false)];
        let q = agent.target().forward(&[0.3, 0.8]).unwrap();
        let max = q[0].max(q[1]);
        assert!((agent.targets(&b).unwrap()[0] - (1.0 + 0.5 * max)).abs() < 1e-12);
    }

    #[test]
    fn tabular_double_q_by_hand() {
        // Linear nets with one-hot states act as Q tables: Q(s_k, a) = bias[a] + W[a][k].
        let mut agent = DdqlAgent::new(
            DdqlConfig {
                shape: NetShape::small(0, 0),
                gamma: 0.5,
                batch_size: 2,
                ..Default::default()
            },
            2,
            2,
            3,
        );
        {
            let (online, target) = agent.nets_mut();
            let l = &mut online.layers_mut()[0];
            // online: Q(s1, .) = [1, 5]  -> argmax action 1
            l.weights = vec![0.0, 1.0, 0.0, 5.0];
            l.bias = vec![0.0, 0.0];
            let l = &mut target.layers_mut()[0];
            // target: Q(s1, .) = [9, 2]  -> double-Q uses 2, not 9
            l.weights = vec![0.0, 9.0, 0.0, 2.0];
            l.bias = vec![0.0, 0.0];
        }
        let b = vec![
            tr([1.0, 0.0], 0, 1.0, [0.0, 1.0], false),
            tr([0.0, 1.0], 1, 4.0, [1.0, 0.0], false),
        ];
        // s0 row: online [0, 0] -> ties pick action 0; target Q(s0, 0) = 0.
        assert_eq!(
            agent.targets(&b).unwrap(),
            vec![1.0 + 0.5 * 2.0, 4.0 + 0.5 * 0.0]
        );
    }

    #[test]
    fn masked_selection() {
        let mut agent = tiny(4);
        agent.set_epsilon(0.0);
        assert_eq!(
            agent.select_action(&[0.1, 0.2], &[false, true]).unwrap(),
            Some(1)
        );
        assert_eq!(
            agent.select_action(&[0.1, 0.2], &[false, false]).unwrap(),
            None
        );
        agent.set_epsilon(1.0);
        for _ in 0..50 {
            assert_eq!(
                agent.select_action(&[0.1, 0.2], &[true, false]).unwrap(),
                Some(0)
            );
        }
    }

    #[test]
    fn epsilon_schedule() {
        let mut agent = tiny(5);
        for _ in 0..2000 {
            agent.end_episode();
        }
        assert_eq!(agent.epsilon(), 0.05);
    }
}
