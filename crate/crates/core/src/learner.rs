//! Shared temporal-difference learner: online net, soft-updated target net
//! and Adam state.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::nn::{
    argmax, soft_update, td_targets, AdamState, HiddenState, KnowledgeEmbedderNet, KnowledgeInput, QModel, QNetwork,
    RecurrentQNetwork, SequenceInput,
};
use crate::replay::{EpisodeBuffer, EpisodeRecord, SequenceBatch, Transition, UniformBuffer};
use crate::scalar::Scalar;

/// Optimisation settings for one learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdConfig {
    pub lr: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl TdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be positive"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("soft_update", "must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", "must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar, M: Serialize + serde::de::DeserializeOwned")]
pub struct TdLearner<T, M> {
    pub online: M,
    pub target: M,
    pub adam: AdamState<T>,
    pub config: TdConfig,
    pub updates: u64,
}

impl<T: Scalar, M: QModel<T>> TdLearner<T, M> {
    /// The target starts as an exact copy of the online net.
    pub fn new(online: M, config: TdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            target: online.clone(),
            adam: AdamState::for_model(&online),
            online,
            config,
            updates: 0,
        })
    }

    /// One gradient step on the squared TD error followed by a soft target
    /// update. Returns the pre-step loss.
    pub fn update(
        &mut self,
        input: &M::Input,
        next_input: &M::Input,
        actions: &[usize],
        rewards: &[f64],
        dones: &[bool],
    ) -> Result<T> {
        let next_q = self.target.q_values(next_input)?;
        let targets = td_targets(&next_q, rewards, dones, self.config.gamma)?;
        let (loss, grads) = self.online.loss_and_grads(input, actions, &targets)?;
        self.adam.step(&mut self.online, &grads, self.config.lr)?;
        soft_update(&self.online, &mut self.target, self.config.tau)?;
        self.updates += 1;
        Ok(loss)
    }
}

/// Uniform draw first, then either a uniform action or the greedy one, so
/// the random stream advances identically regardless of the branch.
pub fn epsilon_greedy<T: Scalar, R: Rng + ?Sized>(q: &[T], epsilon: f64, rng: &mut R) -> usize {
    let explore = rng.gen::<f64>() < epsilon;
    let random = rng.gen_range(0..q.len());
    if explore {
        random
    } else {
        argmax(q.iter().copied())
    }
}

pub fn obs_row<T: Scalar>(obs: &Observation) -> Array2<T> {
    Observation::batch(std::iter::once(obs))
}

/// Stacked inputs, next inputs, actions, rewards and done flags.
pub struct TrainingBatch<I> {
    pub input: I,
    pub next_input: I,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl<I> TrainingBatch<I> {
    fn from_parts(transitions: &[&Transition], input: I, next_input: I) -> Self {
        Self {
            input,
            next_input,
            actions: transitions.iter().map(|t| t.action).collect(),
            rewards: transitions.iter().map(|t| t.reward).collect(),
            dones: transitions.iter().map(|t| t.done).collect(),
        }
    }

    pub fn apply<T: Scalar, M: QModel<T, Input = I>>(&self, learner: &mut TdLearner<T, M>) -> Result<T> {
        learner.update(&self.input, &self.next_input, &self.actions, &self.rewards, &self.dones)
    }
}

impl<T: Scalar> TrainingBatch<Array2<T>> {
    pub fn flat(transitions: &[&Transition]) -> Self {
        let obs = Observation::batch(transitions.iter().map(|t| &t.obs));
        let next = Observation::batch(transitions.iter().map(|t| &t.next_obs));
        Self::from_parts(transitions, obs, next)
    }
}

impl<T: Scalar> TrainingBatch<SequenceInput<T>> {
    /// Sequence-major rows; both streams start from a zero hidden state.
    pub fn sequences(batch: &SequenceBatch<'_>) -> Self {
        let flat: Vec<&Transition> = batch.iter_flat().collect();
        let wrap = |obs| SequenceInput {
            sequences: batch.batch_size(),
            seq_len: batch.seq_len,
            obs,
        };
        let obs = wrap(Observation::batch(flat.iter().map(|t| &t.obs)));
        let next = wrap(Observation::batch(flat.iter().map(|t| &t.next_obs)));
        Self::from_parts(&flat, obs, next)
    }
}

/// Batch size, replay capacity and update cadence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub batch_size: usize,
    pub buffer_size: usize,
    /// One optimisation step every `update_freq` pushes.
    pub update_freq: usize,
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.buffer_size < self.batch_size {
            return Err(Error::config("buffer_size", "must be at least batch_size"));
        }
        if self.update_freq == 0 {
            return Err(Error::config("update_freq", "must be positive"));
        }
        Ok(())
    }
}

/// Feed-forward Q-learner with its own uniform replay buffer.
#[derive(Clone, Debug)]
pub struct ReplayLearner<T> {
    pub td: TdLearner<T, QNetwork<T>>,
    pub buffer: UniformBuffer<Transition>,
    pub replay: ReplayConfig,
    pushes: u64,
}

impl<T: Scalar> ReplayLearner<T> {
    pub fn new(net: QNetwork<T>, td: TdConfig, replay: ReplayConfig) -> Result<Self> {
        replay.validate()?;
        Ok(Self {
            td: TdLearner::new(net, td)?,
            buffer: UniformBuffer::new(replay.buffer_size)?,
            replay,
            pushes: 0,
        })
    }

    pub fn q_values(&self, obs: &Observation) -> Result<Vec<T>> {
        Ok(self
            .td
            .online
            .forward(obs_row::<T>(obs).view())?
            .into_raw_vec_and_offset()
            .0)
    }

    pub fn greedy(&self, obs: &Observation) -> Result<usize> {
        Ok(argmax(self.q_values(obs)?))
    }

    /// Stores the transition and trains when the cadence is due and the
    /// buffer holds at least one batch. Returns the loss if a step ran.
    pub fn observe<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<Option<T>> {
        if t.action >= self.td.online.action_count() {
            return Err(Error::InvalidAction {
                action: t.action,
                count: self.td.online.action_count(),
            });
        }
        self.buffer.push(t);
        self.pushes += 1;
        if !self.pushes.is_multiple_of(self.replay.update_freq as u64) || self.buffer.len() < self.replay.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.replay.batch_size, rng)?;
        Ok(Some(TrainingBatch::flat(&batch).apply(&mut self.td)?))
    }
}

/// A transition paired with the side information the learner conditions on.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeTransition {
    pub transition: Transition,
    pub knowledge: Vec<f64>,
}

fn knowledge_rows<T: Scalar>(rows: &[&[f64]], len: usize) -> Array2<T> {
    Array2::from_shape_fn((rows.len(), len), |(i, j)| T::of(rows[i][j]))
}

/// Feed-forward Q-learner whose input is the observation plus a fixed-length
/// knowledge vector.
#[derive(Clone, Debug)]
pub struct KnowledgeLearner<T> {
    pub td: TdLearner<T, KnowledgeEmbedderNet<T>>,
    pub buffer: UniformBuffer<KnowledgeTransition>,
    pub replay: ReplayConfig,
    pushes: u64,
}

impl<T: Scalar> KnowledgeLearner<T> {
    pub fn new(net: KnowledgeEmbedderNet<T>, td: TdConfig, replay: ReplayConfig) -> Result<Self> {
        replay.validate()?;
        Ok(Self {
            td: TdLearner::new(net, td)?,
            buffer: UniformBuffer::new(replay.buffer_size)?,
            replay,
            pushes: 0,
        })
    }

    pub fn q_values(&self, obs: &Observation, knowledge: &[f64]) -> Result<Vec<T>> {
        let input = KnowledgeInput {
            obs: obs_row(obs),
            knowledge: knowledge_rows(&[knowledge], knowledge.len()),
        };
        Ok(self.td.online.q_values(&input)?.into_raw_vec_and_offset().0)
    }

    pub fn observe<R: Rng + ?Sized>(&mut self, t: KnowledgeTransition, rng: &mut R) -> Result<Option<T>> {
        let (actions, len) = (self.td.online.action_count(), self.td.online.spec.knowledge_len);
        if t.transition.action >= actions {
            return Err(Error::InvalidAction {
                action: t.transition.action,
                count: actions,
            });
        }
        if t.knowledge.len() != len {
            return Err(Error::Shape {
                context: "knowledge vector",
                expected: vec![len],
                actual: vec![t.knowledge.len()],
            });
        }
        self.buffer.push(t);
        self.pushes += 1;
        if !self.pushes.is_multiple_of(self.replay.update_freq as u64) || self.buffer.len() < self.replay.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.replay.batch_size, rng)?;
        let flat: Vec<&Transition> = batch.iter().map(|k| &k.transition).collect();
        // Knowledge is constant within an episode, so s and s' share it.
        let knowledge = knowledge_rows::<T>(&batch.iter().map(|k| k.knowledge.as_slice()).collect::<Vec<_>>(), len);
        let input = KnowledgeInput {
            obs: Observation::batch(flat.iter().map(|t| &t.obs)),
            knowledge: knowledge.clone(),
        };
        let next = KnowledgeInput {
            obs: Observation::batch(flat.iter().map(|t| &t.next_obs)),
            knowledge,
        };
        Ok(Some(TrainingBatch::from_parts(&flat, input, next).apply(&mut self.td)?))
    }
}

/// Recurrent Q-learner over whole episodes: the hidden state threads
/// through an episode at decision time and restarts from zero for every
/// sampled training sequence.
#[derive(Clone, Debug)]
pub struct RecurrentLearner<T> {
    pub td: TdLearner<T, RecurrentQNetwork<T>>,
    pub buffer: EpisodeBuffer,
    pub replay: ReplayConfig,
    pub seq_len: usize,
    hidden: HiddenState<T>,
    pending: Vec<Transition>,
    pushes: u64,
}

impl<T: Scalar> RecurrentLearner<T> {
    pub fn new(net: RecurrentQNetwork<T>, td: TdConfig, replay: ReplayConfig) -> Result<Self> {
        replay.validate()?;
        let seq_len = net.spec.seq_len;
        Ok(Self {
            hidden: net.zero_state(),
            buffer: EpisodeBuffer::new(replay.buffer_size, seq_len)?,
            td: TdLearner::new(net, td)?,
            replay,
            seq_len,
            pending: Vec::new(),
            pushes: 0,
        })
    }

    pub fn hidden(&self) -> &HiddenState<T> {
        &self.hidden
    }

    /// Zeroes the hidden state and drops any unfinished episode.
    pub fn begin_episode(&mut self) {
        self.hidden = self.td.online.zero_state();
        self.pending.clear();
    }

    /// Q-values for `obs` from the current hidden state, which advances.
    pub fn step_q(&mut self, obs: &Observation) -> Result<Vec<T>> {
        let (q, h) = self
            .td
            .online
            .forward_sequence(obs_row::<T>(obs).view(), &self.hidden)?;
        self.hidden = h;
        Ok(q.into_raw_vec_and_offset().0)
    }

    /// Appends to the current episode and trains when due. The episode is
    /// stored once `t.done` or at `end_episode`.
    pub fn observe<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<Option<T>> {
        if t.action >= self.td.online.action_count() {
            return Err(Error::InvalidAction {
                action: t.action,
                count: self.td.online.action_count(),
            });
        }
        let done = t.done;
        self.pending.push(t);
        self.pushes += 1;
        if done {
            self.end_episode();
        }
        if !self.pushes.is_multiple_of(self.replay.update_freq as u64) || self.buffer.episode_count() == 0 {
            return Ok(None);
        }
        let batch = self
            .buffer
            .sample_sequences(self.replay.batch_size, self.seq_len, rng)?;
        Ok(Some(TrainingBatch::sequences(&batch).apply(&mut self.td)?))
    }

    pub fn end_episode(&mut self) {
        if !self.pending.is_empty() {
            let episode = std::mem::take(&mut self.pending);
            self.buffer.store(EpisodeRecord::new(episode));
        }
    }
}
