//! Module selectors: a Q-learned arbitrator over module indices and its
//! recurrent, memory-augmented variant.

mod trace;

pub use trace::{read_trace, SelectionRecord, TraceWriter};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::Result;
use crate::learner::{epsilon_greedy, RecurrentLearner, ReplayLearner};
use crate::replay::Transition;
use crate::scalar::Scalar;

/// What the selector is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorReward {
    /// The environment reward.
    Global,
    /// The sum of all modular rewards.
    ModuleSum,
}

impl SelectorReward {
    pub fn combine(self, global: f64, modular: &[f64]) -> f64 {
        match self {
            SelectorReward::Global => global,
            SelectorReward::ModuleSum => modular.iter().sum(),
        }
    }
}

/// The outcome of one selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub module: usize,
    /// Recurrent selectors only: whether the consumed hidden state was zero.
    pub hidden_was_zero: Option<bool>,
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Selector<T> {
    /// Feed-forward arbitrator with uniform replay.
    Vanilla(ReplayLearner<T>),
    /// Recurrent arbitrator with episodic replay.
    Memory(RecurrentLearner<T>),
}

impl<T: Scalar> Selector<T> {
    pub fn module_count(&self) -> usize {
        use crate::nn::QModel;
        match self {
            Selector::Vanilla(l) => l.td.online.action_count(),
            Selector::Memory(l) => l.td.online.action_count(),
        }
    }

    pub fn begin_episode(&mut self) {
        if let Selector::Memory(l) = self {
            l.begin_episode();
        }
    }

    /// With probability `epsilon` a uniform module, else the greedy one
    /// (ties to the lowest id). The recurrent state advances either way.
    pub fn select<R: Rng + ?Sized>(&mut self, obs: &Observation, epsilon: f64, rng: &mut R) -> Result<Selection> {
        let (q, hidden_was_zero) = match self {
            Selector::Vanilla(l) => (l.q_values(obs)?, None),
            Selector::Memory(l) => {
                let zero = l.hidden().is_zero();
                (l.step_q(obs)?, Some(zero))
            }
        };
        Ok(Selection {
            module: epsilon_greedy(&q, epsilon, rng),
            hidden_was_zero,
        })
    }

    /// Stores `(s, chosen module, r, s')` and trains when due.
    pub fn update<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<Option<T>> {
        match self {
            Selector::Vanilla(l) => l.observe(t, rng),
            Selector::Memory(l) => l.observe(t, rng),
        }
    }

    pub fn end_episode(&mut self) {
        if let Selector::Memory(l) = self {
            l.end_episode();
        }
    }
}

#[cfg(test)]
mod tests;
