//! Uniform transition replay and episodic replay with random-start
//! sequence sampling for recurrent learners.

mod dump;
mod episodic;
mod uniform;

pub use dump::{read_dump, write_dump};
pub use episodic::{EpisodeBuffer, EpisodeRecord, SequenceBatch};
pub use uniform::UniformBuffer;

use serde::{Deserialize, Serialize};

use crate::env::Observation;

/// One SARS'-done record. `action` is whatever the learner acts over: an
/// environment action for module learners, a module index for selectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}
