use std::collections::VecDeque;

use rand::Rng;

use super::Transition;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub transitions: Vec<Transition>,
}

impl EpisodeRecord {
    pub fn new(transitions: Vec<Transition>) -> Self {
        Self { transitions }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Whether each `next_obs` equals the following `obs`.
    pub fn is_chained(&self) -> bool {
        self.transitions.windows(2).all(|w| w[0].next_obs == w[1].obs)
    }
}

/// `batch_size` runs of `seq_len` consecutive transitions, each from one
/// episode.
#[derive(Clone, Debug)]
pub struct SequenceBatch<'a> {
    pub seq_len: usize,
    pub sequences: Vec<&'a [Transition]>,
}

impl SequenceBatch<'_> {
    pub fn batch_size(&self) -> usize {
        self.sequences.len()
    }

    /// Row-major iteration: sequence `b`, step `t` at position `b * seq_len + t`.
    pub fn iter_flat(&self) -> impl Iterator<Item = &Transition> {
        self.sequences.iter().flat_map(|s| s.iter())
    }
}

/// Whole-episode store with capacity counted in transitions. Episodes
/// shorter than `min_seq` are dropped and counted.
#[derive(Clone, Debug)]
pub struct EpisodeBuffer {
    capacity: usize,
    min_seq: usize,
    episodes: VecDeque<EpisodeRecord>,
    stored_transitions: usize,
    offered: u64,
    dropped: u64,
}

impl EpisodeBuffer {
    pub fn new(capacity: usize, min_seq: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("buffer_size", "must be positive"));
        }
        if min_seq == 0 {
            return Err(Error::config("min_seq", "must be positive"));
        }
        if min_seq > capacity {
            return Err(Error::config("min_seq", "exceeds buffer capacity"));
        }
        Ok(Self {
            capacity,
            min_seq,
            episodes: VecDeque::new(),
            stored_transitions: 0,
            offered: 0,
            dropped: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn min_seq(&self) -> usize {
        self.min_seq
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn transition_count(&self) -> usize {
        self.stored_transitions
    }

    pub fn offered(&self) -> u64 {
        self.offered
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Episodes ever admitted.
    pub fn admitted(&self) -> u64 {
        self.offered - self.dropped
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter()
    }

    /// Returns whether the episode was admitted. Episodes longer than the
    /// whole capacity are truncated to their most recent `capacity` steps.
    pub fn store(&mut self, mut episode: EpisodeRecord) -> bool {
        self.offered += 1;
        if episode.len() < self.min_seq {
            self.dropped += 1;
            return false;
        }
        if episode.len() > self.capacity {
            let excess = episode.len() - self.capacity;
            episode.transitions.drain(..excess);
        }
        while self.stored_transitions + episode.len() > self.capacity {
            let old = self.episodes.pop_front().expect("non-empty while over capacity");
            self.stored_transitions -= old.len();
        }
        self.stored_transitions += episode.len();
        self.episodes.push_back(episode);
        true
    }

    /// Episodes uniformly with replacement, then a start index uniform on
    /// `0..=len - seq_len` within each.
    pub fn sample_sequences<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        seq_len: usize,
        rng: &mut R,
    ) -> Result<SequenceBatch<'_>> {
        if seq_len == 0 || seq_len > self.min_seq {
            return Err(Error::config(
                "seq_len",
                format!("must be in 1..={} (min_seq)", self.min_seq),
            ));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if self.episodes.is_empty() {
            return Err(Error::Underfull("no stored episodes".into()));
        }
        let sequences = (0..batch_size)
            .map(|_| {
                let ep = &self.episodes[rng.gen_range(0..self.episodes.len())];
                let start = rng.gen_range(0..=ep.len() - seq_len);
                &ep.transitions[start..start + seq_len]
            })
            .collect();
        Ok(SequenceBatch { seq_len, sequences })
    }
}
