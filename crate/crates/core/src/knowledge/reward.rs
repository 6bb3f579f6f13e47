use serde::{Deserialize, Serialize};

use crate::env::{EnvOutcome, StepEvent};

/// Modular reward signal for one module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardFn {
    /// The environment reward.
    Global,
    /// The pickup reward when the collected ball's nearest mode is this one.
    ModePickup(usize),
    /// -1 on entering lava.
    LavaPenalty,
    /// +1 on the first visit to a cell this episode.
    ExploreBonus,
    /// +0.5 on picking up the key, otherwise the environment reward.
    KeyBonus,
}

pub const LAVA_PENALTY: f64 = -1.0;
pub const EXPLORE_BONUS: f64 = 1.0;
pub const KEY_BONUS: f64 = 0.5;

impl RewardFn {
    /// `first_visit` says whether the post-step cell was new this episode.
    pub fn reward(self, outcome: &EnvOutcome, first_visit: bool) -> f64 {
        match self {
            RewardFn::Global => outcome.reward,
            RewardFn::ModePickup(mode) => match outcome.event {
                Some(StepEvent::PickedBall { nearest_mode, .. }) if nearest_mode == mode => outcome.reward,
                _ => 0.0,
            },
            RewardFn::LavaPenalty => {
                if outcome.event == Some(StepEvent::EnteredLava) {
                    LAVA_PENALTY
                } else {
                    0.0
                }
            }
            RewardFn::ExploreBonus => {
                if first_visit {
                    EXPLORE_BONUS
                } else {
                    0.0
                }
            }
            RewardFn::KeyBonus => {
                if outcome.event == Some(StepEvent::PickedKey) {
                    KEY_BONUS
                } else {
                    outcome.reward
                }
            }
        }
    }
}
