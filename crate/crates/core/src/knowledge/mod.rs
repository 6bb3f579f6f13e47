//! Knowledge modules: fixed rules, subgoal heuristics, frozen oracles and
//! learnable policies, each proposing one environment action per step.

mod reward;
mod rules;

pub use reward::{RewardFn, EXPLORE_BONUS, KEY_BONUS, LAVA_PENALTY};
pub use rules::{avoid_lava, explore, get_key, nearest_visible, rule_pickup, steer, GotoMode, VisitMemory};

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{AgentPose, EnvKind, Item, Observation};
use crate::error::{Error, Result};
use crate::learner::{epsilon_greedy, obs_row, ReplayLearner};
use crate::nn::{argmax, load_json, save_json, Checkpointable, NetworkCheckpoint, QNetwork};
use crate::replay::Transition;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    RulePickup,
    GotoMode,
    AvoidLava,
    Explore,
    GetKey,
    Oracle,
    Learnable,
}

impl ModuleKind {
    pub fn name(self) -> &'static str {
        match self {
            ModuleKind::RulePickup => "rule_pickup",
            ModuleKind::GotoMode => "goto_mode",
            ModuleKind::AvoidLava => "avoid_lava",
            ModuleKind::Explore => "explore",
            ModuleKind::GetKey => "get_key",
            ModuleKind::Oracle => "oracle",
            ModuleKind::Learnable => "learnable",
        }
    }

    /// Reward used when the roster entry names none.
    pub fn default_reward(self) -> RewardFn {
        match self {
            ModuleKind::AvoidLava => RewardFn::LavaPenalty,
            ModuleKind::Explore => RewardFn::ExploreBonus,
            ModuleKind::GetKey => RewardFn::KeyBonus,
            _ => RewardFn::Global,
        }
    }

    /// Environments whose inputs the module understands.
    pub fn supports(self, env: EnvKind) -> bool {
        match self {
            ModuleKind::RulePickup | ModuleKind::GotoMode | ModuleKind::Oracle => env == EnvKind::Collect,
            ModuleKind::AvoidLava => env == EnvKind::LavaCrossing,
            ModuleKind::GetKey => env == EnvKind::DoorKey,
            ModuleKind::Explore | ModuleKind::Learnable => true,
        }
    }
}

/// One roster entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleConfig {
    pub kind: ModuleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardFn>,
    /// Oracle checkpoint, relative paths resolve against the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl ModuleConfig {
    pub fn new(kind: ModuleKind) -> Self {
        Self {
            kind,
            reward: None,
            checkpoint: None,
        }
    }

    pub fn with_reward(mut self, reward: RewardFn) -> Self {
        self.reward = Some(reward);
        self
    }

    pub fn reward_fn(&self) -> RewardFn {
        self.reward.unwrap_or_else(|| self.kind.default_reward())
    }

    pub fn validate(&self, env: EnvKind, n_modes: usize) -> Result<()> {
        if !self.kind.supports(env) {
            return Err(Error::config(
                "modules.kind",
                format!("{} is not available in {}", self.kind.name(), env.name()),
            ));
        }
        if (self.kind == ModuleKind::Oracle) != self.checkpoint.is_some() {
            return Err(Error::config(
                "modules.checkpoint",
                "required for oracle modules and only for them",
            ));
        }
        if let RewardFn::ModePickup(m) = self.reward_fn() {
            if env != EnvKind::Collect || m >= n_modes {
                return Err(Error::config(
                    "modules.reward",
                    format!("no mode {m} in this environment"),
                ));
            }
        }
        Ok(())
    }
}

/// Everything a module may read at decision time. Each kind uses only its
/// own part: the view, the pose, the mode centres or the visit counts.
#[derive(Clone, Copy, Debug)]
pub struct ModuleInput<'a> {
    pub obs: &'a Observation,
    pub pose: AgentPose,
    pub modes: Option<&'a [(usize, usize)]>,
    pub visits: Option<&'a VisitMemory>,
}

/// Serialized frozen oracle with the outcome of its quality gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OracleCheckpoint<T> {
    pub gate_passed: bool,
    pub mean_balls: f64,
    pub eval_episodes: usize,
    pub network: NetworkCheckpoint<T>,
}

impl<T: Scalar> OracleCheckpoint<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
enum Body<T> {
    RulePickup,
    GotoMode(GotoMode),
    AvoidLava,
    Explore,
    GetKey,
    Oracle(QNetwork<T>),
    Learnable(Box<ReplayLearner<T>>),
}

#[derive(Clone, Debug)]
pub struct KnowledgeModule<T> {
    pub id: usize,
    pub kind: ModuleKind,
    pub reward: RewardFn,
    body: Body<T>,
    ignored_updates: u64,
}

impl<T: Scalar> KnowledgeModule<T> {
    pub fn rule(id: usize, kind: ModuleKind, reward: RewardFn) -> Result<Self> {
        let body = match kind {
            ModuleKind::RulePickup => Body::RulePickup,
            ModuleKind::GotoMode => Body::GotoMode(GotoMode::default()),
            ModuleKind::AvoidLava => Body::AvoidLava,
            ModuleKind::Explore => Body::Explore,
            ModuleKind::GetKey => Body::GetKey,
            ModuleKind::Oracle | ModuleKind::Learnable => {
                return Err(Error::InvalidArgument(format!("{} is not a rule module", kind.name())))
            }
        };
        Ok(Self::with_body(id, kind, reward, body))
    }

    pub fn oracle(id: usize, net: QNetwork<T>) -> Self {
        Self::with_body(id, ModuleKind::Oracle, RewardFn::Global, Body::Oracle(net))
    }

    /// Loads a gate-passing oracle; a failed gate is a configuration error.
    pub fn load_oracle(id: usize, path: &Path) -> Result<Self> {
        let ck = OracleCheckpoint::<T>::load(path)?;
        if !ck.gate_passed {
            return Err(Error::config(
                "modules.checkpoint",
                format!(
                    "oracle {} did not pass its quality gate (mean balls {:.2})",
                    path.display(),
                    ck.mean_balls
                ),
            ));
        }
        Ok(Self::oracle(id, QNetwork::from_checkpoint(&ck.network)?))
    }

    pub fn learnable(id: usize, reward: RewardFn, learner: ReplayLearner<T>) -> Self {
        Self::with_body(id, ModuleKind::Learnable, reward, Body::Learnable(Box::new(learner)))
    }

    fn with_body(id: usize, kind: ModuleKind, reward: RewardFn, body: Body<T>) -> Self {
        Self {
            id,
            kind,
            reward,
            body,
            ignored_updates: 0,
        }
    }

    pub fn updatable(&self) -> bool {
        matches!(self.body, Body::Learnable(_))
    }

    /// Offers refused because the module is frozen.
    pub fn ignored_updates(&self) -> u64 {
        self.ignored_updates
    }

    pub fn learner(&self) -> Option<&ReplayLearner<T>> {
        match &self.body {
            Body::Learnable(l) => Some(l),
            _ => None,
        }
    }

    pub fn learner_mut(&mut self) -> Option<&mut ReplayLearner<T>> {
        match &mut self.body {
            Body::Learnable(l) => Some(l),
            _ => None,
        }
    }

    pub fn network(&self) -> Option<&QNetwork<T>> {
        match &self.body {
            Body::Oracle(net) => Some(net),
            Body::Learnable(l) => Some(&l.td.online),
            _ => None,
        }
    }

    pub fn begin_episode(&mut self) {
        if let Body::GotoMode(g) = &mut self.body {
            g.reset();
        }
    }

    pub fn propose(&mut self, input: &ModuleInput<'_>) -> Result<usize> {
        let action = match &mut self.body {
            Body::RulePickup => rule_pickup(input.obs),
            Body::AvoidLava => avoid_lava(input.obs),
            Body::GetKey => get_key(input.obs, input.pose.carrying == Some(Item::Key)),
            Body::GotoMode(g) => {
                let modes = input
                    .modes
                    .ok_or_else(|| Error::ModuleInput("goto_mode needs mode centres".into()))?;
                g.propose(modes, &input.pose, input.obs)
            }
            Body::Explore => {
                let visits = input
                    .visits
                    .ok_or_else(|| Error::ModuleInput("explore needs visit counts".into()))?;
                explore(input.obs, &input.pose, visits)
            }
            Body::Oracle(net) => {
                let q = net.forward(obs_row::<T>(input.obs).view())?;
                return Ok(argmax(q.row(0).iter().copied()));
            }
            Body::Learnable(l) => return l.greedy(input.obs),
        };
        Ok(action.id())
    }

    /// Proposal while acting: learnable modules explore ε-greedily on the
    /// agent's schedule, every other kind proposes as `propose` does.
    pub fn propose_exploring<R: Rng + ?Sized>(
        &mut self,
        input: &ModuleInput<'_>,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize> {
        match &self.body {
            Body::Learnable(l) => Ok(epsilon_greedy(&l.q_values(input.obs)?, epsilon, rng)),
            _ => self.propose(input),
        }
    }

    /// Shares an executed transition carrying this module's own reward.
    /// Returns whether the transition was stored.
    pub fn update<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<bool> {
        match &mut self.body {
            Body::Learnable(l) => {
                l.observe(t, rng)?;
                Ok(true)
            }
            _ => {
                self.ignored_updates += 1;
                Ok(false)
            }
        }
    }
}

#[cfg(test)]
mod tests;
