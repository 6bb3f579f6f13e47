//! Agents and their training loops: the modular agent with a learned
//! arbitrator, and the DQN, DRQN and knowledge-conditioned DQN baselines.

mod checkpoint;
mod episode;
mod hyper;

pub use checkpoint::{AgentCheckpoint, NamedNetwork, AGENT_FORMAT_VERSION};
pub use episode::{evaluate, init_rng, render_episode, run_episode, EpisodeStats, EvalStats, StepRecord, Trainer};
pub use hyper::{AgentKind, EpsilonSchedule, Hyperparameters};

use std::path::Path;

use rand::Rng;

use crate::arbitration::{Selector, SelectorReward};
use crate::env::{EnvOutcome, EnvSpec, GridState, Observation};
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeModule, ModuleConfig, ModuleInput, ModuleKind, VisitMemory};
use crate::learner::{epsilon_greedy, KnowledgeLearner, KnowledgeTransition, RecurrentLearner, ReplayLearner};
use crate::nn::{InputShape, KnowledgeEmbedderNet, QNetwork, RecurrentQNetwork};
use crate::replay::{EpisodeBuffer, Transition};
use crate::scalar::Scalar;

/// The action taken at one step and how it was chosen.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: usize,
    /// Modular agents: the selected module.
    pub module: Option<usize>,
    /// Modular agents: every module's proposal, indexed by module id.
    pub proposals: Vec<usize>,
    /// Recurrent agents: whether the consumed hidden state was zero.
    pub hidden_zero: Option<bool>,
}

/// What one executed step fed back into the learners.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepFeedback {
    pub module_rewards: Vec<f64>,
    /// Modular agents: the reward stored for the selector.
    pub selector_reward: Option<f64>,
    /// Buffers that grew by one transition.
    pub buffer_pushes: usize,
}

#[derive(Clone, Debug)]
pub struct Modular<T> {
    pub modules: Vec<KnowledgeModule<T>>,
    pub selector: Selector<T>,
    pub reward: SelectorReward,
    visits: VisitMemory,
}

impl<T: Scalar> Modular<T> {
    pub fn updatable_count(&self) -> usize {
        self.modules.iter().filter(|m| m.updatable()).count()
    }

    pub fn visits(&self) -> &VisitMemory {
        &self.visits
    }
}

#[derive(Clone, Debug)]
enum Body<T> {
    Dqn(ReplayLearner<T>),
    Drqn(RecurrentLearner<T>),
    DqnK {
        learner: KnowledgeLearner<T>,
        knowledge: Vec<f64>,
    },
    Modular(Modular<T>),
}

#[derive(Clone, Debug)]
pub struct Agent<T> {
    pub kind: AgentKind,
    pub hyper: Hyperparameters,
    pub env: EnvSpec,
    pub roster: Vec<ModuleConfig>,
    body: Body<T>,
}

fn n_modes(env: &EnvSpec) -> usize {
    match env {
        EnvSpec::Collect(c) => c.n_modes,
        _ => 0,
    }
}

/// Mode centres flattened as `[x0, y0, x1, y1, ..]` and divided by the
/// grid side, so every entry lies in `[0, 1]`.
pub fn mode_knowledge(state: &GridState) -> Vec<f64> {
    let side = state.width as f64;
    state
        .modes
        .iter()
        .flat_map(|&(x, y)| [x as f64 / side, y as f64 / side])
        .collect()
}

fn check_oracle<T: Scalar>(net: &QNetwork<T>, env: &EnvSpec) -> Result<()> {
    let view = env.view_size();
    if net.spec.input != InputShape::square(view, 3) || net.spec.action_count != env.action_count() {
        return Err(Error::config(
            "modules.checkpoint",
            format!(
                "oracle expects a {}x{} view and {} actions",
                net.spec.input.height, net.spec.input.width, net.spec.action_count
            ),
        ));
    }
    Ok(())
}

/// Checks that the agent kind, its hyperparameters, the environment and
/// the module roster fit together.
pub fn validate_setup(kind: AgentKind, hyper: &Hyperparameters, env: &EnvSpec, roster: &[ModuleConfig]) -> Result<()> {
    env.validate()?;
    hyper.validate(kind)?;
    if !kind.supports(env.kind()) {
        return Err(Error::config(
            "agent",
            format!("{} is not available in {}", kind.name(), env.kind().name()),
        ));
    }
    if kind.is_modular() == roster.is_empty() {
        return Err(Error::config(
            "modules",
            if roster.is_empty() {
                "modular agents need at least one module"
            } else {
                "baseline agents take no modules"
            },
        ));
    }
    for m in roster {
        m.validate(env.kind(), n_modes(env))?;
    }
    Ok(())
}

impl<T: Scalar> Agent<T> {
    /// Builds a fresh agent. Relative oracle checkpoint paths resolve
    /// against `oracle_root`.
    pub fn new<R: Rng + ?Sized>(
        kind: AgentKind,
        hyper: Hyperparameters,
        env: EnvSpec,
        roster: Vec<ModuleConfig>,
        oracle_root: &Path,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(kind, hyper, env, roster, rng, |id, cfg, env| {
            let path = cfg
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::config("modules.checkpoint", "missing"))?;
            let module = KnowledgeModule::load_oracle(id, &oracle_root.join(path))?;
            check_oracle(module.network().expect("oracle has a network"), env)?;
            Ok(module)
        })
    }

    pub(crate) fn build<R: Rng + ?Sized>(
        kind: AgentKind,
        hyper: Hyperparameters,
        env: EnvSpec,
        roster: Vec<ModuleConfig>,
        rng: &mut R,
        mut oracle: impl FnMut(usize, &ModuleConfig, &EnvSpec) -> Result<KnowledgeModule<T>>,
    ) -> Result<Self> {
        validate_setup(kind, &hyper, &env, &roster)?;
        let actions = env.action_count();
        let replay = hyper.replay();
        let body = match kind {
            AgentKind::Dqn => {
                let net = QNetwork::new(hyper.feedforward_spec(&env, actions), rng)?;
                Body::Dqn(ReplayLearner::new(net, hyper.module_td(), replay)?)
            }
            AgentKind::Drqn => {
                let net = RecurrentQNetwork::new(hyper.recurrent_spec(&env, actions)?, rng)?;
                Body::Drqn(RecurrentLearner::new(net, hyper.module_td(), replay)?)
            }
            AgentKind::DqnK => {
                let spec = hyper.knowledge_spec(&env, 2 * n_modes(&env))?;
                let net = KnowledgeEmbedderNet::new(spec, rng)?;
                Body::DqnK {
                    learner: KnowledgeLearner::new(net, hyper.module_td(), replay)?,
                    knowledge: Vec::new(),
                }
            }
            AgentKind::Amrl | AgentKind::AmrlDs | AgentKind::AmrlMem => {
                let mut modules = Vec::with_capacity(roster.len());
                for (id, cfg) in roster.iter().enumerate() {
                    modules.push(match cfg.kind {
                        ModuleKind::Learnable => {
                            let net = QNetwork::new(hyper.feedforward_spec(&env, actions), rng)?;
                            let learner = ReplayLearner::new(net, hyper.module_td(), replay)?;
                            KnowledgeModule::learnable(id, cfg.reward_fn(), learner)
                        }
                        ModuleKind::Oracle => oracle(id, cfg, &env)?,
                        rule => KnowledgeModule::rule(id, rule, cfg.reward_fn())?,
                    });
                }
                let selector_td = hyper.selector_td().expect("validated for modular kinds");
                let n = modules.len();
                let selector = if kind == AgentKind::AmrlMem {
                    let net = RecurrentQNetwork::new(hyper.recurrent_spec(&env, n)?, rng)?;
                    Selector::Memory(RecurrentLearner::new(net, selector_td, replay)?)
                } else {
                    let net = QNetwork::new(hyper.feedforward_spec(&env, n), rng)?;
                    Selector::Vanilla(ReplayLearner::new(net, selector_td, replay)?)
                };
                let side = env.grid_size();
                Body::Modular(Modular {
                    modules,
                    selector,
                    reward: if kind == AgentKind::AmrlDs {
                        SelectorReward::ModuleSum
                    } else {
                        SelectorReward::Global
                    },
                    visits: VisitMemory::new(side, side),
                })
            }
        };
        Ok(Self {
            kind,
            hyper,
            env,
            roster,
            body,
        })
    }

    pub fn modular(&self) -> Option<&Modular<T>> {
        match &self.body {
            Body::Modular(m) => Some(m),
            _ => None,
        }
    }

    pub fn modular_mut(&mut self) -> Option<&mut Modular<T>> {
        match &mut self.body {
            Body::Modular(m) => Some(m),
            _ => None,
        }
    }

    /// Buffers that grow on every learning step.
    pub fn buffers_per_step(&self) -> usize {
        match &self.body {
            Body::Modular(m) => m.updatable_count() + 1,
            _ => 1,
        }
    }

    /// Resets per-episode state: hidden states, subgoal choices, visit
    /// counts and the mode knowledge of the new layout.
    pub fn begin_episode(&mut self, state: &GridState) {
        match &mut self.body {
            Body::Dqn(_) => {}
            Body::Drqn(l) => l.begin_episode(),
            Body::DqnK { knowledge, .. } => *knowledge = mode_knowledge(state),
            Body::Modular(m) => {
                for module in &mut m.modules {
                    module.begin_episode();
                }
                m.selector.begin_episode();
                m.visits.reset(state.width, state.height);
                m.visits.visit(state.pose.x, state.pose.y);
            }
        }
    }

    pub fn act<R: Rng + ?Sized>(
        &mut self,
        state: &GridState,
        obs: &Observation,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Decision> {
        let plain = |action| Decision {
            action,
            module: None,
            proposals: Vec::new(),
            hidden_zero: None,
        };
        Ok(match &mut self.body {
            Body::Dqn(l) => plain(epsilon_greedy(&l.q_values(obs)?, epsilon, rng)),
            Body::Drqn(l) => {
                let zero = l.hidden().is_zero();
                let q = l.step_q(obs)?;
                Decision {
                    hidden_zero: Some(zero),
                    ..plain(epsilon_greedy(&q, epsilon, rng))
                }
            }
            Body::DqnK { learner, knowledge } => {
                plain(epsilon_greedy(&learner.q_values(obs, knowledge)?, epsilon, rng))
            }
            Body::Modular(m) => {
                let input = ModuleInput {
                    obs,
                    pose: state.pose,
                    modes: Some(&state.modes),
                    visits: Some(&m.visits),
                };
                let proposals = m
                    .modules
                    .iter_mut()
                    .map(|module| module.propose_exploring(&input, epsilon, rng))
                    .collect::<Result<Vec<_>>>()?;
                let selection = m.selector.select(obs, epsilon, rng)?;
                Decision {
                    action: proposals[selection.module],
                    module: Some(selection.module),
                    proposals,
                    hidden_zero: selection.hidden_was_zero,
                }
            }
        })
    }

    /// Feeds the executed step back. `state` is the post-step state. When
    /// `learn` is false only per-episode bookkeeping advances.
    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        obs: &Observation,
        decision: &Decision,
        outcome: &EnvOutcome,
        state: &GridState,
        learn: bool,
        rng: &mut R,
    ) -> Result<StepFeedback> {
        let transition = |action, reward| Transition {
            obs: obs.clone(),
            action,
            reward,
            next_obs: outcome.obs.clone(),
            done: outcome.terminated,
        };
        let mut feedback = StepFeedback::default();
        match &mut self.body {
            Body::Dqn(l) if learn => {
                l.observe(transition(decision.action, outcome.reward), rng)?;
                feedback.buffer_pushes = 1;
            }
            Body::Drqn(l) if learn => {
                l.observe(transition(decision.action, outcome.reward), rng)?;
                feedback.buffer_pushes = 1;
            }
            Body::DqnK { learner, knowledge } if learn => {
                let t = KnowledgeTransition {
                    transition: transition(decision.action, outcome.reward),
                    knowledge: knowledge.clone(),
                };
                learner.observe(t, rng)?;
                feedback.buffer_pushes = 1;
            }
            Body::Modular(m) => {
                let first_visit = m.visits.visit(state.pose.x, state.pose.y);
                feedback.module_rewards = m
                    .modules
                    .iter()
                    .map(|module| module.reward.reward(outcome, first_visit))
                    .collect();
                let r_star = m.reward.combine(outcome.reward, &feedback.module_rewards);
                feedback.selector_reward = Some(r_star);
                if learn {
                    let module = decision
                        .module
                        .ok_or_else(|| Error::InvalidArgument("modular decision without a module".into()))?;
                    for (module_ref, &r) in m.modules.iter_mut().zip(&feedback.module_rewards) {
                        if module_ref.update(transition(decision.action, r), rng)? {
                            feedback.buffer_pushes += 1;
                        }
                    }
                    m.selector.update(transition(module, r_star), rng)?;
                    feedback.buffer_pushes += 1;
                }
            }
            _ => {}
        }
        Ok(feedback)
    }

    /// Closes the episode; recurrent learners store what they collected.
    pub fn end_episode(&mut self) {
        match &mut self.body {
            Body::Drqn(l) => l.end_episode(),
            Body::Modular(m) => m.selector.end_episode(),
            _ => {}
        }
    }

    /// The agent's primary replay contents, oldest first: the baseline's
    /// buffer, or the selector's buffer for modular agents.
    pub fn replay_transitions(&self) -> Vec<&Transition> {
        fn episodic(b: &EpisodeBuffer) -> Vec<&Transition> {
            b.episodes().flat_map(|e| e.transitions.iter()).collect()
        }
        match &self.body {
            Body::Dqn(l) => l.buffer.iter().collect(),
            Body::Drqn(l) => episodic(&l.buffer),
            Body::DqnK { learner, .. } => learner.buffer.iter().map(|k| &k.transition).collect(),
            Body::Modular(m) => match &m.selector {
                Selector::Vanilla(l) => l.buffer.iter().collect(),
                Selector::Memory(l) => episodic(&l.buffer),
            },
        }
    }

    /// Total optimisation steps taken by every learner.
    pub fn update_count(&self) -> u64 {
        match &self.body {
            Body::Dqn(l) => l.td.updates,
            Body::Drqn(l) => l.td.updates,
            Body::DqnK { learner, .. } => learner.td.updates,
            Body::Modular(m) => {
                let modules: u64 = m.modules.iter().filter_map(|x| x.learner()).map(|l| l.td.updates).sum();
                modules
                    + match &m.selector {
                        Selector::Vanilla(l) => l.td.updates,
                        Selector::Memory(l) => l.td.updates,
                    }
            }
        }
    }
}
