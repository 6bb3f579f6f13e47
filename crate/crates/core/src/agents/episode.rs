use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, Decision, StepFeedback};
use crate::env::{EnvOutcome, EnvSpec, StepEvent};
use crate::error::Result;
use crate::scalar::Scalar;

/// Random streams of one seed. Environment layouts, agent decisions,
/// network initialisation and evaluation never share a stream.
const ENV_STREAM: u64 = 0;
const AGENT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const EVAL_ENV_STREAM: u64 = 3;
const EVAL_AGENT_STREAM: u64 = 4;

pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn init_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, INIT_STREAM)
}

/// One executed step, as seen by step callbacks.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord<'a> {
    pub t: usize,
    pub epsilon: f64,
    pub decision: &'a Decision,
    pub outcome: &'a EnvOutcome,
    pub feedback: &'a StepFeedback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: u64,
    pub epsilon: f64,
    #[serde(rename = "return")]
    pub total_return: f64,
    pub steps: usize,
    pub balls: usize,
    pub lava_death: bool,
    pub success: bool,
    pub buffer_pushes: u64,
}

/// Plays one episode. With `learn` every step is shared with the learners.
pub fn run_episode<T: Scalar, R: Rng>(
    agent: &mut Agent<T>,
    env: &EnvSpec,
    epsilon: f64,
    learn: bool,
    env_rng: &mut R,
    agent_rng: &mut R,
    mut on_step: impl FnMut(&StepRecord<'_>),
) -> Result<EpisodeStats> {
    let (mut state, mut obs) = env.reset(env_rng)?;
    agent.begin_episode(&state);
    let mut stats = EpisodeStats {
        episode: 0,
        epsilon,
        total_return: 0.0,
        steps: 0,
        balls: 0,
        lava_death: false,
        success: false,
        buffer_pushes: 0,
    };
    loop {
        let decision = agent.act(&state, &obs, epsilon, agent_rng)?;
        let outcome = state.step(decision.action)?;
        let feedback = agent.observe(&obs, &decision, &outcome, &state, learn, agent_rng)?;
        on_step(&StepRecord {
            t: stats.steps,
            epsilon,
            decision: &decision,
            outcome: &outcome,
            feedback: &feedback,
        });
        stats.steps += 1;
        stats.total_return += outcome.reward;
        stats.buffer_pushes += feedback.buffer_pushes as u64;
        stats.lava_death |= outcome.event == Some(StepEvent::EnteredLava);
        if outcome.done() {
            stats.success = outcome.terminated && !stats.lava_death;
            break;
        }
        obs = outcome.obs;
    }
    stats.balls = state.balls_collected;
    agent.end_episode();
    Ok(stats)
}

/// Greedy rollout summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub episodes: usize,
    pub mean_return: f64,
    pub mean_steps: f64,
    pub mean_balls: f64,
    pub lava_deaths: usize,
    pub success_rate: f64,
}

impl EvalStats {
    pub fn from_episodes(episodes: &[EpisodeStats]) -> Self {
        let n = episodes.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpisodeStats) -> f64| episodes.iter().map(f).sum::<f64>() / n;
        Self {
            episodes: episodes.len(),
            mean_return: mean(&|e| e.total_return),
            mean_steps: mean(&|e| e.steps as f64),
            mean_balls: mean(&|e| e.balls as f64),
            lava_deaths: episodes.iter().filter(|e| e.lava_death).count(),
            success_rate: mean(&|e| f64::from(u8::from(e.success))),
        }
    }
}

/// `n` rollouts at epsilon 0 on streams reserved for evaluation. Learners
/// are left untouched.
pub fn evaluate<T: Scalar>(agent: &mut Agent<T>, env: &EnvSpec, n: usize, seed: u64) -> Result<EvalStats> {
    let mut env_rng = stream(seed, EVAL_ENV_STREAM);
    let mut agent_rng = stream(seed, EVAL_AGENT_STREAM);
    let episodes = (0..n)
        .map(|_| run_episode(agent, env, 0.0, false, &mut env_rng, &mut agent_rng, |_| {}))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalStats::from_episodes(&episodes))
}

/// ASCII frames of one greedy rollout on the first evaluation episode,
/// starting with the reset state.
pub fn render_episode<T: Scalar>(agent: &mut Agent<T>, env: &EnvSpec, seed: u64) -> Result<Vec<String>> {
    let mut env_rng = stream(seed, EVAL_ENV_STREAM);
    let mut agent_rng = stream(seed, EVAL_AGENT_STREAM);
    let (mut state, mut obs) = env.reset(&mut env_rng)?;
    agent.begin_episode(&state);
    let mut frames = vec![state.render()];
    loop {
        let decision = agent.act(&state, &obs, 0.0, &mut agent_rng)?;
        let outcome = state.step(decision.action)?;
        agent.observe(&obs, &decision, &outcome, &state, false, &mut agent_rng)?;
        frames.push(state.render());
        if outcome.done() {
            break;
        }
        obs = outcome.obs;
    }
    agent.end_episode();
    Ok(frames)
}

/// A training run of one agent on its own environment with per-episode
/// epsilon decay.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub agent: Agent<T>,
    /// Episodes completed so far.
    pub episode: u64,
    pub(crate) env_rng: ChaCha8Rng,
    pub(crate) agent_rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(agent: Agent<T>, seed: u64) -> Self {
        Self {
            agent,
            episode: 0,
            env_rng: stream(seed, ENV_STREAM),
            agent_rng: stream(seed, AGENT_STREAM),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.agent.hyper.schedule().at(self.episode)
    }

    pub fn train_episode(&mut self, on_step: impl FnMut(&StepRecord<'_>)) -> Result<EpisodeStats> {
        let env = self.agent.env.clone();
        let eps = self.epsilon();
        let mut stats = run_episode(
            &mut self.agent,
            &env,
            eps,
            true,
            &mut self.env_rng,
            &mut self.agent_rng,
            on_step,
        )?;
        stats.episode = self.episode;
        self.episode += 1;
        Ok(stats)
    }
}
