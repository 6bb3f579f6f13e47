use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_oracle, Agent, AgentKind, Body, Hyperparameters, Trainer};
use crate::arbitration::Selector;
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeModule, ModuleConfig};
use crate::learner::TdLearner;
use crate::nn::{load_json, save_json, Checkpointable, NetworkCheckpoint, QModel, QNetwork};
use crate::scalar::Scalar;

pub const AGENT_FORMAT_VERSION: u32 = 1;

/// One learner's online net (with optimizer state) and target net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NamedNetwork<T> {
    pub name: String,
    pub updates: u64,
    pub online: NetworkCheckpoint<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<NetworkCheckpoint<T>>,
}

/// Everything needed to resume or evaluate a run. Replay buffers are not
/// included; a resumed run refills them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AgentCheckpoint<T> {
    pub format_version: u32,
    pub kind: AgentKind,
    pub env: EnvSpec,
    pub hyper: Hyperparameters,
    pub modules: Vec<ModuleConfig>,
    pub episode: u64,
    pub networks: Vec<NamedNetwork<T>>,
    pub env_rng: ChaCha8Rng,
    pub agent_rng: ChaCha8Rng,
}

impl<T: Scalar> AgentCheckpoint<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Self = load_json(path)?;
        if ck.format_version != AGENT_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported agent checkpoint version {} (expected {AGENT_FORMAT_VERSION})",
                ck.format_version
            )));
        }
        Ok(ck)
    }

    pub fn network(&self, name: &str) -> Result<&NamedNetwork<T>> {
        self.networks
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::Format(format!("checkpoint has no network `{name}`")))
    }
}

fn save_td<T: Scalar, M: QModel<T> + Checkpointable<T>>(name: String, td: &TdLearner<T, M>) -> NamedNetwork<T> {
    NamedNetwork {
        name,
        updates: td.updates,
        online: td.online.to_checkpoint(Some(&td.adam)),
        target: Some(td.target.to_checkpoint(None)),
    }
}

fn load_td<T: Scalar, M: QModel<T> + Checkpointable<T>>(
    saved: &NamedNetwork<T>,
    td: &mut TdLearner<T, M>,
) -> Result<()> {
    let online = M::from_checkpoint(&saved.online)?;
    let target = match &saved.target {
        Some(t) => M::from_checkpoint(t)?,
        None => online.clone(),
    };
    if !online.same_architecture(&td.online) || !target.same_architecture(&td.online) {
        return Err(Error::Architecture(format!(
            "network `{}` does not match the agent",
            saved.name
        )));
    }
    if let Some(adam) = &saved.online.adam {
        td.adam = adam.clone();
    }
    td.online = online;
    td.target = target;
    td.updates = saved.updates;
    Ok(())
}

fn module_name(id: usize) -> String {
    format!("module{id}")
}

impl<T: Scalar> Agent<T> {
    pub fn networks(&self) -> Vec<NamedNetwork<T>> {
        match &self.body {
            Body::Dqn(l) => vec![save_td("q".into(), &l.td)],
            Body::Drqn(l) => vec![save_td("q".into(), &l.td)],
            Body::DqnK { learner, .. } => vec![save_td("q".into(), &learner.td)],
            Body::Modular(m) => {
                let mut out: Vec<_> = m
                    .modules
                    .iter()
                    .filter_map(|module| match module.learner() {
                        Some(l) => Some(save_td(module_name(module.id), &l.td)),
                        None => module.network().map(|net| NamedNetwork {
                            name: module_name(module.id),
                            updates: 0,
                            online: net.to_checkpoint(None),
                            target: None,
                        }),
                    })
                    .collect();
                out.push(match &m.selector {
                    Selector::Vanilla(l) => save_td("selector".into(), &l.td),
                    Selector::Memory(l) => save_td("selector".into(), &l.td),
                });
                out
            }
        }
    }

    fn restore(&mut self, ck: &AgentCheckpoint<T>) -> Result<()> {
        match &mut self.body {
            Body::Dqn(l) => load_td(ck.network("q")?, &mut l.td),
            Body::Drqn(l) => load_td(ck.network("q")?, &mut l.td),
            Body::DqnK { learner, .. } => load_td(ck.network("q")?, &mut learner.td),
            Body::Modular(m) => {
                for module in &mut m.modules {
                    let id = module.id;
                    if let Some(l) = module.learner_mut() {
                        load_td(ck.network(&module_name(id))?, &mut l.td)?;
                    }
                }
                match &mut m.selector {
                    Selector::Vanilla(l) => load_td(ck.network("selector")?, &mut l.td),
                    Selector::Memory(l) => load_td(ck.network("selector")?, &mut l.td),
                }
            }
        }
    }

    /// Rebuilds the agent; oracle modules come from the embedded networks.
    pub fn from_checkpoint(ck: &AgentCheckpoint<T>) -> Result<Self> {
        let mut rng = super::episode::init_rng(0);
        let mut agent = Self::build(
            ck.kind,
            ck.hyper.clone(),
            ck.env.clone(),
            ck.modules.clone(),
            &mut rng,
            |id, _, env| {
                let net = QNetwork::from_checkpoint(&ck.network(&module_name(id))?.online)?;
                check_oracle(&net, env)?;
                Ok(KnowledgeModule::oracle(id, net))
            },
        )?;
        agent.restore(ck)?;
        Ok(agent)
    }
}

impl<T: Scalar> Trainer<T> {
    pub fn checkpoint(&self) -> AgentCheckpoint<T> {
        AgentCheckpoint {
            format_version: AGENT_FORMAT_VERSION,
            kind: self.agent.kind,
            env: self.agent.env.clone(),
            hyper: self.agent.hyper.clone(),
            modules: self.agent.roster.clone(),
            episode: self.episode,
            networks: self.agent.networks(),
            env_rng: self.env_rng.clone(),
            agent_rng: self.agent_rng.clone(),
        }
    }

    pub fn from_checkpoint(ck: &AgentCheckpoint<T>) -> Result<Self> {
        Ok(Self {
            agent: Agent::from_checkpoint(ck)?,
            episode: ck.episode,
            env_rng: ck.env_rng.clone(),
            agent_rng: ck.agent_rng.clone(),
        })
    }
}
