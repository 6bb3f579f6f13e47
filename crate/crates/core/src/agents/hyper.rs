use serde::{Deserialize, Serialize};

use crate::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::learner::{ReplayConfig, TdConfig};
use crate::nn::{conv_for_view, InputShape, KnowledgeEmbedderSpec, QNetworkSpec, RecurrentSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    Drqn,
    DqnK,
    Amrl,
    AmrlDs,
    AmrlMem,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Dqn,
        AgentKind::Drqn,
        AgentKind::DqnK,
        AgentKind::Amrl,
        AgentKind::AmrlDs,
        AgentKind::AmrlMem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Drqn => "drqn",
            AgentKind::DqnK => "dqn_k",
            AgentKind::Amrl => "amrl",
            AgentKind::AmrlDs => "amrl_ds",
            AgentKind::AmrlMem => "amrl_mem",
        }
    }

    pub fn is_modular(self) -> bool {
        matches!(self, AgentKind::Amrl | AgentKind::AmrlDs | AgentKind::AmrlMem)
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, AgentKind::Drqn | AgentKind::AmrlMem)
    }

    pub fn supports(self, env: EnvKind) -> bool {
        self != AgentKind::DqnK || env == EnvKind::Collect
    }
}

fn default_gamma() -> f64 {
    0.99
}

fn default_epsilon_start() -> f64 {
    1.0
}

fn default_epsilon_min() -> f64 {
    0.05
}

/// Every tunable of one agent. Keys that the agent kind does not use must
/// be absent; `validate` enforces this.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub epsilon_decay: f64,
    /// Learning rate of the baseline network or of every learnable module.
    pub module_lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector_lr: Option<f64>,
    /// Width of the hidden fully connected layers (state side for DQN+k).
    pub latent_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined_latent: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge_latent: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge_embedding: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_embedding: Option<usize>,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub update_freq: usize,
    pub soft_update: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lstm_hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lstm_seq_len: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon_start")]
    pub epsilon_start: f64,
    #[serde(default = "default_epsilon_min")]
    pub epsilon_min: f64,
}

fn exactly(kind: AgentKind, field: &str, present: bool, wanted: bool) -> Result<()> {
    match (present, wanted) {
        (true, false) => Err(Error::config(
            format!("hyper.{field}"),
            format!("not used by {}", kind.name()),
        )),
        (false, true) => Err(Error::config(
            format!("hyper.{field}"),
            format!("required by {}", kind.name()),
        )),
        _ => Ok(()),
    }
}

fn positive(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::config(format!("hyper.{field}"), "must be positive"));
    }
    Ok(())
}

impl Hyperparameters {
    pub fn validate(&self, kind: AgentKind) -> Result<()> {
        exactly(kind, "selector_lr", self.selector_lr.is_some(), kind.is_modular())?;
        let dqn_k = kind == AgentKind::DqnK;
        exactly(kind, "combined_latent", self.combined_latent.is_some(), dqn_k)?;
        exactly(kind, "knowledge_latent", self.knowledge_latent.is_some(), dqn_k)?;
        exactly(kind, "knowledge_embedding", self.knowledge_embedding.is_some(), dqn_k)?;
        exactly(kind, "state_embedding", self.state_embedding.is_some(), dqn_k)?;
        exactly(kind, "lstm_hidden", self.lstm_hidden.is_some(), kind.is_recurrent())?;
        exactly(kind, "lstm_seq_len", self.lstm_seq_len.is_some(), kind.is_recurrent())?;
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return Err(Error::config("hyper.epsilon_decay", "must be in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) || !(self.epsilon_min..=1.0).contains(&self.epsilon_start) {
            return Err(Error::config(
                "hyper.epsilon_start",
                "need 0 <= epsilon_min <= epsilon_start <= 1",
            ));
        }
        positive("latent_dim", self.latent_dim)?;
        for (field, v) in [
            ("combined_latent", self.combined_latent),
            ("knowledge_latent", self.knowledge_latent),
            ("knowledge_embedding", self.knowledge_embedding),
            ("state_embedding", self.state_embedding),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_seq_len", self.lstm_seq_len),
        ] {
            if let Some(v) = v {
                positive(field, v)?;
            }
        }
        self.replay().validate().map_err(prefix)?;
        self.module_td().validate().map_err(|e| rename(e, "lr", "module_lr"))?;
        if let Some(td) = self.selector_td() {
            td.validate().map_err(|e| rename(e, "lr", "selector_lr"))?;
        }
        Ok(())
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            decay: self.epsilon_decay,
            min: self.epsilon_min,
        }
    }

    pub fn replay(&self) -> ReplayConfig {
        ReplayConfig {
            batch_size: self.batch_size,
            buffer_size: self.buffer_size,
            update_freq: self.update_freq,
        }
    }

    pub fn module_td(&self) -> TdConfig {
        TdConfig {
            lr: self.module_lr,
            tau: self.soft_update,
            gamma: self.gamma,
        }
    }

    pub fn selector_td(&self) -> Option<TdConfig> {
        self.selector_lr.map(|lr| TdConfig { lr, ..self.module_td() })
    }

    pub fn feedforward_spec(&self, env: &EnvSpec, action_count: usize) -> QNetworkSpec {
        let view = env.view_size();
        QNetworkSpec {
            input: InputShape::square(view, 3),
            conv: conv_for_view(view),
            fc_widths: vec![self.latent_dim, self.latent_dim],
            action_count,
        }
    }

    /// The LSTM stands in for the hidden fully connected layers.
    pub fn recurrent_spec(&self, env: &EnvSpec, action_count: usize) -> Result<RecurrentSpec> {
        let view = env.view_size();
        Ok(RecurrentSpec {
            input: InputShape::square(view, 3),
            conv: conv_for_view(view),
            hidden_size: self
                .lstm_hidden
                .ok_or_else(|| Error::config("hyper.lstm_hidden", "missing"))?,
            seq_len: self
                .lstm_seq_len
                .ok_or_else(|| Error::config("hyper.lstm_seq_len", "missing"))?,
            action_count,
        })
    }

    pub fn knowledge_spec(&self, env: &EnvSpec, knowledge_len: usize) -> Result<KnowledgeEmbedderSpec> {
        let view = env.view_size();
        let need = |v: Option<usize>, f: &str| v.ok_or_else(|| Error::config(format!("hyper.{f}"), "missing"));
        Ok(KnowledgeEmbedderSpec {
            input: InputShape::square(view, 3),
            conv: conv_for_view(view),
            latent_dim: self.latent_dim,
            state_embedding: need(self.state_embedding, "state_embedding")?,
            knowledge_len,
            knowledge_latent: need(self.knowledge_latent, "knowledge_latent")?,
            knowledge_embedding: need(self.knowledge_embedding, "knowledge_embedding")?,
            combined_latent: need(self.combined_latent, "combined_latent")?,
            action_count: env.action_count(),
        })
    }
}

fn prefix(e: Error) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("hyper.{field}"),
            message,
        },
        other => other,
    }
}

fn rename(e: Error, from: &str, to: &str) -> Error {
    match e {
        Error::Config { field, message } if field == from => Error::config(format!("hyper.{to}"), message),
        other => prefix(other),
    }
}

/// Per-episode exponential decay with a floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub decay: f64,
    pub min: f64,
}

impl EpsilonSchedule {
    pub fn at(&self, episode: u64) -> f64 {
        let e = i32::try_from(episode).unwrap_or(i32::MAX);
        (self.start * self.decay.powi(e)).max(self.min)
    }
}
