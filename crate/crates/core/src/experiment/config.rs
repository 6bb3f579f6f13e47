use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::presets;
use crate::agents::{validate_setup, AgentKind, Hyperparameters};
use crate::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::knowledge::ModuleConfig;

fn default_true() -> bool {
    true
}

fn default_checkpoint_every() -> usize {
    500
}

/// Quality gate for training a frozen oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTraining {
    /// Required mean balls per greedy episode.
    pub gate_balls: f64,
    pub eval_episodes: usize,
    /// Training episodes between gate evaluations.
    pub eval_every: usize,
    /// Where the oracle is written, relative to the output root.
    pub checkpoint: PathBuf,
}

/// One experiment: an agent, its modules and hyperparameters, an
/// environment, and a seed list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub agent: AgentKind,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "default_true")]
    pub trace: bool,
    #[serde(default)]
    pub dump_replay: bool,
    /// Stop once a full 30-episode window of returns averages at least this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_at_moving_avg: Option<f64>,
    pub env: EnvSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modules: Vec<ModuleConfig>,
    pub hyper: Hyperparameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleTraining>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let safe = |c: char| c.is_ascii_alphanumeric() || c == '-' || c == '_';
        if self.name.is_empty() || !self.name.chars().all(safe) {
            return Err(Error::config("name", "use letters, digits, '-' and '_' only"));
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::config("seeds", "must be distinct"));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::config("checkpoint_every", "must be positive"));
        }
        if let Some(v) = self.stop_at_moving_avg {
            if !v.is_finite() {
                return Err(Error::config("stop_at_moving_avg", "must be finite"));
            }
        }
        validate_setup(self.agent, &self.hyper, &self.env, &self.modules)?;
        if let Some(o) = &self.oracle {
            if self.agent != AgentKind::Dqn || self.env.kind() != EnvKind::Collect {
                return Err(Error::config("oracle", "oracles are DQN agents on Collect"));
            }
            if o.gate_balls.is_nan() || o.gate_balls <= 0.0 || o.eval_episodes == 0 || o.eval_every == 0 {
                return Err(Error::config(
                    "oracle",
                    "gate_balls, eval_episodes and eval_every must be positive",
                ));
            }
        }
        Ok(())
    }
}

/// Reads a config file, or an embedded preset when no such file exists.
pub fn load_config(path_or_preset: &str) -> Result<ExperimentConfig> {
    let path = Path::new(path_or_preset);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return ExperimentConfig::from_toml(&text, &path.display().to_string());
    }
    match presets::preset_source(path_or_preset) {
        Some(text) => ExperimentConfig::from_toml(text, &format!("preset {path_or_preset}")),
        None => Err(Error::config(
            "config",
            format!("no file or preset named `{path_or_preset}`"),
        )),
    }
}

/// Reads an environment description: either a bare environment table or
/// the `[env]` table of an experiment config.
pub fn load_env(path_or_preset: &str) -> Result<EnvSpec> {
    let path = Path::new(path_or_preset);
    let (text, origin) = if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        (text, path.display().to_string())
    } else if let Some(text) = presets::preset_source(path_or_preset) {
        (text.to_string(), format!("preset {path_or_preset}"))
    } else {
        return Err(Error::config(
            "env",
            format!("no file or preset named `{path_or_preset}`"),
        ));
    };
    let parse_err = |e: toml::de::Error| Error::Parse {
        origin: origin.clone(),
        message: e.to_string(),
    };
    let value: toml::Table = toml::from_str(&text).map_err(parse_err)?;
    let spec: EnvSpec = match value.get("env") {
        Some(env) => env.clone().try_into().map_err(parse_err)?,
        None => toml::from_str(&text).map_err(parse_err)?,
    };
    spec.validate()?;
    Ok(spec)
}
