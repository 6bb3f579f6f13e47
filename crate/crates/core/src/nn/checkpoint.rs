//! Versioned network checkpoints.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::knowledge::{KnowledgeEmbedderNet, KnowledgeEmbedderSpec};
use super::qnet::{QNetwork, QNetworkSpec};
use super::recurrent::{RecurrentQNetwork, RecurrentSpec};
use super::tensor::{check_same_shapes, ParamTensor, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Feedforward(QNetworkSpec),
    Recurrent(RecurrentSpec),
    KnowledgeEmbedder(KnowledgeEmbedderSpec),
}

/// Parameters are stored per tensor in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetworkCheckpoint<T> {
    pub format_version: u32,
    pub architecture: Architecture,
    pub params: Vec<ParamTensor<T>>,
    pub adam: Option<AdamState<T>>,
}

/// Networks that can be rebuilt from their architecture description.
pub trait Checkpointable<T: Scalar>: Parameterized<T> + Sized {
    fn architecture(&self) -> Architecture;
    fn build(arch: &Architecture) -> Result<Self>;

    fn to_checkpoint(&self, adam: Option<&AdamState<T>>) -> NetworkCheckpoint<T> {
        NetworkCheckpoint {
            format_version: FORMAT_VERSION,
            architecture: self.architecture(),
            params: self.params().into_iter().cloned().collect(),
            adam: adam.cloned(),
        }
    }

    fn from_checkpoint(ck: &NetworkCheckpoint<T>) -> Result<Self> {
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {} (expected {FORMAT_VERSION})",
                ck.format_version
            )));
        }
        let mut net = Self::build(&ck.architecture)?;
        check_same_shapes(&net.params(), &ck.params, "checkpoint params")?;
        if let Some(adam) = &ck.adam {
            check_same_shapes(&net.params(), &adam.first_moments, "checkpoint adam")?;
            check_same_shapes(&net.params(), &adam.second_moments, "checkpoint adam")?;
        }
        for (dst, src) in net.params_mut().into_iter().zip(&ck.params) {
            dst.values.copy_from_slice(&src.values);
        }
        Ok(net)
    }
}

fn scratch_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl<T: Scalar> Checkpointable<T> for QNetwork<T> {
    fn architecture(&self) -> Architecture {
        Architecture::Feedforward(self.spec.clone())
    }

    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::Feedforward(spec) => QNetwork::new(spec.clone(), &mut scratch_rng()),
            other => Err(Error::Architecture(format!("expected feedforward, found {other:?}"))),
        }
    }
}

impl<T: Scalar> Checkpointable<T> for RecurrentQNetwork<T> {
    fn architecture(&self) -> Architecture {
        Architecture::Recurrent(self.spec.clone())
    }

    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::Recurrent(spec) => RecurrentQNetwork::new(spec.clone(), &mut scratch_rng()),
            other => Err(Error::Architecture(format!("expected recurrent, found {other:?}"))),
        }
    }
}

impl<T: Scalar> Checkpointable<T> for KnowledgeEmbedderNet<T> {
    fn architecture(&self) -> Architecture {
        Architecture::KnowledgeEmbedder(self.spec.clone())
    }

    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::KnowledgeEmbedder(spec) => KnowledgeEmbedderNet::new(spec.clone(), &mut scratch_rng()),
            other => Err(Error::Architecture(format!(
                "expected knowledge embedder, found {other:?}"
            ))),
        }
    }
}

pub fn save_json<V: Serialize>(value: &V, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json<V: for<'de> Deserialize<'de>>(path: &Path) -> Result<V> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
