//! Minimal neural substrate: Q-networks, TD learning, Adam and gradient checks.

mod adam;
mod checkpoint;
mod gradcheck;
mod knowledge;
mod layers;
mod net;
mod qnet;
mod recurrent;
mod td;
mod tensor;

pub use adam::{soft_update, AdamState, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_json, save_json, Architecture, Checkpointable, NetworkCheckpoint, FORMAT_VERSION};
pub use gradcheck::{finite_diff_check, max_relative_error, TdBatch};
pub use knowledge::{KnowledgeEmbedderNet, KnowledgeEmbedderSpec, KnowledgeInput};
pub use layers::{Conv2d, Dense, Lstm};
pub use net::{conv_for_view, ConvEncoder, ConvStage, InputShape, Mlp, SMALL_CONV, STANDARD_CONV};
pub use qnet::{QNetwork, QNetworkSpec};
pub use recurrent::{HiddenState, RecurrentQNetwork, RecurrentSpec, SequenceInput};
pub use td::{argmax, td_loss_gradient, td_targets, QModel};
pub use tensor::{Grads, ParamTensor, Parameterized};
