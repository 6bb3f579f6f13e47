pub mod agents;
pub mod arbitration;
pub mod env;
pub mod error;
pub mod experiment;
pub mod knowledge;
pub mod learner;
pub mod nn;
pub mod replay;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Precision used by the experiment runner and the command line.
pub type Real = f64;
pub type Agent = agents::Agent<Real>;
pub type Trainer = agents::Trainer<Real>;
pub type QNetwork = nn::QNetwork<Real>;
pub type RecurrentQNetwork = nn::RecurrentQNetwork<Real>;
pub type KnowledgeEmbedderNet = nn::KnowledgeEmbedderNet<Real>;
pub type KnowledgeModule = knowledge::KnowledgeModule<Real>;
pub type Selector = arbitration::Selector<Real>;
