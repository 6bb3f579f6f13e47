use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::Dense;
use super::net::{check_input, ConvEncoder, ConvStage, InputShape, Mlp};
use super::td::{td_loss_gradient, QModel};
use super::tensor::{Grads, ParamTensor, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEmbedderSpec {
    pub input: InputShape,
    pub conv: Vec<ConvStage>,
    pub latent_dim: usize,
    pub state_embedding: usize,
    pub knowledge_len: usize,
    pub knowledge_latent: usize,
    pub knowledge_embedding: usize,
    pub combined_latent: usize,
    pub action_count: usize,
}

/// Observation and external knowledge vector for a batch.
#[derive(Clone, Debug)]
pub struct KnowledgeInput<T> {
    pub obs: Array2<T>,
    pub knowledge: Array2<T>,
}

/// Separate state and knowledge encoders whose embeddings are concatenated
/// and passed through a joint hidden layer to the action head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KnowledgeEmbedderNet<T> {
    pub spec: KnowledgeEmbedderSpec,
    pub encoder: ConvEncoder<T>,
    pub state_mlp: Mlp<T>,
    pub knowledge_mlp: Mlp<T>,
    pub joint: Mlp<T>,
    pub head: Dense<T>,
}

impl<T: Scalar> KnowledgeEmbedderNet<T> {
    pub fn new<R: Rng + ?Sized>(spec: KnowledgeEmbedderSpec, rng: &mut R) -> Result<Self> {
        if spec.action_count == 0 || spec.knowledge_len == 0 {
            return Err(Error::Architecture(
                "action_count and knowledge_len must be positive".into(),
            ));
        }
        let encoder = ConvEncoder::new(spec.input, &spec.conv, rng)?;
        let state_mlp = Mlp::new(encoder.output_len(), &[spec.latent_dim, spec.state_embedding], rng)?;
        let knowledge_mlp = Mlp::new(
            spec.knowledge_len,
            &[spec.knowledge_latent, spec.knowledge_embedding],
            rng,
        )?;
        let joint = Mlp::new(
            spec.state_embedding + spec.knowledge_embedding,
            &[spec.combined_latent],
            rng,
        )?;
        let head = Dense::new(spec.combined_latent, spec.action_count, rng);
        Ok(Self {
            spec,
            encoder,
            state_mlp,
            knowledge_mlp,
            joint,
            head,
        })
    }

    fn check(&self, input: &KnowledgeInput<T>) -> Result<()> {
        check_input(&input.obs.view(), self.spec.input.len(), "knowledge net obs")?;
        check_input(
            &input.knowledge.view(),
            self.spec.knowledge_len,
            "knowledge net knowledge",
        )?;
        if input.obs.nrows() != input.knowledge.nrows() {
            return Err(Error::Shape {
                context: "knowledge net batch",
                expected: vec![input.obs.nrows()],
                actual: vec![input.knowledge.nrows()],
            });
        }
        Ok(())
    }

    /// Zeroes every knowledge-encoder parameter.
    pub fn zero_knowledge_encoder(&mut self) {
        for p in self.knowledge_mlp.params_mut() {
            p.fill(T::zero());
        }
    }
}

impl<T: Scalar> Parameterized<T> for KnowledgeEmbedderNet<T> {
    fn params(&self) -> Vec<&ParamTensor<T>> {
        let mut p = self.encoder.params();
        p.extend(self.state_mlp.params());
        p.extend(self.knowledge_mlp.params());
        p.extend(self.joint.params());
        p.extend([&self.head.weight, &self.head.bias]);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut p = self.encoder.params_mut();
        p.extend(self.state_mlp.params_mut());
        p.extend(self.knowledge_mlp.params_mut());
        p.extend(self.joint.params_mut());
        p.extend([&mut self.head.weight, &mut self.head.bias]);
        p
    }
}

impl<T: Scalar> QModel<T> for KnowledgeEmbedderNet<T> {
    type Input = KnowledgeInput<T>;

    fn action_count(&self) -> usize {
        self.spec.action_count
    }

    fn q_values(&self, input: &KnowledgeInput<T>) -> Result<Array2<T>> {
        self.check(input)?;
        let s = self.state_mlp.forward(self.encoder.forward(input.obs.view()).view());
        let k = self.knowledge_mlp.forward(input.knowledge.view());
        let joint_in = concatenate(Axis(1), &[s.view(), k.view()]).expect("same batch");
        let j = self.joint.forward(joint_in.view());
        Ok(self.head.forward(j.view()))
    }

    fn loss_and_grads(&self, input: &KnowledgeInput<T>, actions: &[usize], targets: &[T]) -> Result<(T, Grads<T>)> {
        self.check(input)?;
        let (f, conv_cache) = self.encoder.forward_cached(input.obs.view());
        let (s, state_cache) = self.state_mlp.forward_cached(f.view());
        let (k, know_cache) = self.knowledge_mlp.forward_cached(input.knowledge.view());
        let joint_in = concatenate(Axis(1), &[s.view(), k.view()]).expect("same batch");
        let (j, joint_cache) = self.joint.forward_cached(joint_in.view());
        let q = self.head.forward(j.view());
        let (loss, dq) = td_loss_gradient(&q, actions, targets)?;

        let mut grads = self.zero_grads();
        let n_conv = 2 * self.encoder.stages.len();
        let n_state = 2 * self.state_mlp.layers.len();
        let n_know = 2 * self.knowledge_mlp.layers.len();
        let n_joint = 2 * self.joint.layers.len();
        let (conv_g, rest) = grads.split_at_mut(n_conv);
        let (state_g, rest) = rest.split_at_mut(n_state);
        let (know_g, rest) = rest.split_at_mut(n_know);
        let (joint_g, head_g) = rest.split_at_mut(n_joint);
        let (hw, hb) = head_g.split_at_mut(1);
        let dj = self
            .head
            .backward(j.view(), dq.view(), &mut hw[0], &mut hb[0], true)
            .expect("requested dx");
        let djoint = self
            .joint
            .backward(&joint_cache, dj, joint_g, true)
            .expect("requested dx");
        let se = self.spec.state_embedding;
        let ds = djoint.slice(s![.., ..se]).to_owned();
        let dk = djoint.slice(s![.., se..]).to_owned();
        self.knowledge_mlp.backward(&know_cache, dk, know_g, false);
        if let Some(df) = self.state_mlp.backward(&state_cache, ds, state_g, true) {
            self.encoder.backward(&conv_cache, df, conv_g, false);
        }
        Ok((loss, grads))
    }

    fn same_architecture(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}
