use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::Dense;
use super::net::{check_input, ConvEncoder, ConvStage, InputShape, Mlp};
use super::td::{td_loss_gradient, QModel};
use super::tensor::{Grads, ParamTensor, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QNetworkSpec {
    pub input: InputShape,
    pub conv: Vec<ConvStage>,
    pub fc_widths: Vec<usize>,
    pub action_count: usize,
}

/// Conv stack, ReLU hidden layers, linear action head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QNetwork<T> {
    pub spec: QNetworkSpec,
    pub encoder: ConvEncoder<T>,
    pub hidden: Mlp<T>,
    pub head: Dense<T>,
}

impl<T: Scalar> QNetwork<T> {
    pub fn new<R: Rng + ?Sized>(spec: QNetworkSpec, rng: &mut R) -> Result<Self> {
        if spec.action_count == 0 {
            return Err(Error::Architecture("action_count must be positive".into()));
        }
        let encoder = ConvEncoder::new(spec.input, &spec.conv, rng)?;
        let features = encoder.output_len();
        let hidden = Mlp::new(features, &spec.fc_widths, rng)?;
        let head = Dense::new(hidden.output_len(features), spec.action_count, rng);
        Ok(Self {
            spec,
            encoder,
            hidden,
            head,
        })
    }

    pub fn input_len(&self) -> usize {
        self.spec.input.len()
    }

    /// Q-values for a `batch x input_len` observation matrix.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        check_input(&x, self.input_len(), "q_forward")?;
        let f = self.encoder.forward(x);
        let h = self.hidden.forward(f.view());
        Ok(self.head.forward(h.view()))
    }

    /// Gradients of `sum(dq * Q(x))` w.r.t. all parameters.
    pub fn backward_from(
        &self,
        x: ArrayView2<T>,
        dq_fn: impl FnOnce(&Array2<T>) -> Result<Array2<T>>,
    ) -> Result<(Array2<T>, Grads<T>)> {
        check_input(&x, self.input_len(), "q_forward")?;
        let (f, conv_cache) = self.encoder.forward_cached(x);
        let (h, mlp_cache) = self.hidden.forward_cached(f.view());
        let q = self.head.forward(h.view());
        let dq = dq_fn(&q)?;
        let mut grads = self.zero_grads();
        let n_conv = 2 * self.encoder.stages.len();
        let n_fc = 2 * self.hidden.layers.len();
        let (conv_g, rest) = grads.split_at_mut(n_conv);
        let (fc_g, head_g) = rest.split_at_mut(n_fc);
        let (hw, hb) = head_g.split_at_mut(1);
        let dh = self
            .head
            .backward(h.view(), dq.view(), &mut hw[0], &mut hb[0], true)
            .expect("requested dx");
        if let Some(df) = self.hidden.backward(&mlp_cache, dh, fc_g, true) {
            self.encoder.backward(&conv_cache, df, conv_g, false);
        }
        Ok((q, grads))
    }
}

impl<T: Scalar> Parameterized<T> for QNetwork<T> {
    fn params(&self) -> Vec<&ParamTensor<T>> {
        let mut p = self.encoder.params();
        p.extend(self.hidden.params());
        p.extend([&self.head.weight, &self.head.bias]);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut p = self.encoder.params_mut();
        p.extend(self.hidden.params_mut());
        p.extend([&mut self.head.weight, &mut self.head.bias]);
        p
    }
}

impl<T: Scalar> QModel<T> for QNetwork<T> {
    type Input = Array2<T>;

    fn action_count(&self) -> usize {
        self.spec.action_count
    }

    fn q_values(&self, input: &Array2<T>) -> Result<Array2<T>> {
        self.forward(input.view())
    }

    fn loss_and_grads(&self, input: &Array2<T>, actions: &[usize], targets: &[T]) -> Result<(T, Grads<T>)> {
        let mut loss = T::zero();
        let (_, grads) = self.backward_from(input.view(), |q| {
            let (l, dq) = td_loss_gradient(q, actions, targets)?;
            loss = l;
            Ok(dq)
        })?;
        Ok((loss, grads))
    }

    fn same_architecture(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}
