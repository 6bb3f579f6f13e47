use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Dense, Lstm, LstmStep};
use super::net::{check_input, ConvEncoder, ConvStage, InputShape};
use super::td::{td_loss_gradient, QModel};
use super::tensor::{Grads, ParamTensor, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecurrentSpec {
    pub input: InputShape,
    pub conv: Vec<ConvStage>,
    pub hidden_size: usize,
    pub seq_len: usize,
    pub action_count: usize,
}

/// LSTM output and cell vectors for one stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HiddenState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> HiddenState<T> {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            h: vec![T::zero(); hidden_size],
            c: vec![T::zero(); hidden_size],
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| *v == T::zero())
    }

    fn as_rows(&self) -> (Array2<T>, Array2<T>) {
        let n = self.h.len();
        (
            Array2::from_shape_vec((1, n), self.h.clone()).expect("row"),
            Array2::from_shape_vec((1, n), self.c.clone()).expect("row"),
        )
    }
}

/// A batch of equal-length observation sequences; row `b * seq_len + t`
/// holds step `t` of sequence `b`.
#[derive(Clone, Debug)]
pub struct SequenceInput<T> {
    pub sequences: usize,
    pub seq_len: usize,
    pub obs: Array2<T>,
}

/// Conv stack feeding an LSTM whose output goes through a linear action head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RecurrentQNetwork<T> {
    pub spec: RecurrentSpec,
    pub encoder: ConvEncoder<T>,
    pub lstm: Lstm<T>,
    pub head: Dense<T>,
}

struct SeqCache<T> {
    steps: Vec<LstmStep<T>>,
    hidden_rows: Array2<T>,
}

impl<T: Scalar> RecurrentQNetwork<T> {
    pub fn new<R: Rng + ?Sized>(spec: RecurrentSpec, rng: &mut R) -> Result<Self> {
        if spec.action_count == 0 || spec.hidden_size == 0 || spec.seq_len == 0 {
            return Err(Error::Architecture(
                "action_count, hidden_size and seq_len must be positive".into(),
            ));
        }
        let encoder = ConvEncoder::new(spec.input, &spec.conv, rng)?;
        let lstm = Lstm::new(encoder.output_len(), spec.hidden_size, rng);
        let head = Dense::new(spec.hidden_size, spec.action_count, rng);
        Ok(Self {
            spec,
            encoder,
            lstm,
            head,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.spec.hidden_size
    }

    pub fn zero_state(&self) -> HiddenState<T> {
        HiddenState::zeros(self.spec.hidden_size)
    }

    /// Runs one stream of `L` observations (`L x input_len`) from `h0`.
    pub fn forward_sequence(&self, obs: ArrayView2<T>, h0: &HiddenState<T>) -> Result<(Array2<T>, HiddenState<T>)> {
        check_input(&obs, self.spec.input.len(), "rq_forward")?;
        if h0.h.len() != self.spec.hidden_size || h0.c.len() != self.spec.hidden_size {
            return Err(Error::Shape {
                context: "rq_forward hidden state",
                expected: vec![self.spec.hidden_size],
                actual: vec![h0.h.len(), h0.c.len()],
            });
        }
        let feats = self.encoder.forward(obs);
        let (mut h, mut c) = h0.as_rows();
        let mut hs = Array2::zeros((obs.nrows(), self.spec.hidden_size));
        for t in 0..obs.nrows() {
            let x = feats.slice(s![t..t + 1, ..]);
            let (h2, c2, _) = self.lstm.step(x, h.view(), c.view());
            hs.row_mut(t).assign(&h2.row(0));
            h = h2;
            c = c2;
        }
        let q = self.head.forward(hs.view());
        let last = HiddenState {
            h: h.row(0).to_vec(),
            c: c.row(0).to_vec(),
        };
        Ok((q, last))
    }

    fn check_seq(&self, input: &SequenceInput<T>) -> Result<()> {
        check_input(&input.obs.view(), self.spec.input.len(), "rq_forward batch")?;
        if input.sequences * input.seq_len != input.obs.nrows() || input.seq_len == 0 {
            return Err(Error::Shape {
                context: "rq_forward batch",
                expected: vec![input.sequences * input.seq_len],
                actual: vec![input.obs.nrows()],
            });
        }
        Ok(())
    }

    fn forward_batch(&self, input: &SequenceInput<T>) -> (Array2<T>, SeqCache<T>, super::net::ConvCache<T>) {
        let (b, l) = (input.sequences, input.seq_len);
        let hs = self.spec.hidden_size;
        let (feats, conv_cache) = self.encoder.forward_cached(input.obs.view());
        let feats3 = feats
            .as_standard_layout()
            .into_shape_with_order((b, l, feats.ncols()))
            .expect("sequence-major rows");
        let mut h = Array2::zeros((b, hs));
        let mut c = Array2::zeros((b, hs));
        let mut steps = Vec::with_capacity(l);
        let mut hidden_rows = Array2::zeros((b * l, hs));
        for t in 0..l {
            let x = feats3.index_axis(Axis(1), t);
            let (h2, c2, st) = self.lstm.step(x, h.view(), c.view());
            for k in 0..b {
                hidden_rows.row_mut(k * l + t).assign(&h2.row(k));
            }
            steps.push(st);
            h = h2;
            c = c2;
        }
        let q = self.head.forward(hidden_rows.view());
        (q, SeqCache { steps, hidden_rows }, conv_cache)
    }
}

impl<T: Scalar> Parameterized<T> for RecurrentQNetwork<T> {
    fn params(&self) -> Vec<&ParamTensor<T>> {
        let mut p = self.encoder.params();
        p.extend([&self.lstm.w_input, &self.lstm.w_hidden, &self.lstm.bias]);
        p.extend([&self.head.weight, &self.head.bias]);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        let mut p = self.encoder.params_mut();
        p.extend([&mut self.lstm.w_input, &mut self.lstm.w_hidden, &mut self.lstm.bias]);
        p.extend([&mut self.head.weight, &mut self.head.bias]);
        p
    }
}

impl<T: Scalar> QModel<T> for RecurrentQNetwork<T> {
    type Input = SequenceInput<T>;

    fn action_count(&self) -> usize {
        self.spec.action_count
    }

    /// Every sequence starts from a zero hidden state.
    fn q_values(&self, input: &SequenceInput<T>) -> Result<Array2<T>> {
        self.check_seq(input)?;
        Ok(self.forward_batch(input).0)
    }

    fn loss_and_grads(&self, input: &SequenceInput<T>, actions: &[usize], targets: &[T]) -> Result<(T, Grads<T>)> {
        self.check_seq(input)?;
        let (b, l) = (input.sequences, input.seq_len);
        let (q, cache, conv_cache) = self.forward_batch(input);
        let (loss, dq) = td_loss_gradient(&q, actions, targets)?;
        let mut grads = self.zero_grads();
        let n_conv = 2 * self.encoder.stages.len();
        let (conv_g, rest) = grads.split_at_mut(n_conv);
        let (lstm_g, head_g) = rest.split_at_mut(3);
        let (hw, hb) = head_g.split_at_mut(1);
        let dh_rows = self
            .head
            .backward(cache.hidden_rows.view(), dq.view(), &mut hw[0], &mut hb[0], true)
            .expect("requested dx");
        let dh3 = dh_rows
            .as_standard_layout()
            .into_shape_with_order((b, l, self.spec.hidden_size))
            .expect("sequence-major rows");
        let dh_out: Vec<Array2<T>> = (0..l).map(|t| dh3.index_axis(Axis(1), t).to_owned()).collect();
        let [gx, gh, gb] = lstm_g else {
            unreachable!("three lstm tensors")
        };
        let dxs = self.lstm.backward(&cache.steps, &dh_out, [gx, gh, gb]);
        let feat_len = self.encoder.output_len();
        let mut dfeat = Array2::zeros((b * l, feat_len));
        for (t, dx) in dxs.iter().enumerate() {
            for k in 0..b {
                dfeat.row_mut(k * l + t).assign(&dx.row(k));
            }
        }
        self.encoder.backward(&conv_cache, dfeat, conv_g, false);
        Ok((loss, grads))
    }

    fn same_architecture(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}
