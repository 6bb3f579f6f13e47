//! Building blocks shared by the Q-network variants.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu_backward_inplace, relu_inplace, Conv2d, Dense};
use super::tensor::ParamTensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Spatial input layout (height, width, channels).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl InputShape {
    pub fn square(view: usize, channels: usize) -> Self {
        Self {
            height: view,
            width: view,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub out_channels: usize,
    pub kernel: usize,
}

impl ConvStage {
    pub const fn new(out_channels: usize, kernel: usize) -> Self {
        Self { out_channels, kernel }
    }
}

/// Conv stack used for 7x7 views.
pub const STANDARD_CONV: [ConvStage; 2] = [ConvStage::new(16, 2), ConvStage::new(32, 2)];
/// Smaller stack for the 5x5 Collect view.
pub const SMALL_CONV: [ConvStage; 1] = [ConvStage::new(16, 2)];

/// Conv stack for a given view size.
pub fn conv_for_view(view: usize) -> Vec<ConvStage> {
    if view <= 5 {
        SMALL_CONV.to_vec()
    } else {
        STANDARD_CONV.to_vec()
    }
}

pub(crate) fn check_input<T>(x: &ArrayView2<T>, expected: usize, context: &'static str) -> Result<()> {
    if x.nrows() == 0 || x.ncols() != expected {
        return Err(Error::Shape {
            context,
            expected: vec![x.nrows().max(1), expected],
            actual: vec![x.nrows(), x.ncols()],
        });
    }
    Ok(())
}

/// Convolution stages, each followed by a ReLU, then flattening.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConvEncoder<T> {
    pub input: InputShape,
    pub stages: Vec<Conv2d<T>>,
}

pub struct ConvCache<T> {
    cols: Vec<Array2<T>>,
    outs: Vec<Array2<T>>,
}

impl<T: Scalar> ConvEncoder<T> {
    pub fn new<R: Rng + ?Sized>(input: InputShape, spec: &[ConvStage], rng: &mut R) -> Result<Self> {
        let mut stages = Vec::with_capacity(spec.len());
        let (mut h, mut w, mut c) = (input.height, input.width, input.channels);
        for st in spec {
            if st.kernel == 0 || st.kernel > h || st.kernel > w || st.out_channels == 0 {
                return Err(Error::Architecture(format!(
                    "conv stage {st:?} does not fit a {h}x{w} input"
                )));
            }
            let conv = Conv2d::new(c, st.out_channels, st.kernel, rng);
            (h, w) = conv.output_hw(h, w);
            c = st.out_channels;
            stages.push(conv);
        }
        Ok(Self { input, stages })
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.stages.len() + 1);
        let (mut h, mut w) = (self.input.height, self.input.width);
        dims.push((h, w));
        for st in &self.stages {
            (h, w) = st.output_hw(h, w);
            dims.push((h, w));
        }
        dims
    }

    pub fn output_len(&self) -> usize {
        let (h, w) = *self.dims().last().expect("dims non-empty");
        let c = self.stages.last().map_or(self.input.channels, |s| s.out_channels);
        h * w * c
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> (Array2<T>, ConvCache<T>) {
        let dims = self.dims();
        let mut cols = Vec::with_capacity(self.stages.len());
        let mut outs: Vec<Array2<T>> = Vec::with_capacity(self.stages.len());
        let mut cur = x.to_owned();
        for (st, &(h, w)) in self.stages.iter().zip(&dims) {
            let (c, mut y) = st.forward(cur.view(), h, w);
            relu_inplace(&mut y);
            cols.push(c);
            outs.push(y.clone());
            cur = y;
        }
        (cur, ConvCache { cols, outs })
    }

    /// Accumulates into `grads` (two tensors per stage). Returns the input
    /// gradient when requested.
    pub fn backward(
        &self,
        cache: &ConvCache<T>,
        dout: Array2<T>,
        grads: &mut [ParamTensor<T>],
        need_dx: bool,
    ) -> Option<Array2<T>> {
        let dims = self.dims();
        let mut d = dout;
        for k in (0..self.stages.len()).rev() {
            relu_backward_inplace(&mut d, &cache.outs[k]);
            let (gw, rest) = grads[2 * k..].split_first_mut().expect("grad slot");
            let (h, w) = dims[k];
            {
                let dx = self.stages[k].backward(&cache.cols[k], &d, h, w, gw, &mut rest[0], k > 0 || need_dx)?;
                d = dx
            }
        }
        Some(d)
    }

    pub fn params(&self) -> Vec<&ParamTensor<T>> {
        self.stages.iter().flat_map(|s| [&s.weight, &s.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        self.stages
            .iter_mut()
            .flat_map(|s| [&mut s.weight, &mut s.bias])
            .collect()
    }
}

/// Fully connected layers, each followed by a ReLU.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

pub struct MlpCache<T> {
    inputs: Vec<Array2<T>>,
    outs: Vec<Array2<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut n = inputs;
        for &w in widths {
            if w == 0 {
                return Err(Error::Architecture("zero-width layer".into()));
            }
            layers.push(Dense::new(n, w, rng));
            n = w;
        }
        Ok(Self { layers })
    }

    pub fn output_len(&self, inputs: usize) -> usize {
        self.layers.last().map_or(inputs, |l| l.outputs())
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut cur = x.to_owned();
        for l in &self.layers {
            cur = l.forward(cur.view());
            relu_inplace(&mut cur);
        }
        cur
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outs: Vec<Array2<T>> = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_owned();
        for l in &self.layers {
            let mut y = l.forward(cur.view());
            relu_inplace(&mut y);
            inputs.push(cur);
            outs.push(y.clone());
            cur = y;
        }
        (cur, MlpCache { inputs, outs })
    }

    pub fn backward(
        &self,
        cache: &MlpCache<T>,
        dout: Array2<T>,
        grads: &mut [ParamTensor<T>],
        need_dx: bool,
    ) -> Option<Array2<T>> {
        let mut d = dout;
        for k in (0..self.layers.len()).rev() {
            relu_backward_inplace(&mut d, &cache.outs[k]);
            let (gw, rest) = grads[2 * k..].split_first_mut().expect("grad slot");
            {
                let dx =
                    self.layers[k].backward(cache.inputs[k].view(), d.view(), gw, &mut rest[0], k > 0 || need_dx)?;
                d = dx
            }
        }
        Some(d)
    }

    pub fn params(&self) -> Vec<&ParamTensor<T>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}
