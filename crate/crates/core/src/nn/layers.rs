//! Dense, convolution and LSTM layers with hand-written backward passes.
//!
//! Activations are row-major `Array2` values with one row per sample.
//! Convolution activations use NHWC layout flattened per sample, so a
//! `(batch * positions) x channels` output is also a valid
//! `batch x (positions * channels)` matrix.

use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::ParamTensor;
use crate::scalar::Scalar;

pub(crate) fn relu_inplace<T: Scalar>(x: &mut Array2<T>) {
    x.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

/// Zeroes `grad` wherever the post-activation output was not positive.
pub(crate) fn relu_backward_inplace<T: Scalar>(grad: &mut Array2<T>, out: &Array2<T>) {
    Zip::from(grad).and(out).for_each(|g, &o| {
        if o <= T::zero() {
            *g = T::zero();
        }
    });
}

fn add_bias<T: Scalar>(y: &mut Array2<T>, bias: &ParamTensor<T>) {
    let b = &bias.values;
    let data = y.as_slice_mut().expect("fresh matmul output is contiguous");
    for row in data.chunks_exact_mut(b.len()) {
        for (v, &bb) in row.iter_mut().zip(b) {
            *v += bb;
        }
    }
}

fn accumulate_matrix<T: Scalar>(dst: &mut ParamTensor<T>, src: &Array2<T>) {
    let mut view = ArrayViewMut2::from_shape((dst.shape[0], dst.shape[1]), &mut dst.values)
        .expect("gradient shape matches parameter");
    view += src;
}

fn accumulate_bias<T: Scalar>(dst: &mut ParamTensor<T>, dy: &ArrayView2<T>) {
    let n = dst.values.len();
    match dy.as_slice() {
        Some(data) => {
            for row in data.chunks_exact(n) {
                for (d, &v) in dst.values.iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        None => {
            for row in dy.rows() {
                for (d, &v) in dst.values.iter_mut().zip(row.iter()) {
                    *d += v;
                }
            }
        }
    }
}

/// Below this many rows a plain row-times-matrix loop beats packed gemm.
const SMALL_BATCH: usize = 4;

fn small_matmul<T: Scalar>(x: ArrayView2<T>, w: &ParamTensor<T>) -> Array2<T> {
    let (k, n) = (w.shape[0], w.shape[1]);
    let mut y = Array2::zeros((x.nrows(), n));
    for (xr, mut yr) in x.rows().into_iter().zip(y.rows_mut()) {
        let yr = yr.as_slice_mut().expect("contiguous row");
        for (i, &xv) in xr.iter().enumerate().take(k) {
            if xv == T::zero() {
                continue;
            }
            let wr = &w.values[i * n..(i + 1) * n];
            for (acc, &wv) in yr.iter_mut().zip(wr) {
                *acc += xv * wv;
            }
        }
    }
    y
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dense<T> {
    /// `inputs x outputs`
    pub weight: ParamTensor<T>,
    pub bias: ParamTensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weight: ParamTensor::fan_in_uniform(&[inputs, outputs], inputs, rng),
            bias: ParamTensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut y = if x.nrows() <= SMALL_BATCH {
            small_matmul(x, &self.weight)
        } else {
            x.dot(&self.weight.matrix())
        };
        add_bias(&mut y, &self.bias);
        y
    }

    /// Accumulates parameter gradients and optionally returns the input gradient.
    pub fn backward(
        &self,
        x: ArrayView2<T>,
        dy: ArrayView2<T>,
        grad_w: &mut ParamTensor<T>,
        grad_b: &mut ParamTensor<T>,
        need_dx: bool,
    ) -> Option<Array2<T>> {
        accumulate_matrix(grad_w, &x.t().dot(&dy));
        accumulate_bias(grad_b, &dy);
        need_dx.then(|| dy.dot(&self.weight.matrix().t()))
    }
}

/// Stride-1, unpadded square-kernel convolution over NHWC input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `(kernel * kernel * in_channels) x out_channels`
    pub weight: ParamTensor<T>,
    pub bias: ParamTensor<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = kernel * kernel * in_channels;
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: ParamTensor::fan_in_uniform(&[fan_in, out_channels], fan_in, rng),
            bias: ParamTensor::zeros(&[out_channels]),
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 1 - self.kernel, w + 1 - self.kernel)
    }

    /// Unfolds `batch x (h*w*c)` input into `(batch*positions) x (k*k*c)` patches.
    pub fn im2col(&self, x: ArrayView2<T>, h: usize, w: usize) -> Array2<T> {
        let (oh, ow) = self.output_hw(h, w);
        let c = self.in_channels;
        let k = self.kernel;
        let batch = x.nrows();
        let mut cols = Array2::zeros((batch * oh * ow, k * k * c));
        for (b, sample) in x.rows().into_iter().enumerate() {
            let sample = sample.as_slice().expect("activations are contiguous");
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut row = cols.row_mut((b * oh + oy) * ow + ox);
                    let row = row.as_slice_mut().expect("contiguous row");
                    for ky in 0..k {
                        let src = ((oy + ky) * w + ox) * c;
                        let dst = ky * k * c;
                        row[dst..dst + k * c].copy_from_slice(&sample[src..src + k * c]);
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &Array2<T>, batch: usize, h: usize, w: usize) -> Array2<T> {
        let (oh, ow) = self.output_hw(h, w);
        let c = self.in_channels;
        let k = self.kernel;
        let mut dx = Array2::zeros((batch, h * w * c));
        for b in 0..batch {
            let mut sample = dx.row_mut(b);
            let sample = sample.as_slice_mut().expect("contiguous row");
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = dcols.row((b * oh + oy) * ow + ox);
                    let row = row.as_slice().expect("contiguous row");
                    for ky in 0..k {
                        let dst = ((oy + ky) * w + ox) * c;
                        let src = ky * k * c;
                        for (d, &v) in sample[dst..dst + k * c].iter_mut().zip(&row[src..src + k * c]) {
                            *d += v;
                        }
                    }
                }
            }
        }
        dx
    }

    /// Returns the patch matrix (kept for backward) and the pre-activation
    /// output shaped `batch x (positions * out_channels)`.
    pub fn forward(&self, x: ArrayView2<T>, h: usize, w: usize) -> (Array2<T>, Array2<T>) {
        let batch = x.nrows();
        let cols = self.im2col(x, h, w);
        let mut y = cols.dot(&self.weight.matrix());
        add_bias(&mut y, &self.bias);
        let per_sample = y.len() / batch;
        let y = standard_layout(y)
            .into_shape_with_order((batch, per_sample))
            .expect("row-major reshape");
        (cols, y)
    }

    /// `dy` is `batch x (positions * out_channels)`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        cols: &Array2<T>,
        dy: &Array2<T>,
        h: usize,
        w: usize,
        grad_w: &mut ParamTensor<T>,
        grad_b: &mut ParamTensor<T>,
        need_dx: bool,
    ) -> Option<Array2<T>> {
        let batch = dy.nrows();
        let rows = dy.len() / self.out_channels;
        let dy = dy
            .as_standard_layout()
            .into_shape_with_order((rows, self.out_channels))
            .expect("row-major reshape");
        accumulate_matrix(grad_w, &cols.t().dot(&dy));
        accumulate_bias(grad_b, &dy.view());
        need_dx.then(|| {
            let dcols = dy.dot(&self.weight.matrix().t());
            self.col2im(&dcols, batch, h, w)
        })
    }
}

/// Matrix products may come back column-major; reshapes need row-major.
pub(crate) fn standard_layout<T: Clone>(a: Array2<T>) -> Array2<T> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Per-step values retained for backpropagation through time.
#[derive(Clone, Debug)]
pub struct LstmStep<T> {
    x: Array2<T>,
    h_prev: Array2<T>,
    c_prev: Array2<T>,
    /// Activated gates `[i | f | g | o]`, `batch x 4H`.
    gates: Array2<T>,
    c: Array2<T>,
}

/// Single-layer LSTM with gate order input, forget, cell, output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Lstm<T> {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `input x 4H`
    pub w_input: ParamTensor<T>,
    /// `H x 4H`
    pub w_hidden: ParamTensor<T>,
    pub bias: ParamTensor<T>,
}

impl<T: Scalar> Lstm<T> {
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        Self {
            input_size,
            hidden_size,
            w_input: ParamTensor::fan_in_uniform(&[input_size, 4 * hidden_size], input_size, rng),
            w_hidden: ParamTensor::fan_in_uniform(&[hidden_size, 4 * hidden_size], hidden_size, rng),
            bias: ParamTensor::zeros(&[4 * hidden_size]),
        }
    }

    /// One time step for a batch. Returns `(h, c, cache)`.
    pub fn step(
        &self,
        x: ArrayView2<T>,
        h_prev: ArrayView2<T>,
        c_prev: ArrayView2<T>,
    ) -> (Array2<T>, Array2<T>, LstmStep<T>) {
        let hs = self.hidden_size;
        let mut z = x.dot(&self.w_input.matrix()) + h_prev.dot(&self.w_hidden.matrix());
        add_bias(&mut z, &self.bias);
        z.slice_mut(s![.., 0..2 * hs]).mapv_inplace(sigmoid);
        z.slice_mut(s![.., 2 * hs..3 * hs]).mapv_inplace(|v| v.tanh());
        z.slice_mut(s![.., 3 * hs..]).mapv_inplace(sigmoid);
        let i = z.slice(s![.., 0..hs]);
        let f = z.slice(s![.., hs..2 * hs]);
        let g = z.slice(s![.., 2 * hs..3 * hs]);
        let o = z.slice(s![.., 3 * hs..]);
        let c = &f * &c_prev + &i * &g;
        let h = &o * &c.mapv(|v| v.tanh());
        let cache = LstmStep {
            x: x.to_owned(),
            h_prev: h_prev.to_owned(),
            c_prev: c_prev.to_owned(),
            gates: z.clone(),
            c: c.clone(),
        };
        (h, c, cache)
    }

    /// Backpropagates through a cached sequence.
    ///
    /// `dh_out[t]` is the loss gradient w.r.t. the hidden output at step `t`.
    /// Gradients w.r.t. the initial state are discarded. Returns the input
    /// gradient per step.
    pub fn backward(
        &self,
        steps: &[LstmStep<T>],
        dh_out: &[Array2<T>],
        grads: [&mut ParamTensor<T>; 3],
    ) -> Vec<Array2<T>> {
        let [grad_wx, grad_wh, grad_b] = grads;
        let hs = self.hidden_size;
        let batch = dh_out.first().map_or(0, |d| d.nrows());
        let mut dh_next = Array2::<T>::zeros((batch, hs));
        let mut dc_next = Array2::<T>::zeros((batch, hs));
        let mut dxs = vec![Array2::zeros((0, 0)); steps.len()];
        let one = T::one();
        for t in (0..steps.len()).rev() {
            let st = &steps[t];
            let dh = &dh_out[t] + &dh_next;
            let i = st.gates.slice(s![.., 0..hs]);
            let f = st.gates.slice(s![.., hs..2 * hs]);
            let g = st.gates.slice(s![.., 2 * hs..3 * hs]);
            let o = st.gates.slice(s![.., 3 * hs..]);
            let tc = st.c.mapv(|v| v.tanh());
            let mut dz = Array2::<T>::zeros((batch, 4 * hs));
            let mut dc = dc_next.clone();
            Zip::from(&mut dc)
                .and(&dh)
                .and(&o)
                .and(&tc)
                .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (one - tc * tc));
            Zip::from(dz.slice_mut(s![.., 0..hs]))
                .and(&dc)
                .and(&g)
                .and(&i)
                .for_each(|d, &dc, &g, &i| *d = dc * g * i * (one - i));
            Zip::from(dz.slice_mut(s![.., hs..2 * hs]))
                .and(&dc)
                .and(&st.c_prev)
                .and(&f)
                .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (one - f));
            Zip::from(dz.slice_mut(s![.., 2 * hs..3 * hs]))
                .and(&dc)
                .and(&i)
                .and(&g)
                .for_each(|d, &dc, &i, &g| *d = dc * i * (one - g * g));
            Zip::from(dz.slice_mut(s![.., 3 * hs..]))
                .and(&dh)
                .and(&tc)
                .and(&o)
                .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (one - o));
            accumulate_matrix(grad_wx, &st.x.t().dot(&dz));
            accumulate_matrix(grad_wh, &st.h_prev.t().dot(&dz));
            accumulate_bias(grad_b, &dz.view());
            dxs[t] = dz.dot(&self.w_input.matrix().t());
            dh_next = dz.dot(&self.w_hidden.matrix().t());
            dc_next = &dc * &f;
        }
        dxs
    }
}
