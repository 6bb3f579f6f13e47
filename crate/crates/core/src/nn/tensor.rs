use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A named block of parameters stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ParamTensor<T> {
    pub shape: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![T::zero(); n],
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.contains(&0) || n != values.len() {
            return Err(Error::Shape {
                context: "ParamTensor::from_vec",
                expected: shape.to_vec(),
                actual: vec![values.len()],
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            values,
        })
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn fan_in_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n = shape.iter().product();
        let values = (0..n).map(|_| T::of(rng.gen_range(-bound..=bound))).collect();
        Self {
            shape: shape.to_vec(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: T) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    pub(crate) fn matrix(&self) -> ArrayView2<'_, T> {
        debug_assert_eq!(self.shape.len(), 2);
        ArrayView2::from_shape((self.shape[0], self.shape[1]), &self.values).expect("matrix shape matches storage")
    }
}

/// Gradients, one tensor per parameter tensor, in declaration order.
pub type Grads<T> = Vec<ParamTensor<T>>;

/// Anything that owns parameter tensors in a fixed declaration order.
pub trait Parameterized<T: Scalar> {
    fn params(&self) -> Vec<&ParamTensor<T>>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero_grads(&self) -> Grads<T> {
        self.params().iter().map(|p| ParamTensor::zeros(&p.shape)).collect()
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }
}

pub(crate) fn check_same_shapes<T: Scalar>(
    a: &[&ParamTensor<T>],
    b: &[ParamTensor<T>],
    context: &'static str,
) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            context,
            expected: vec![a.len()],
            actual: vec![b.len()],
        });
    }
    for (x, y) in a.iter().zip(b) {
        if x.shape != y.shape {
            return Err(Error::Shape {
                context,
                expected: x.shape.clone(),
                actual: y.shape.clone(),
            });
        }
    }
    Ok(())
}
