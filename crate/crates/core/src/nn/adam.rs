use serde::{Deserialize, Serialize};

use super::tensor::{check_same_shapes, ParamTensor, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates for every parameter tensor of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdamState<T> {
    pub first_moments: Vec<ParamTensor<T>>,
    pub second_moments: Vec<ParamTensor<T>>,
    pub step_count: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn for_model<M: Parameterized<T> + ?Sized>(model: &M) -> Self {
        let zeros = model.zero_grads();
        Self {
            first_moments: zeros.clone(),
            second_moments: zeros,
            step_count: 0,
        }
    }

    /// Applies one bias-corrected Adam update. Gradients are validated before
    /// anything is mutated.
    pub fn step<M: Parameterized<T> + ?Sized>(
        &mut self,
        model: &mut M,
        grads: &[ParamTensor<T>],
        lr: f64,
    ) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {lr} must be positive")));
        }
        check_same_shapes(&model.params(), grads, "adam grads")?;
        check_same_shapes(&model.params(), &self.first_moments, "adam state")?;
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (T::of(BETA1), T::of(BETA2));
        let one = T::one();
        let bias1 = one - b1.powi(t);
        let bias2 = one - b2.powi(t);
        let lr = T::of(lr);
        let eps = T::of(EPSILON);
        for (((p, g), m), v) in model
            .params_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.first_moments)
            .zip(&mut self.second_moments)
        {
            for (((p, &g), m), v) in p.values.iter_mut().zip(&g.values).zip(&mut m.values).zip(&mut v.values) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// `target <- tau * online + (1 - tau) * target`, elementwise.
pub fn soft_update<T: Scalar, M: Parameterized<T>>(online: &M, target: &mut M, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside (0, 1]")));
    }
    let src = online.params();
    let dst = target.params();
    if src.len() != dst.len() || src.iter().zip(&dst).any(|(a, b)| a.shape != b.shape) {
        return Err(Error::Architecture(
            "soft update between different architectures".into(),
        ));
    }
    let tau_t = T::of(tau);
    let keep = T::one() - tau_t;
    for (d, s) in target.params_mut().into_iter().zip(src) {
        if tau == 1.0 {
            d.values.copy_from_slice(&s.values);
        } else {
            for (d, &s) in d.values.iter_mut().zip(&s.values) {
                *d = tau_t * s + keep * *d;
            }
        }
    }
    Ok(())
}
