//! Central finite-difference verification of analytic gradients.

use super::td::QModel;
use super::tensor::Grads;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A model input together with the actions and TD targets of a batch.
pub struct TdBatch<'a, T: Scalar, M: QModel<T>> {
    pub input: &'a M::Input,
    pub actions: &'a [usize],
    pub targets: &'a [T],
}

/// Errors above this at step `h` are re-measured at `h / 10`.
const RETRY_ABOVE: f64 = 1e-5;

/// Largest `|analytic - cd| / max(|analytic|, |cd|, floor)` over every
/// parameter, where `cd` is the central difference with step `h`. The
/// floor keeps round-off on near-zero gradients from dominating.
///
/// A parameter whose error exceeds `RETRY_ABOVE` is re-measured at `h / 10` and keeps
/// the smaller error: a ReLU kink closer than `h` only distorts the larger
/// step, round-off mostly the smaller one, and a wrong analytic gradient
/// distorts both.
pub fn max_relative_error<T: Scalar, M: QModel<T>>(
    model: &M,
    batch: &TdBatch<'_, T, M>,
    analytic: &Grads<T>,
    h: f64,
    floor: f64,
) -> Result<f64> {
    if !(h > 0.0 && h <= 1e-3) {
        return Err(Error::InvalidArgument(format!("step {h} outside (0, 1e-3]")));
    }
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let counts: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    for (ti, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let a = analytic[ti].values[i].as_f64();
            let mut error = |step: f64| -> Result<f64> {
                let step = T::of(step);
                let orig = probe.params()[ti].values[i];
                probe.params_mut()[ti].values[i] = orig + step;
                let plus = probe.loss(batch.input, batch.actions, batch.targets)?;
                probe.params_mut()[ti].values[i] = orig - step;
                let minus = probe.loss(batch.input, batch.actions, batch.targets)?;
                probe.params_mut()[ti].values[i] = orig;
                let cd = ((plus - minus) / (step + step)).as_f64();
                Ok((a - cd).abs() / a.abs().max(cd.abs()).max(floor))
            };
            let mut e = error(h)?;
            if e > RETRY_ABOVE {
                e = e.min(error(h / 10.0)?);
            }
            worst = worst.max(e);
        }
    }
    Ok(worst)
}

/// Computes analytic gradients and compares them to central differences.
pub fn finite_diff_check<T: Scalar, M: QModel<T>>(
    model: &M,
    batch: &TdBatch<'_, T, M>,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let (_, grads) = model.loss_and_grads(batch.input, batch.actions, batch.targets)?;
    max_relative_error(model, batch, &grads, h, floor)
}
