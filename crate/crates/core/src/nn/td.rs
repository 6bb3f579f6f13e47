//! Temporal-difference targets and the squared TD loss.

use std::cmp::Ordering;

use ndarray::Array2;

use super::tensor::{Grads, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A differentiable action-value function.
///
/// `q_values` returns one row per sample. For recurrent models a sample is
/// one sequence position, so rows are ordered sequence-major.
pub trait QModel<T: Scalar>: Parameterized<T> + Clone {
    type Input;

    fn action_count(&self) -> usize;

    fn q_values(&self, input: &Self::Input) -> Result<Array2<T>>;

    /// Mean squared TD error over samples on the taken actions, with
    /// gradients for every parameter tensor.
    fn loss_and_grads(&self, input: &Self::Input, actions: &[usize], targets: &[T]) -> Result<(T, Grads<T>)>;

    fn loss(&self, input: &Self::Input, actions: &[usize], targets: &[T]) -> Result<T> {
        let q = self.q_values(input)?;
        Ok(td_loss_gradient(&q, actions, targets)?.0)
    }

    fn same_architecture(&self, other: &Self) -> bool;
}

/// `y_k = r_k` for terminal transitions, else `r_k + gamma * max_a' q_next[k, a']`.
pub fn td_targets<T: Scalar>(next_q: &Array2<T>, rewards: &[f64], dones: &[bool], gamma: f64) -> Result<Vec<T>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1]")));
    }
    if rewards.is_empty() {
        return Err(Error::Underfull("empty transition batch".into()));
    }
    if rewards.len() != dones.len() || next_q.nrows() != rewards.len() {
        return Err(Error::Shape {
            context: "td_targets",
            expected: vec![rewards.len()],
            actual: vec![next_q.nrows(), dones.len()],
        });
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("reward"));
    }
    let g = T::of(gamma);
    let targets: Vec<T> = rewards
        .iter()
        .zip(dones)
        .zip(next_q.rows())
        .map(|((&r, &done), row)| {
            let r = T::of(r);
            if done {
                r
            } else {
                let best = row.iter().copied().fold(T::neg_infinity(), T::max);
                r + g * best
            }
        })
        .collect();
    if targets.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("td target"));
    }
    Ok(targets)
}

/// Loss `mean_k (y_k - q[k, a_k])^2` and its gradient w.r.t. `q`.
pub fn td_loss_gradient<T: Scalar>(q: &Array2<T>, actions: &[usize], targets: &[T]) -> Result<(T, Array2<T>)> {
    let n = q.nrows();
    if actions.len() != n || targets.len() != n {
        return Err(Error::Shape {
            context: "td_loss",
            expected: vec![n],
            actual: vec![actions.len(), targets.len()],
        });
    }
    let count = q.ncols();
    if let Some(&a) = actions.iter().find(|&&a| a >= count) {
        return Err(Error::InvalidAction { action: a, count });
    }
    let scale = T::one() / T::of(n as f64);
    let two = T::of(2.0);
    let mut dq = Array2::zeros(q.raw_dim());
    let mut loss = T::zero();
    for (k, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let err = q[[k, a]] - y;
        loss += err * err;
        dq[[k, a]] = two * err * scale;
    }
    Ok((loss * scale, dq))
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: impl IntoIterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v.partial_cmp(&b) != Some(Ordering::Greater) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map_or(0, |(i, _)| i)
}
