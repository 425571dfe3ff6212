//! Elementwise ops and losses.

use super::{Activation, Scalar, Tensor};
use crate::error::{Error, Result};

/// Maps pixel intensities in `[0, 255]` onto `[-1, 1]`.
pub fn normalize<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let scale = T::from_f64_lossy(127.5);
    input.map(|x| x / scale - T::one())
}

/// Gradient of [`normalize`] with respect to its input.
pub fn normalize_backward<T: Scalar>(grad_out: &Tensor<T>) -> Tensor<T> {
    let scale = T::from_f64_lossy(127.5);
    grad_out.map(|g| g / scale)
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// ReLU gradient expressed through the forward *output* (`y > 0` ⇔ `x > 0`).
pub fn relu_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if output.shape() != grad_out.shape() {
        return Err(Error::shape("relu gradient shape differs from output"));
    }
    let mut g = grad_out.clone();
    activation_backward_inplace(Activation::Relu, output.data(), g.data_mut());
    Ok(g)
}

pub(crate) fn activate_inplace<T: Scalar>(activation: Activation, data: &mut [T]) {
    if activation == Activation::Relu {
        for v in data {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
    }
}

pub(crate) fn activation_backward_inplace<T: Scalar>(
    activation: Activation,
    output: &[T],
    grad: &mut [T],
) {
    if activation == Activation::Relu {
        for (g, &y) in grad.iter_mut().zip(output) {
            if y <= T::zero() {
                *g = T::zero();
            }
        }
    }
}

fn check_pair<T: Scalar>(pred: &[T], target: &[T]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if pred.len() != target.len() {
        return Err(Error::shape(format!(
            "prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

pub fn mse_loss<T: Scalar>(pred: &[T], target: &[T]) -> Result<T> {
    check_pair(pred, target)?;
    let n = T::from_usize(pred.len()).unwrap();
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum::<T>()
        / n)
}

/// `d mse / d pred`.
pub fn mse_grad<T: Scalar>(pred: &[T], target: &[T]) -> Result<Vec<T>> {
    check_pair(pred, target)?;
    let scale = T::from_f64_lossy(2.0) / T::from_usize(pred.len()).unwrap();
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| (p - t) * scale)
        .collect())
}

pub fn mae<T: Scalar>(pred: &[T], target: &[T]) -> Result<T> {
    check_pair(pred, target)?;
    let n = T::from_usize(pred.len()).unwrap();
    Ok(pred.iter().zip(target).map(|(&p, &t)| (p - t).abs()).sum::<T>() / n)
}
