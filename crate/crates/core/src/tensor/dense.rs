//! Fully connected layer, `y = Wᵀx + b` with `W` stored `(inputs, outputs)`.
//!
//! Inputs may be a single vector `(inputs)` or a batch `(n, inputs)`.

use super::conv::{project_rows, project_rows_backward};
use super::layer::{LayerKind, LayerSpec};
use super::ops::{activate_inplace, activation_backward_inplace};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn rows_of<T: Scalar>(input: &Tensor<T>, layer: &LayerSpec) -> Result<usize> {
    if layer.kind != LayerKind::Dense {
        return Err(Error::shape(format!("{} is not a Dense layer", layer.kind.name())));
    }
    let (rows, cols) = match *input.shape() {
        [n] => (1, n),
        [r, n] => (r, n),
        _ => return Err(Error::shape(format!("dense input must be rank 1 or 2, got {:?}", input.shape()))),
    };
    if cols != layer.in_channels {
        return Err(Error::shape(format!(
            "dense expects {} inputs, got {cols}",
            layer.in_channels
        )));
    }
    Ok(rows)
}

fn check_params<T: Scalar>(layer: &LayerSpec, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<()> {
    if weights.shape() != [layer.in_channels, layer.out_channels] || bias.shape() != [layer.out_channels] {
        return Err(Error::shape(format!(
            "dense params {:?}/{:?} do not match {}→{}",
            weights.shape(),
            bias.shape(),
            layer.in_channels,
            layer.out_channels
        )));
    }
    Ok(())
}

fn output_shape<T: Scalar>(input: &Tensor<T>, rows: usize, outputs: usize) -> Vec<usize> {
    if input.rank() == 1 {
        vec![outputs]
    } else {
        vec![rows, outputs]
    }
}

pub fn dense_forward<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let rows = rows_of(input, layer)?;
    check_params(layer, weights, bias)?;
    let n = layer.out_channels;
    let mut out = project_rows(input.data(), rows, layer.in_channels, weights.data(), n, bias.data());
    activate_inplace(layer.activation, &mut out);
    Tensor::new(output_shape(input, rows, n), out)
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward_into<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
    grad_weights: &mut [T],
    grad_bias: &mut [T],
    want_input_grad: bool,
) -> Result<Option<Tensor<T>>> {
    let rows = rows_of(input, layer)?;
    check_params(layer, weights, bias)?;
    let expected = output_shape(input, rows, layer.out_channels);
    if output.shape() != expected.as_slice() || grad_out.shape() != expected.as_slice() {
        return Err(Error::shape("dense output/gradient shape mismatch"));
    }
    if grad_weights.len() != weights.len() || grad_bias.len() != bias.len() {
        return Err(Error::shape("dense gradient buffers mismatch"));
    }
    let mut dz = grad_out.data().to_vec();
    activation_backward_inplace(layer.activation, output.data(), &mut dz);
    project_rows_backward(
        input.data(),
        rows,
        layer.in_channels,
        weights.data(),
        layer.out_channels,
        &dz,
        grad_weights,
        grad_bias,
        want_input_grad,
    )
    .map(|d| Tensor::new(input.shape().to_vec(), d))
    .transpose()
}

/// Gradients of one dense call.
#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let mut gw = Tensor::zeros(weights.shape());
    let mut gb = Tensor::zeros(bias.shape());
    let gi = dense_backward_into(
        input,
        layer,
        weights,
        bias,
        output,
        grad_out,
        gw.data_mut(),
        gb.data_mut(),
        true,
    )?;
    Ok(DenseGrads {
        input: gi,
        weights: gw,
        bias: gb,
    })
}
