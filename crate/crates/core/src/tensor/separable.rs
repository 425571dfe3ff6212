//! Depthwise separable convolution: a per-channel spatial filter (stride and
//! padding applied here, no bias) followed by a 1×1 channel mix with bias.

use super::conv::{project_rows, project_rows_backward, ConvGeometry};
use super::layer::{LayerKind, LayerSpec};
use super::ops::{activate_inplace, activation_backward_inplace};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn check_separable<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    depthwise: &Tensor<T>,
    pointwise: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<ConvGeometry> {
    if layer.kind != LayerKind::SeparableConv2D {
        return Err(Error::shape(format!(
            "{} is not a SeparableConv2D layer",
            layer.kind.name()
        )));
    }
    let shape = input.hwc()?;
    let (cin, cout) = (layer.in_channels, layer.out_channels);
    if shape.2 != cin {
        return Err(Error::shape(format!(
            "separable conv expects {cin} input channels, got {}",
            shape.2
        )));
    }
    if depthwise.shape() != [layer.kernel.0, layer.kernel.1, cin] {
        return Err(Error::shape(format!(
            "depthwise kernel shape {:?} does not match layer",
            depthwise.shape()
        )));
    }
    if pointwise.shape() != [1, 1, cin, cout] {
        return Err(Error::shape(format!(
            "pointwise kernel shape {:?} does not match layer",
            pointwise.shape()
        )));
    }
    if bias.shape() != [cout] {
        return Err(Error::shape("separable bias length differs from output channels"));
    }
    ConvGeometry::new(shape, layer.kernel, layer.stride, layer.padding)
}

/// Output columns whose tap `kx` lands inside the input row.
fn valid_columns(g: &ConvGeometry, kx: usize) -> std::ops::Range<usize> {
    let s = g.stride.1;
    let lo = g.pad_left.saturating_sub(kx).div_ceil(s);
    let hi = (g.in_w + g.pad_left).saturating_sub(kx).div_ceil(s).min(g.out_w);
    lo..hi.max(lo)
}

/// Per-channel spatial filtering. Output `(oh, ow, c)`.
pub fn depthwise_forward<T: Scalar>(input: &[T], g: &ConvGeometry, kernel: &[T]) -> Vec<T> {
    let c = g.channels;
    let (kh, kw) = g.kernel;
    let sx = g.stride.1;
    let mut out = vec![T::zero(); g.positions() * c];
    for oy in 0..g.out_h {
        let row_out = &mut out[oy * g.out_w * c..][..g.out_w * c];
        for ky in 0..kh {
            let Some(iy) = g.source(oy, ky, g.stride.0, g.pad_top, g.in_h) else {
                continue;
            };
            let row_in = &input[iy * g.in_w * c..][..g.in_w * c];
            for kx in 0..kw {
                let tap = &kernel[(ky * kw + kx) * c..][..c];
                let cols = valid_columns(g, kx);
                if c == 1 {
                    let k = tap[0];
                    let first = cols.start * sx + kx - g.pad_left;
                    let src = row_in[first..].iter().step_by(sx);
                    for (a, &x) in row_out[cols].iter_mut().zip(src) {
                        *a = *a + x * k;
                    }
                    continue;
                }
                for ox in cols {
                    let ix = ox * sx + kx - g.pad_left;
                    let acc = &mut row_out[ox * c..][..c];
                    for ((a, &x), &k) in acc.iter_mut().zip(&row_in[ix * c..][..c]).zip(tap) {
                        *a = *a + x * k;
                    }
                }
            }
        }
    }
    out
}

/// Accumulates the depthwise kernel gradient and, when requested, returns
/// the input gradient.
pub fn depthwise_backward<T: Scalar>(
    input: &[T],
    g: &ConvGeometry,
    kernel: &[T],
    grad_out: &[T],
    grad_kernel: &mut [T],
    want_input_grad: bool,
) -> Option<Vec<T>> {
    let c = g.channels;
    let (kh, kw) = g.kernel;
    let sx = g.stride.1;
    let mut grad_input = want_input_grad.then(|| vec![T::zero(); input.len()]);
    for oy in 0..g.out_h {
        let row_go = &grad_out[oy * g.out_w * c..][..g.out_w * c];
        for ky in 0..kh {
            let Some(iy) = g.source(oy, ky, g.stride.0, g.pad_top, g.in_h) else {
                continue;
            };
            let row_in = &input[iy * g.in_w * c..][..g.in_w * c];
            for kx in 0..kw {
                let t = (ky * kw + kx) * c;
                let cols = valid_columns(g, kx);
                let gk = &mut grad_kernel[t..][..c];
                if c == 1 {
                    let first = cols.start * sx + kx - g.pad_left;
                    let go = &row_go[cols.clone()];
                    let dot = row_in[first..].iter().step_by(sx).zip(go).fold(T::zero(), |a, (&x, &d)| a + x * d);
                    gk[0] = gk[0] + dot;
                    if let Some(gi) = grad_input.as_mut() {
                        let w = kernel[t];
                        let row_gi = &mut gi[iy * g.in_w..][..g.in_w];
                        for (gx, &d) in row_gi[first..].iter_mut().step_by(sx).zip(go) {
                            *gx = *gx + w * d;
                        }
                    }
                    continue;
                }
                for ox in cols.clone() {
                    let ix = ox * sx + kx - g.pad_left;
                    for ((gk, &x), &d) in gk.iter_mut().zip(&row_in[ix * c..][..c]).zip(&row_go[ox * c..][..c]) {
                        *gk = *gk + x * d;
                    }
                }
                if let Some(gi) = grad_input.as_mut() {
                    let k = &kernel[t..][..c];
                    let row_gi = &mut gi[iy * g.in_w * c..][..g.in_w * c];
                    for ox in cols {
                        let ix = ox * sx + kx - g.pad_left;
                        for ((gx, &w), &d) in row_gi[ix * c..][..c].iter_mut().zip(k).zip(&row_go[ox * c..][..c]) {
                            *gx = *gx + w * d;
                        }
                    }
                }
            }
        }
    }
    grad_input
}

pub fn separable_conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    depthwise: &Tensor<T>,
    pointwise: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = check_separable(input, layer, depthwise, pointwise, bias)?;
    let mid = depthwise_forward(input.data(), &g, depthwise.data());
    let cout = layer.out_channels;
    let mut out = project_rows(&mid, g.positions(), g.channels, pointwise.data(), cout, bias.data());
    activate_inplace(layer.activation, &mut out);
    Tensor::new(vec![g.out_h, g.out_w, cout], out)
}

/// Gradients of one separable convolution call.
#[derive(Debug, Clone)]
pub struct SeparableGrads<T> {
    pub input: Option<Tensor<T>>,
    pub depthwise: Tensor<T>,
    pub pointwise: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Backward pass; the depthwise intermediate is recomputed from `input`.
/// Parameter gradients accumulate into the provided buffers.
#[allow(clippy::too_many_arguments)]
pub fn separable_conv2d_backward_into<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    depthwise: &Tensor<T>,
    pointwise: &Tensor<T>,
    bias: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
    grads: [&mut [T]; 3],
    want_input_grad: bool,
) -> Result<Option<Tensor<T>>> {
    let g = check_separable(input, layer, depthwise, pointwise, bias)?;
    let out_shape = [g.out_h, g.out_w, layer.out_channels];
    if output.shape() != out_shape || grad_out.shape() != out_shape {
        return Err(Error::shape("separable output/gradient shape mismatch"));
    }
    let [gd, gp, gb] = grads;
    if gd.len() != depthwise.len() || gp.len() != pointwise.len() || gb.len() != bias.len() {
        return Err(Error::shape("separable gradient buffers mismatch"));
    }
    let mut dz = grad_out.data().to_vec();
    activation_backward_inplace(layer.activation, output.data(), &mut dz);

    let mid = depthwise_forward(input.data(), &g, depthwise.data());
    let grad_mid = project_rows_backward(
        &mid,
        g.positions(),
        g.channels,
        pointwise.data(),
        layer.out_channels,
        &dz,
        gp,
        gb,
        true,
    )
    .expect("rows gradient requested");
    let gi = depthwise_backward(input.data(), &g, depthwise.data(), &grad_mid, gd, want_input_grad);
    gi.map(|d| Tensor::new(input.shape().to_vec(), d)).transpose()
}

pub fn separable_conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    depthwise: &Tensor<T>,
    pointwise: &Tensor<T>,
    bias: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<SeparableGrads<T>> {
    let mut gd = Tensor::zeros(depthwise.shape());
    let mut gp = Tensor::zeros(pointwise.shape());
    let mut gb = Tensor::zeros(bias.shape());
    let gi = separable_conv2d_backward_into(
        input,
        layer,
        depthwise,
        pointwise,
        bias,
        output,
        grad_out,
        [gd.data_mut(), gp.data_mut(), gb.data_mut()],
        true,
    )?;
    Ok(SeparableGrads {
        input: gi,
        depthwise: gd,
        pointwise: gp,
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Activation, Padding};

    #[test]
    fn unit_depthwise_identity_pointwise_is_identity() {
        let c = 3;
        let layer = LayerSpec::separable(1, 1, Padding::Same, c, c).with_activation(Activation::Linear);
        let input = Tensor::from_fn(&[4, 6, c], |i| (i as f32 * 0.37).cos());
        let d = Tensor::filled(&[1, 1, c], 1.0);
        let p = Tensor::from_fn(&[1, 1, c, c], |i| if i / c == i % c { 1.0 } else { 0.0 });
        let b = Tensor::zeros(&[c]);
        let out = separable_conv2d_forward(&input, &layer, &d, &p, &b).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn first_modified_layer_has_73_params() {
        let layer = LayerSpec::separable(5, 2, Padding::Same, 1, 24);
        let shapes = layer.param_shapes();
        assert_eq!(shapes, vec![vec![5, 5, 1], vec![1, 1, 1, 24], vec![24]]);
        assert_eq!(layer.param_count(), 25 + 24 + 24);
    }

    #[test]
    fn wrong_pointwise_shape_rejected() {
        let layer = LayerSpec::separable(3, 1, Padding::Same, 2, 4);
        let input = Tensor::<f32>::zeros(&[5, 5, 2]);
        let r = separable_conv2d_forward(
            &input,
            &layer,
            &Tensor::zeros(&[3, 3, 2]),
            &Tensor::zeros(&[1, 1, 4, 2]),
            &Tensor::zeros(&[4]),
        );
        assert!(r.is_err());
    }
}
