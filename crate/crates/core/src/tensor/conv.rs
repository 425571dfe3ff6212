//! Standard 2-D convolution via patch-matrix (im2col) reformulation.
//!
//! Layouts: input `(h, w, cin)`, kernel `(kh, kw, cin, cout)`, output
//! `(oh, ow, cout)`. A row of the patch matrix holds one receptive field in
//! `(ky, kx, ci)` order, which makes the kernel a `(kh·kw·cin) × cout`
//! matrix without any transposition.

use super::layer::{axis_output, leading_pad, LayerKind, LayerSpec, Padding};
use super::ops::{activate_inplace, activation_backward_inplace};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Resolved spatial geometry of one convolution call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub channels: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn new(
        (in_h, in_w, channels): (usize, usize, usize),
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Self> {
        if stride.0 == 0 || stride.1 == 0 || kernel.0 == 0 || kernel.1 == 0 {
            return Err(Error::shape("kernel and stride must be positive"));
        }
        let out_h = axis_output(in_h, kernel.0, stride.0, padding, "height")?;
        let out_w = axis_output(in_w, kernel.1, stride.1, padding, "width")?;
        Ok(Self {
            in_h,
            in_w,
            channels,
            out_h,
            out_w,
            kernel,
            stride,
            pad_top: leading_pad(in_h, out_h, kernel.0, stride.0, padding),
            pad_left: leading_pad(in_w, out_w, kernel.1, stride.1, padding),
        })
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn patch_len(&self) -> usize {
        self.kernel.0 * self.kernel.1 * self.channels
    }

    /// 1×1, stride 1, unpadded: the patch matrix is the input itself.
    fn is_pointwise(&self) -> bool {
        self.kernel == (1, 1) && self.stride == (1, 1) && self.pad_top == 0 && self.pad_left == 0
    }

    /// First input column of output column `ox` when all `kw` taps land
    /// inside the input, so the patch row is one contiguous run.
    #[inline]
    fn interior_column(&self, ox: usize) -> Option<usize> {
        let first = (ox * self.stride.1).checked_sub(self.pad_left)?;
        (first + self.kernel.1 <= self.in_w).then_some(first)
    }

    /// Input row/column for output row/column plus kernel tap, or `None`
    /// when the tap lands in zero padding.
    #[inline]
    pub fn source(&self, out: usize, tap: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        let pos = (out * stride + tap).checked_sub(pad)?;
        (pos < extent).then_some(pos)
    }
}

/// Unrolls every receptive field of `input` into a row of `cols`.
pub fn im2col<T: Scalar>(input: &[T], g: &ConvGeometry, cols: &mut [T]) {
    let (kh, kw) = g.kernel;
    let c = g.channels;
    let row_len = g.patch_len();
    debug_assert_eq!(cols.len(), g.positions() * row_len);
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = &mut cols[(oy * g.out_w + ox) * row_len..][..row_len];
            for ky in 0..kh {
                let dst = &mut row[ky * kw * c..][..kw * c];
                let Some(iy) = g.source(oy, ky, g.stride.0, g.pad_top, g.in_h) else {
                    dst.fill(T::zero());
                    continue;
                };
                if let Some(ix) = g.interior_column(ox) {
                    dst.copy_from_slice(&input[(iy * g.in_w + ix) * c..][..kw * c]);
                    continue;
                }
                for kx in 0..kw {
                    let cell = &mut dst[kx * c..][..c];
                    match g.source(ox, kx, g.stride.1, g.pad_left, g.in_w) {
                        Some(ix) => cell.copy_from_slice(&input[(iy * g.in_w + ix) * c..][..c]),
                        None => cell.fill(T::zero()),
                    }
                }
            }
        }
    }
}

/// Scatter-adds patch-matrix gradients back onto the input gradient.
pub fn col2im<T: Scalar>(cols: &[T], g: &ConvGeometry, grad_input: &mut [T]) {
    let (kh, kw) = g.kernel;
    let c = g.channels;
    let row_len = g.patch_len();
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = &cols[(oy * g.out_w + ox) * row_len..][..row_len];
            for ky in 0..kh {
                let Some(iy) = g.source(oy, ky, g.stride.0, g.pad_top, g.in_h) else {
                    continue;
                };
                if let Some(ix) = g.interior_column(ox) {
                    let dst = &mut grad_input[(iy * g.in_w + ix) * c..][..kw * c];
                    for (d, &s) in dst.iter_mut().zip(&row[ky * kw * c..][..kw * c]) {
                        *d = *d + s;
                    }
                    continue;
                }
                for kx in 0..kw {
                    if let Some(ix) = g.source(ox, kx, g.stride.1, g.pad_left, g.in_w) {
                        let dst = &mut grad_input[(iy * g.in_w + ix) * c..][..c];
                        let src = &row[(ky * kw + kx) * c..][..c];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                }
            }
        }
    }
}

fn check_conv<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<ConvGeometry> {
    if layer.kind != LayerKind::Conv2D {
        return Err(Error::shape(format!("{} is not a Conv2D layer", layer.kind.name())));
    }
    let shape = input.hwc()?;
    if shape.2 != layer.in_channels {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {}",
            layer.in_channels, shape.2
        )));
    }
    let expected = [layer.kernel.0, layer.kernel.1, layer.in_channels, layer.out_channels];
    if weights.shape() != expected {
        return Err(Error::shape(format!(
            "conv kernel shape {:?}, expected {expected:?}",
            weights.shape()
        )));
    }
    if bias.shape() != [layer.out_channels] {
        return Err(Error::shape("conv bias length differs from output channels"));
    }
    ConvGeometry::new(shape, layer.kernel, layer.stride, layer.padding)
}

/// Matrix multiply of a `(positions × k)` row-major operand with a `(k × n)`
/// row-major kernel, writing `(positions × n)` after broadcasting `bias`.
pub(crate) fn project_rows<T: Scalar>(
    rows: &[T],
    positions: usize,
    k: usize,
    kernel: &[T],
    n: usize,
    bias: &[T],
) -> Vec<T> {
    let mut out = Vec::with_capacity(positions * n);
    for _ in 0..positions {
        out.extend_from_slice(bias);
    }
    if k == 1 {
        // Outer product; a packed multiply is slower at this depth.
        for (o, &r) in out.chunks_exact_mut(n).zip(rows) {
            for (y, &w) in o.iter_mut().zip(kernel) {
                *y = *y + r * w;
            }
        }
        return out;
    }
    T::gemm(
        positions,
        k,
        n,
        T::one(),
        rows,
        (k as isize, 1),
        kernel,
        (n as isize, 1),
        T::one(),
        &mut out,
        (n as isize, 1),
    );
    out
}

/// Backward of [`project_rows`]: accumulates kernel and bias gradients and
/// optionally returns the gradient with respect to `rows`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn project_rows_backward<T: Scalar>(
    rows: &[T],
    positions: usize,
    k: usize,
    kernel: &[T],
    n: usize,
    grad_out: &[T],
    grad_kernel: &mut [T],
    grad_bias: &mut [T],
    want_rows_grad: bool,
) -> Option<Vec<T>> {
    // dK (k×n) += rowsᵀ (k×positions) · dY (positions×n)
    T::gemm(
        k,
        positions,
        n,
        T::one(),
        rows,
        (1, k as isize),
        grad_out,
        (n as isize, 1),
        T::one(),
        grad_kernel,
        (n as isize, 1),
    );
    for row in grad_out.chunks_exact(n) {
        for (b, &g) in grad_bias.iter_mut().zip(row) {
            *b = *b + g;
        }
    }
    want_rows_grad.then(|| {
        // dRows (positions×k) = dY (positions×n) · Kᵀ (n×k)
        let mut grad_rows = vec![T::zero(); positions * k];
        T::gemm(
            positions,
            n,
            k,
            T::one(),
            grad_out,
            (n as isize, 1),
            kernel,
            (1, n as isize),
            T::zero(),
            &mut grad_rows,
            (k as isize, 1),
        );
        grad_rows
    })
}

/// Cross-correlation with stride/padding, bias, and the layer activation.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let g = check_conv(input, layer, weights, bias)?;
    let cout = layer.out_channels;
    let mut out = if g.is_pointwise() {
        project_rows(input.data(), g.positions(), g.patch_len(), weights.data(), cout, bias.data())
    } else {
        let mut cols = vec![T::zero(); g.positions() * g.patch_len()];
        im2col(input.data(), &g, &mut cols);
        project_rows(&cols, g.positions(), g.patch_len(), weights.data(), cout, bias.data())
    };
    activate_inplace(layer.activation, &mut out);
    Tensor::new(vec![g.out_h, g.out_w, cout], out)
}

/// Gradients of one convolution call.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Backward pass given the forward `input`, post-activation `output`, and
/// the upstream gradient. Parameter gradients are accumulated into
/// `grad_weights` / `grad_bias`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward_into<T: Scalar>(
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
    let g = check_conv(input, layer, weights, bias)?;
    let out_shape = [g.out_h, g.out_w, layer.out_channels];
    if output.shape() != out_shape || grad_out.shape() != out_shape {
        return Err(Error::shape("conv output/gradient shape mismatch"));
    }
    if grad_weights.len() != weights.len() || grad_bias.len() != bias.len() {
        return Err(Error::shape("conv gradient buffers mismatch"));
    }
    let mut dz = grad_out.data().to_vec();
    activation_backward_inplace(layer.activation, output.data(), &mut dz);

    let (positions, k, n) = (g.positions(), g.patch_len(), layer.out_channels);
    let grad_input = if g.is_pointwise() {
        project_rows_backward(
            input.data(),
            positions,
            k,
            weights.data(),
            n,
            &dz,
            grad_weights,
            grad_bias,
            want_input_grad,
        )
    } else {
        let mut cols = vec![T::zero(); positions * k];
        im2col(input.data(), &g, &mut cols);
        project_rows_backward(
            &cols,
            positions,
            k,
            weights.data(),
            n,
            &dz,
            grad_weights,
            grad_bias,
            want_input_grad,
        )
        .map(|grad_cols| {
            let mut gi = vec![T::zero(); input.len()];
            col2im(&grad_cols, &g, &mut gi);
            gi
        })
    };
    grad_input
        .map(|d| Tensor::new(input.shape().to_vec(), d))
        .transpose()
}

/// Convenience wrapper returning fresh gradients.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &LayerSpec,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let mut gw = Tensor::zeros(weights.shape());
    let mut gb = Tensor::zeros(bias.shape());
    let gi = conv2d_backward_into(
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
    Ok(ConvGrads {
        input: gi,
        weights: gw,
        bias: gb,
    })
}
