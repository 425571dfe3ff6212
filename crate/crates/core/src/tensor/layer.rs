//! Layer descriptors and their shape/parameter algebra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Normalization,
    Conv2D,
    SeparableConv2D,
    Flatten,
    Dense,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Normalization => "Normalization",
            LayerKind::Conv2D => "Conv2D",
            LayerKind::SeparableConv2D => "SeparableConv2D",
            LayerKind::Flatten => "Flatten",
            LayerKind::Dense => "Dense",
        }
    }

    pub fn is_convolutional(self) -> bool {
        matches!(self, LayerKind::Conv2D | LayerKind::SeparableConv2D)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Padding {
    Valid,
    /// Zero padding so that `out = ceil(in / stride)`; odd remainders go to
    /// the bottom/right edge.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

/// One row of a network table.
///
/// For `Dense`, `in_channels`/`out_channels` are the input and output
/// feature lengths. `Flatten` and `Normalization` carry no parameters and
/// pass `in_channels` through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: Padding,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv2d(
        kernel: usize,
        stride: usize,
        padding: Padding,
        in_channels: usize,
        out_channels: usize,
    ) -> Self {
        Self {
            kind: LayerKind::Conv2D,
            kernel: (kernel, kernel),
            stride: (stride, stride),
            padding,
            in_channels,
            out_channels,
            activation: Activation::Relu,
        }
    }

    pub fn separable(
        kernel: usize,
        stride: usize,
        padding: Padding,
        in_channels: usize,
        out_channels: usize,
    ) -> Self {
        Self {
            kind: LayerKind::SeparableConv2D,
            ..Self::conv2d(kernel, stride, padding, in_channels, out_channels)
        }
    }

    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense,
            kernel: (1, 1),
            stride: (1, 1),
            padding: Padding::Valid,
            in_channels: inputs,
            out_channels: outputs,
            activation,
        }
    }

    pub fn flatten(channels: usize) -> Self {
        Self {
            kind: LayerKind::Flatten,
            kernel: (1, 1),
            stride: (1, 1),
            padding: Padding::Valid,
            in_channels: channels,
            out_channels: channels,
            activation: Activation::Linear,
        }
    }

    pub fn normalization(channels: usize) -> Self {
        Self {
            kind: LayerKind::Normalization,
            ..Self::flatten(channels)
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    /// Shapes of this layer's weight tensors, in storage order.
    ///
    /// Conv: `[(kh, kw, cin, cout), (cout)]`; separable: depthwise
    /// `(kh, kw, cin)`, pointwise `(1, 1, cin, cout)`, bias `(cout)`;
    /// dense: `[(in, out), (out)]`.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let (kh, kw) = self.kernel;
        let (cin, cout) = (self.in_channels, self.out_channels);
        match self.kind {
            LayerKind::Conv2D => vec![vec![kh, kw, cin, cout], vec![cout]],
            LayerKind::SeparableConv2D => {
                vec![vec![kh, kw, cin], vec![1, 1, cin, cout], vec![cout]]
            }
            LayerKind::Dense => vec![vec![cin, cout], vec![cout]],
            LayerKind::Flatten | LayerKind::Normalization => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        let (kh, kw) = self.kernel;
        let (cin, cout) = (self.in_channels, self.out_channels);
        match self.kind {
            LayerKind::Conv2D => kh * kw * cin * cout + cout,
            LayerKind::SeparableConv2D => kh * kw * cin + cin * cout + cout,
            LayerKind::Dense => cin * cout + cout,
            LayerKind::Flatten | LayerKind::Normalization => 0,
        }
    }

    /// Shape produced by this layer for a `(h, w, c)` input. Flatten and
    /// dense layers report `(1, 1, n)`.
    pub fn output_shape(&self, (h, w, c): (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        match self.kind {
            LayerKind::Dense => {
                if h * w * c != self.in_channels {
                    return Err(Error::shape(format!(
                        "dense expects {} inputs, got {}",
                        self.in_channels,
                        h * w * c
                    )));
                }
                return Ok((1, 1, self.out_channels));
            }
            LayerKind::Flatten => return Ok((1, 1, h * w * c)),
            _ => {}
        }
        if c != self.in_channels {
            return Err(Error::shape(format!(
                "{} expects {} input channels, got {c}",
                self.kind.name(),
                self.in_channels
            )));
        }
        if self.kind == LayerKind::Normalization {
            return Ok((h, w, c));
        }
        let oh = axis_output(h, self.kernel.0, self.stride.0, self.padding, "height")?;
        let ow = axis_output(w, self.kernel.1, self.stride.1, self.padding, "width")?;
        Ok((oh, ow, self.out_channels))
    }

    /// Multiply-accumulate count of one forward pass from `input`.
    pub fn mac_count(&self, input: (usize, usize, usize)) -> Result<u64> {
        let (oh, ow, _) = self.output_shape(input)?;
        let (kh, kw) = self.kernel;
        let (cin, cout) = (self.in_channels as u64, self.out_channels as u64);
        let positions = (oh * ow) as u64;
        Ok(match self.kind {
            LayerKind::Conv2D => positions * (kh * kw) as u64 * cin * cout,
            LayerKind::SeparableConv2D => positions * ((kh * kw) as u64 * cin + cin * cout),
            LayerKind::Dense => cin * cout,
            LayerKind::Flatten | LayerKind::Normalization => 0,
        })
    }
}

/// Output extent along one axis.
pub fn axis_output(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
    axis: &'static str,
) -> Result<usize> {
    match padding {
        Padding::Valid => {
            if kernel > input {
                return Err(Error::Dimension {
                    axis,
                    kernel,
                    input,
                });
            }
            Ok((input - kernel) / stride + 1)
        }
        Padding::Same => Ok(input.div_ceil(stride)),
    }
}

/// Leading (top/left) zero padding for one axis. The remainder of an odd
/// total lands on the trailing edge.
pub fn leading_pad(input: usize, output: usize, kernel: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        Padding::Valid => 0,
        Padding::Same => {
            let needed = ((output - 1) * stride + kernel).saturating_sub(input);
            needed / 2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_conv_shape() {
        let l = LayerSpec::conv2d(5, 2, Padding::Valid, 1, 24);
        assert_eq!(l.output_shape((120, 160, 1)).unwrap(), (58, 78, 24));
    }

    #[test]
    fn pointwise_same_preserves_spatial() {
        let l = LayerSpec::conv2d(1, 1, Padding::Same, 24, 12);
        assert_eq!(l.output_shape((60, 80, 24)).unwrap(), (60, 80, 12));
    }

    #[test]
    fn separable_same_shape() {
        let l = LayerSpec::separable(5, 2, Padding::Same, 1, 24);
        assert_eq!(l.output_shape((120, 160, 1)).unwrap(), (60, 80, 24));
    }

    #[test]
    fn oversized_valid_kernel_is_dimension_error() {
        let l = LayerSpec::conv2d(5, 1, Padding::Valid, 3, 4);
        assert!(matches!(
            l.output_shape((4, 10, 3)),
            Err(Error::Dimension { axis: "height", .. })
        ));
    }

    #[test]
    fn channel_mismatch_rejected() {
        let l = LayerSpec::conv2d(3, 1, Padding::Same, 3, 4);
        assert!(l.output_shape((8, 8, 2)).is_err());
    }

    #[test]
    fn table_param_counts() {
        assert_eq!(LayerSpec::conv2d(5, 2, Padding::Valid, 1, 24).param_count(), 624);
        assert_eq!(LayerSpec::separable(5, 2, Padding::Same, 12, 48).param_count(), 924);
        assert_eq!(LayerSpec::separable(5, 2, Padding::Same, 1, 24).param_count(), 73);
        assert_eq!(LayerSpec::dense(10, 1, Activation::Linear).param_count(), 11);
        assert_eq!(LayerSpec::dense(2880, 100, Activation::Relu).param_count(), 288_100);
        assert_eq!(LayerSpec::flatten(64).param_count(), 0);
        assert_eq!(LayerSpec::normalization(1).param_count(), 0);
    }

    #[test]
    fn param_shapes_agree_with_count() {
        for l in [
            LayerSpec::conv2d(3, 1, Padding::Same, 4, 6),
            LayerSpec::separable(5, 2, Padding::Same, 12, 48),
            LayerSpec::dense(7, 3, Activation::Relu),
            LayerSpec::flatten(3),
        ] {
            let total: usize = l.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum();
            assert_eq!(total, l.param_count());
        }
    }

    #[test]
    fn same_padding_remainder_is_trailing() {
        // in 6, k 5, s 2 -> out 3, needs (3-1)*2+5-6 = 3 pad: 1 leading, 2 trailing.
        assert_eq!(leading_pad(6, 3, 5, 2, Padding::Same), 1);
        assert_eq!(leading_pad(7, 7, 3, 1, Padding::Same), 1);
        assert_eq!(leading_pad(8, 4, 1, 2, Padding::Same), 0);
    }
}
