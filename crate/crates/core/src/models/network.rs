//! Executable model: a [`ModelSpec`] plus its weight tensors.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::tensor::ops::{mse_grad, mse_loss, normalize};
use crate::tensor::{backward_layer, forward_layer, Activation, LayerKind, Scalar, Tensor};

/// Forward activations of one sample. `activations[0]` is the
/// (preprocessed) input, `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone, Default)]
pub struct Trace<T = f32> {
    pub activations: Vec<Tensor<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    spec: ModelSpec,
    params: Vec<Tensor<T>>,
    ranges: Vec<Range<usize>>,
}

fn param_ranges(spec: &ModelSpec) -> Vec<Range<usize>> {
    let mut start = 0;
    spec.layers
        .iter()
        .map(|l| {
            let n = l.param_shapes().len();
            let r = start..start + n;
            start += n;
            r
        })
        .collect()
}

/// `(fan_in, fan_out)` of a weight tensor. A depthwise output sees only its
/// own channel's `kh·kw` taps.
fn fans(kind: LayerKind, slot: usize, shape: &[usize]) -> (usize, usize) {
    match (kind, shape) {
        (LayerKind::SeparableConv2D, [kh, kw, _]) if slot == 0 => (kh * kw, kh * kw),
        (_, [kh, kw, cin, cout]) => (kh * kw * cin, kh * kw * cout),
        (_, [fin, fout]) => (*fin, *fout),
        _ => (1, 1),
    }
}

impl<T: Scalar> Model<T> {
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let params = spec
            .layers
            .iter()
            .flat_map(|l| l.param_shapes())
            .map(|s| Tensor::zeros(&s))
            .collect();
        let ranges = param_ranges(&spec);
        Ok(Self {
            spec,
            params,
            ranges,
        })
    }

    /// He-uniform weights in front of a ReLU, Glorot-uniform elsewhere
    /// (depthwise stages, linear outputs), zero biases. Deterministic under
    /// `seed`.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (layer, range) in model.spec.layers.iter().zip(&model.ranges) {
            let n = range.len();
            for (slot, p) in model.params[range.clone()].iter_mut().enumerate() {
                // The last tensor of every parameterized layer is its bias.
                if slot + 1 == n {
                    continue;
                }
                let (fan_in, fan_out) = fans(layer.kind, slot, p.shape());
                let feeds_relu = slot + 2 == n && layer.activation == Activation::Relu;
                let limit = if feeds_relu {
                    (6.0 / fan_in as f64).sqrt()
                } else {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                };
                for w in p.data_mut() {
                    *w = T::from_f64_lossy(rng.random_range(-limit..limit));
                }
            }
        }
        Ok(model)
    }

    pub fn from_params(spec: ModelSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        spec.validate()?;
        let expected: Vec<Vec<usize>> = spec.layers.iter().flat_map(|l| l.param_shapes()).collect();
        if expected.len() != params.len()
            || expected.iter().zip(&params).any(|(s, p)| s.as_slice() != p.shape())
        {
            return Err(Error::shape(format!(
                "parameter tensors do not match the layer table of '{}'",
                spec.name
            )));
        }
        let ranges = param_ranges(&spec);
        Ok(Self {
            spec,
            params,
            ranges,
        })
    }

    /// Whether any layer before `layer` is trainable, i.e. whether its
    /// input gradient is needed.
    fn has_params_below(&self, layer: usize) -> bool {
        self.ranges[..layer].iter().any(|r| !r.is_empty())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn layer_params(&self, layer: usize) -> &[Tensor<T>] {
        &self.params[self.ranges[layer].clone()]
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            ranges: self.ranges.clone(),
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let (h, w, c) = self.spec.input_shape;
        if input.shape() != [h, w, c] {
            return Err(Error::shape(format!(
                "model '{}' expects input ({h}, {w}, {c}), got {:?}",
                self.spec.name,
                input.shape()
            )));
        }
        Ok(())
    }

    fn preprocess(&self, input: &Tensor<T>) -> Tensor<T> {
        if self.spec.normalize_input {
            normalize(input)
        } else {
            input.clone()
        }
    }

    /// Forward pass over raw pixel intensities, keeping activations of
    /// layers `0..=last` (all layers when `last` is `None`).
    pub fn trace(&self, input: &Tensor<T>, last: Option<usize>) -> Result<Trace<T>> {
        self.check_input(input)?;
        let end = last.map_or(self.spec.layers.len(), |l| l + 1);
        let mut activations = Vec::with_capacity(end + 1);
        activations.push(self.preprocess(input));
        for i in 0..end {
            let out = forward_layer(&self.spec.layers[i], self.layer_params(i), &activations[i])?;
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Steering output for raw pixel intensities `(h, w, 1)`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<T> {
        self.check_input(input)?;
        let mut x = self.preprocess(input);
        for (i, layer) in self.spec.layers.iter().enumerate() {
            x = forward_layer(layer, self.layer_params(i), &x)?;
        }
        Ok(x.data()[0])
    }

    /// Reverse-mode pass from `d loss / d output`, accumulating parameter
    /// gradients into `grads`.
    pub fn backward(&self, trace: &Trace<T>, grad_output: T, grads: &mut [Tensor<T>]) -> Result<()> {
        let n = self.spec.layers.len();
        if trace.activations.len() != n + 1 {
            return Err(Error::MissingCache);
        }
        if grads.len() != self.params.len() {
            return Err(Error::shape("gradient buffers do not match parameters"));
        }
        let mut grad = Tensor::new(vec![1], vec![grad_output])?;
        for i in (0..n).rev() {
            let range = self.ranges[i].clone();
            let gi = backward_layer(
                &self.spec.layers[i],
                &self.params[range.clone()],
                &trace.activations[i],
                &trace.activations[i + 1],
                &grad,
                &mut grads[range],
                self.has_params_below(i),
            )?;
            match gi {
                Some(g) => grad = g,
                None => break,
            }
        }
        Ok(())
    }

    /// Mean-squared-error loss of a batch and its parameter gradients
    /// (accumulated into `grads`). The dense tail runs as one batched
    /// matrix product; image layers run per sample.
    pub fn batch_loss_and_grads(
        &self,
        inputs: &[Tensor<T>],
        targets: &[T],
        grads: &mut [Tensor<T>],
    ) -> Result<T> {
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(Error::shape("batch inputs and targets differ in length"));
        }
        if grads.len() != self.params.len() {
            return Err(Error::shape("gradient buffers do not match parameters"));
        }
        let flat = self.spec.flatten_index().expect("validated spec has a flatten layer");
        let batch = inputs.len();

        let mut traces = Vec::with_capacity(batch);
        let mut features = Vec::new();
        for x in inputs {
            let t = if flat == 0 {
                self.check_input(x)?;
                Trace {
                    activations: vec![self.preprocess(x)],
                }
            } else {
                self.trace(x, Some(flat - 1))?
            };
            features.extend_from_slice(t.activations[flat].data());
            traces.push(t);
        }
        let width = features.len() / batch;

        let mut acts = vec![Tensor::new(vec![batch, width], features)?];
        for i in flat + 1..self.spec.layers.len() {
            let out = forward_layer(&self.spec.layers[i], self.layer_params(i), acts.last().unwrap())?;
            acts.push(out);
        }
        let pred = acts.last().unwrap().data().to_vec();
        let loss = mse_loss(&pred, targets)?;
        let mut grad = Tensor::new(vec![batch, 1], mse_grad(&pred, targets)?)?;

        for (k, i) in (flat + 1..self.spec.layers.len()).enumerate().rev() {
            let range = self.ranges[i].clone();
            grad = backward_layer(
                &self.spec.layers[i],
                &self.params[range.clone()],
                &acts[k],
                &acts[k + 1],
                &grad,
                &mut grads[range],
                true,
            )?
            .expect("input gradient requested");
        }

        for (s, trace) in traces.iter().enumerate() {
            let image_out = &trace.activations[flat];
            let mut g = Tensor::new(image_out.shape().to_vec(), grad.data()[s * width..(s + 1) * width].to_vec())?;
            for i in (0..flat).rev() {
                let range = self.ranges[i].clone();
                match backward_layer(
                    &self.spec.layers[i],
                    &self.params[range.clone()],
                    &trace.activations[i],
                    &trace.activations[i + 1],
                    &g,
                    &mut grads[range],
                    self.has_params_below(i),
                )? {
                    Some(next) => g = next,
                    None => break,
                }
            }
        }
        Ok(loss)
    }
}

impl Model<f32> {
    /// Steering angle for a camera frame. Not clamped.
    pub fn predict(&self, frame: &GrayFrame) -> Result<f32> {
        self.forward(&frame.to_tensor())
    }

    /// Post-activation maps of convolutional layer `layer_index` (an index
    /// into the layer table), each min-max scaled to `[0, 255]`. Constant
    /// maps scale to all-zero.
    pub fn feature_maps(&self, frame: &GrayFrame, layer_index: usize) -> Result<Vec<GrayFrame>> {
        let layer = self.spec.layers.get(layer_index).ok_or(Error::LayerIndex {
            index: layer_index,
            reason: "out of range",
        })?;
        if !layer.kind.is_convolutional() {
            return Err(Error::LayerIndex {
                index: layer_index,
                reason: "not a convolutional layer",
            });
        }
        let trace = self.trace(&frame.to_tensor(), Some(layer_index))?;
        let out = trace.activations.last().expect("non-empty trace");
        let (h, w, c) = out.hwc()?;
        let data = out.data();
        (0..c)
            .map(|ch| {
                let vals: Vec<f32> = (0..h * w).map(|p| data[p * c + ch]).collect();
                let lo = vals.iter().copied().fold(f32::INFINITY, f32::min);
                let hi = vals.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let span = hi - lo;
                let pixels = vals
                    .iter()
                    .map(|&v| {
                        if span > 0.0 {
                            ((v - lo) / span * 255.0).round() as u8
                        } else {
                            0
                        }
                    })
                    .collect();
                GrayFrame::new(w, h, pixels)
            })
            .collect()
    }
}
