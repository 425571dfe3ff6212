//! The two steering networks: original PilotNet (plain convolutions, valid
//! padding) and the reduced variant (depthwise separable convolutions with
//! 1×1 bottlenecks, same padding).

pub mod checkpoint;
pub mod network;
pub mod summary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FRAME_HEIGHT, FRAME_WIDTH};
use crate::tensor::{Activation, LayerKind, LayerSpec, Padding};

pub use checkpoint::{load, load_from_path, save, save_to_path, Checkpoint, CheckpointError};
pub use network::{Model, Trace};
pub use summary::{summarize, ModelSummary, SummaryRow};

pub const INPUT_SHAPE: (usize, usize, usize) = (FRAME_HEIGHT, FRAME_WIDTH, 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    Original,
    Modified,
}

impl Architecture {
    pub fn build(self) -> ModelSpec {
        match self {
            Architecture::Original => build_pilotnet_original(),
            Architecture::Modified => build_pilotnet_modified(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Original => "original",
            Architecture::Modified => "modified",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" | "pilotnet" => Ok(Architecture::Original),
            "modified" | "modified-pilotnet" => Ok(Architecture::Modified),
            other => Err(Error::config(format!("unknown model '{other}' (original|modified)"))),
        }
    }
}

/// `(height, width, channels)`.
pub type Hwc = (usize, usize, usize);

/// Ordered layer table plus input geometry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    /// Apply pixel normalization before the first layer. Set when the layer
    /// table has no explicit `Normalization` row.
    pub normalize_input: bool,
}

impl ModelSpec {
    /// Index of the single `Flatten` layer.
    pub fn flatten_index(&self) -> Option<usize> {
        self.layers.iter().position(|l| l.kind == LayerKind::Flatten)
    }

    /// Per-layer `(input, output)` shapes.
    pub fn shape_chain(&self) -> Result<Vec<(Hwc, Hwc)>> {
        let mut shape = self.input_shape;
        let mut chain = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let out = l.output_shape(shape)?;
            chain.push((shape, out));
            shape = out;
        }
        Ok(chain)
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let idx = self
            .flatten_index()
            .ok_or_else(|| Error::config("model has no Flatten layer"))?;
        Ok(self.shape_chain()?[idx].1 .2)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Structural checks: image layers, one flatten, dense tail, one output.
    pub fn validate(&self) -> Result<()> {
        let flat = self
            .flatten_index()
            .ok_or_else(|| Error::config("model has no Flatten layer"))?;
        for (i, l) in self.layers.iter().enumerate() {
            let ok = match i.cmp(&flat) {
                std::cmp::Ordering::Less => {
                    matches!(l.kind, LayerKind::Normalization | LayerKind::Conv2D | LayerKind::SeparableConv2D)
                }
                std::cmp::Ordering::Equal => true,
                std::cmp::Ordering::Greater => l.kind == LayerKind::Dense,
            };
            if !ok {
                return Err(Error::config(format!(
                    "layer {i} ({}) is out of place",
                    l.kind.name()
                )));
            }
        }
        let chain = self.shape_chain()?;
        if chain.last().map(|c| c.1) != Some((1, 1, 1)) {
            return Err(Error::config("model must end in a single output neuron"));
        }
        Ok(())
    }
}

fn with_tail(name: &str, mut layers: Vec<LayerSpec>, normalize_input: bool) -> ModelSpec {
    let mut shape = INPUT_SHAPE;
    for l in &layers {
        shape = l.output_shape(shape).expect("builder layer tables are consistent");
    }
    let (h, w, c) = shape;
    let flat = h * w * c;
    layers.extend([
        LayerSpec::flatten(c),
        LayerSpec::dense(flat, 100, Activation::Relu),
        LayerSpec::dense(100, 50, Activation::Relu),
        LayerSpec::dense(50, 10, Activation::Relu),
        LayerSpec::dense(10, 1, Activation::Linear),
    ]);
    ModelSpec {
        name: name.to_string(),
        input_shape: INPUT_SHAPE,
        layers,
        normalize_input,
    }
}

/// Normalization, five valid-padded convolutions, flatten, four dense layers.
pub fn build_pilotnet_original() -> ModelSpec {
    let v = Padding::Valid;
    with_tail(
        "pilotnet-original",
        vec![
            LayerSpec::normalization(1),
            LayerSpec::conv2d(5, 2, v, 1, 24),
            LayerSpec::conv2d(5, 2, v, 24, 36),
            LayerSpec::conv2d(5, 2, v, 36, 48),
            LayerSpec::conv2d(3, 1, v, 48, 64),
            LayerSpec::conv2d(3, 1, v, 64, 64),
        ],
        false,
    )
}

/// Five same-padded separable convolutions with two 1×1 bottlenecks,
/// flatten, four dense layers. Input normalization is preprocessing.
pub fn build_pilotnet_modified() -> ModelSpec {
    let s = Padding::Same;
    with_tail(
        "pilotnet-modified",
        vec![
            LayerSpec::separable(5, 2, s, 1, 24),
            LayerSpec::conv2d(1, 1, s, 24, 12),
            LayerSpec::separable(5, 2, s, 12, 48),
            LayerSpec::separable(5, 2, s, 48, 36),
            LayerSpec::conv2d(1, 1, s, 36, 18),
            LayerSpec::separable(5, 2, s, 18, 64),
            LayerSpec::separable(3, 1, s, 64, 36),
        ],
        true,
    )
}
