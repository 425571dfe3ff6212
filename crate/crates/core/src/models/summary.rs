use std::fmt;

use serde::Serialize;

use super::ModelSpec;
use crate::error::Result;
use crate::tensor::LayerKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub kind: LayerKind,
    pub kernel: Option<(usize, usize)>,
    pub stride: Option<(usize, usize)>,
    /// Output channels; for Flatten the flattened length.
    pub output_channels: usize,
    pub output_shape: (usize, usize, usize),
    pub params: usize,
    pub macs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelSummary {
    pub name: String,
    pub rows: Vec<SummaryRow>,
    pub total_params: usize,
    pub flatten_len: usize,
    pub total_macs: u64,
}

pub fn summarize(spec: &ModelSpec) -> Result<ModelSummary> {
    let chain = spec.shape_chain()?;
    let mut rows = Vec::with_capacity(spec.layers.len());
    for (layer, &(input, output)) in spec.layers.iter().zip(&chain) {
        let spatial = layer.kind.is_convolutional();
        rows.push(SummaryRow {
            kind: layer.kind,
            kernel: spatial.then_some(layer.kernel),
            stride: spatial.then_some(layer.stride),
            output_channels: output.2,
            output_shape: output,
            params: layer.param_count(),
            macs: layer.mac_count(input)?,
        });
    }
    Ok(ModelSummary {
        name: spec.name.clone(),
        total_params: rows.iter().map(|r| r.params).sum(),
        total_macs: rows.iter().map(|r| r.macs).sum(),
        flatten_len: spec.flatten_len()?,
        rows,
    })
}

impl fmt::Display for ModelSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model: {}", self.name)?;
        writeln!(
            f,
            "{:<16} {:>7} {:>7} {:>9} {:>14} {:>10} {:>12}",
            "layer", "kernel", "stride", "channels", "output", "params", "macs"
        )?;
        let pair = |p: Option<(usize, usize)>| p.map_or("-".to_string(), |(a, b)| format!("{a}x{b}"));
        for r in &self.rows {
            let (h, w, c) = r.output_shape;
            writeln!(
                f,
                "{:<16} {:>7} {:>7} {:>9} {:>14} {:>10} {:>12}",
                r.kind.name(),
                pair(r.kernel),
                pair(r.stride),
                r.output_channels,
                format!("{h}x{w}x{c}"),
                r.params,
                r.macs
            )?;
        }
        writeln!(f, "flatten_len: {}", self.flatten_len)?;
        writeln!(f, "total_params: {}", self.total_params)?;
        write!(f, "total_macs: {}", self.total_macs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_pilotnet_modified, build_pilotnet_original};

    #[test]
    fn totals_and_reduction() {
        let o = summarize(&build_pilotnet_original()).unwrap();
        let m = summarize(&build_pilotnet_modified()).unwrap();
        assert_eq!(o.total_params, 801_419);
        assert_eq!(m.total_params, 303_180);
        let reduction = 1.0 - m.total_params as f64 / o.total_params as f64;
        assert!((reduction - 0.6217).abs() < 1e-4);
        assert!(m.total_macs < o.total_macs);
        assert_eq!(o.rows.iter().map(|r| r.params).sum::<usize>(), o.total_params);
    }

    #[test]
    fn flatten_row_has_no_params() {
        let o = summarize(&build_pilotnet_original()).unwrap();
        let flat = o.rows.iter().find(|r| r.kind == LayerKind::Flatten).unwrap();
        assert_eq!(flat.params, 0);
        assert_eq!(flat.output_channels, 6656);
    }

    #[test]
    fn macs_match_hand_formula() {
        let o = summarize(&build_pilotnet_original()).unwrap();
        // conv1: 58·78 positions × 25 taps × 1 × 24
        assert_eq!(o.rows[1].macs, 58 * 78 * 25 * 24);
        let m = summarize(&build_pilotnet_modified()).unwrap();
        // sep1: 60·80 positions × (25·1 + 1·24)
        assert_eq!(m.rows[0].macs, 60 * 80 * (25 + 24));
    }

    #[test]
    fn display_lists_total() {
        let text = summarize(&build_pilotnet_modified()).unwrap().to_string();
        assert!(text.contains("total_params: 303180"));
        assert!(text.contains("SeparableConv2D"));
    }
}
