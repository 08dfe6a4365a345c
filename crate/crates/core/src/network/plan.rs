//! Network architecture description.
//!
//! A plan is an input shape (rows x columns x channels, here scales x time
//! samples x montage channels) followed by a layer list: a convolutional
//! stack, then dense layers, then the output layer. Convolutions use same
//! padding and stride 1, so only pooling changes the plane size.

use crate::error::{PipelineError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv { filters: usize, kernel: (usize, usize), dropout: f64 },
    Pool { factor: (usize, usize) },
    Dense { units: usize, dropout: f64 },
    Output { classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    /// rows x columns x channels.
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
}

impl LayerPlan {
    /// The stack used on wavelet tensors: one-second epochs at 256 Hz over
    /// ten scales and 22 channels, ending in a 100-unit feature layer.
    pub fn wavelet_default() -> Self {
        Self {
            input: (10, 256, 22),
            layers: vec![
                LayerSpec::Conv { filters: 64, kernel: (3, 3), dropout: 0.25 },
                LayerSpec::Conv { filters: 64, kernel: (3, 3), dropout: 0.25 },
                LayerSpec::Pool { factor: (1, 4) },
                LayerSpec::Conv { filters: 50, kernel: (3, 3), dropout: 0.25 },
                LayerSpec::Conv { filters: 40, kernel: (3, 3), dropout: 0.25 },
                LayerSpec::Pool { factor: (2, 4) },
                LayerSpec::Conv { filters: 32, kernel: (2, 2), dropout: 0.25 },
                LayerSpec::Conv { filters: 20, kernel: (2, 2), dropout: 0.25 },
                LayerSpec::Pool { factor: (1, 4) },
                LayerSpec::Dense { units: 250, dropout: 0.5 },
                LayerSpec::Dense { units: 100, dropout: 0.5 },
                LayerSpec::Output { classes: 3 },
            ],
        }
    }

    /// The same stack on standardized raw samples: a single input plane, so
    /// every pool is (1, 4).
    pub fn raw_default() -> Self {
        Self {
            input: (1, 256, 22),
            layers: vec![
                LayerSpec::Conv { filters: 64, kernel: (3, 3), dropout: 0.25 },
                LayerSpec::Conv { filters: 64, kernel: (3, 3), dropout: 0.25 },
                LayerSpec::Pool { factor: (1, 4) },
                LayerSpec::Conv { filters: 50, kernel: (3, 3), dropout: 0.25 },
                LayerSpec::Conv { filters: 40, kernel: (3, 3), dropout: 0.25 },
                LayerSpec::Pool { factor: (1, 4) },
                LayerSpec::Conv { filters: 32, kernel: (2, 2), dropout: 0.25 },
                LayerSpec::Conv { filters: 20, kernel: (2, 2), dropout: 0.25 },
                LayerSpec::Pool { factor: (1, 4) },
                LayerSpec::Dense { units: 250, dropout: 0.5 },
                LayerSpec::Dense { units: 100, dropout: 0.5 },
                LayerSpec::Output { classes: 3 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (rows, cols, channels) = self.input;
        if rows == 0 || cols == 0 || channels == 0 {
            return Err(PipelineError::InvalidParameter("empty input shape".into()));
        }
        match self.layers.last() {
            Some(LayerSpec::Output { .. }) => {}
            _ => {
                return Err(PipelineError::InvalidParameter(
                    "plan must end with the output layer".into(),
                ))
            }
        }
        let outputs = self
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Output { .. }))
            .count();
        if outputs != 1 {
            return Err(PipelineError::InvalidParameter(format!(
                "plan has {outputs} output layers"
            )));
        }

        let mut dims = self.input;
        let mut seen_dense = false;
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv { filters, kernel, dropout } => {
                    if seen_dense {
                        return Err(PipelineError::InvalidParameter(
                            "convolution after a dense layer".into(),
                        ));
                    }
                    if *filters == 0 || kernel.0 == 0 || kernel.1 == 0 {
                        return Err(PipelineError::InvalidParameter(
                            "convolution needs filters and a nonempty kernel".into(),
                        ));
                    }
                    check_dropout(*dropout)?;
                    dims.2 = *filters;
                }
                LayerSpec::Pool { factor } => {
                    if seen_dense {
                        return Err(PipelineError::InvalidParameter(
                            "pooling after a dense layer".into(),
                        ));
                    }
                    if factor.0 == 0 || factor.1 == 0 {
                        return Err(PipelineError::InvalidParameter("zero pool factor".into()));
                    }
                    if dims.0 % factor.0 != 0 || dims.1 % factor.1 != 0 {
                        return Err(PipelineError::InvalidParameter(format!(
                            "pool {factor:?} does not divide plane {}x{}",
                            dims.0, dims.1
                        )));
                    }
                    dims.0 /= factor.0;
                    dims.1 /= factor.1;
                }
                LayerSpec::Dense { units, dropout } => {
                    if *units == 0 {
                        return Err(PipelineError::InvalidParameter("empty dense layer".into()));
                    }
                    check_dropout(*dropout)?;
                    seen_dense = true;
                }
                LayerSpec::Output { classes } => {
                    if *classes < 2 {
                        return Err(PipelineError::InvalidParameter(format!(
                            "{classes} output classes"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Plane dimensions entering each conv/pool layer, then the flatten point.
    fn walk_stack(&self) -> Vec<(usize, usize, usize)> {
        let mut dims = self.input;
        let mut trace = vec![dims];
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv { filters, .. } => dims.2 = *filters,
                LayerSpec::Pool { factor } => {
                    dims.0 /= factor.0;
                    dims.1 /= factor.1;
                }
                _ => break,
            }
            trace.push(dims);
        }
        trace
    }

    /// Plane shape at the flatten point.
    pub fn feature_dims(&self) -> (usize, usize, usize) {
        *self.walk_stack().last().unwrap()
    }

    /// Inputs to the first dense layer.
    pub fn flattened_fan_in(&self) -> usize {
        let (r, c, ch) = self.feature_dims();
        r * c * ch
    }

    /// Width of the last dense layer before the output, the feature vector
    /// used downstream. Falls back to the flatten size when the plan has no
    /// dense layer.
    pub fn penultimate_units(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Dense { units, .. } => Some(*units),
                _ => None,
            })
            .last()
            .unwrap_or_else(|| self.flattened_fan_in())
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Output { classes }) => *classes,
            _ => 0,
        }
    }
}

fn check_dropout(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(PipelineError::InvalidParameter(format!(
            "dropout rate {rate} must lie in [0, 1)"
        )));
    }
    Ok(())
}
