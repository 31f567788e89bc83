use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::kernels::output_extent;
use crate::tensor::Shape3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    #[default]
    Relu,
    Softmax,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn lrn_window() -> usize {
    5
}
fn lrn_k() -> f64 {
    2.0
}
fn lrn_alpha() -> f64 {
    1e-4
}
fn lrn_beta() -> f64 {
    0.75
}

/// One entry of the sequential layer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv {
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        pad: usize,
        #[serde(default = "one")]
        groups: usize,
        out_channels: usize,
        #[serde(default = "yes")]
        relu: bool,
    },
    Lrn {
        #[serde(default = "lrn_window")]
        window: usize,
        #[serde(default = "lrn_k")]
        k: f64,
        #[serde(default = "lrn_alpha")]
        alpha: f64,
        #[serde(default = "lrn_beta")]
        beta: f64,
    },
    #[serde(rename = "maxpool")]
    MaxPool {
        size: usize,
        stride: usize,
    },
    Dense {
        out_units: usize,
        #[serde(default)]
        activation: Activation,
    },
    Softmax,
}

impl LayerSpec {
    pub fn is_dense(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Softmax)
    }

    pub fn is_parameterized(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Lrn { .. } => "lrn",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Softmax => "softmax",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl From<InputShape> for Shape3 {
    fn from(s: InputShape) -> Self {
        Shape3::new(s.rows, s.cols, s.channels)
    }
}

/// Declarative sequential network. Layer indices are 1-based in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureDescriptor {
    #[serde(default)]
    pub name: Option<String>,
    pub input: InputShape,
    #[serde(rename = "layer")]
    pub layers: Vec<LayerSpec>,
}

/// Expected shapes of a parameterized layer's weight and bias tensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamShapes {
    pub weights: Vec<usize>,
    pub biases: Vec<usize>,
}

pub fn weights_name(layer: usize) -> String {
    format!("layer{layer}.weights")
}

pub fn biases_name(layer: usize) -> String {
    format!("layer{layer}.biases")
}

impl ArchitectureDescriptor {
    pub fn from_toml_str(text: &str) -> Result<Self, NetworkError> {
        let desc: Self = toml::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        desc.shape_chain()?;
        Ok(desc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| NetworkError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("descriptor serializes")
    }

    /// The bundled 13-layer reference pipeline (input 224×224×3).
    pub fn reference() -> Self {
        Self::from_toml_str(include_str!("../../assets/arch/reference.toml")).expect("bundled descriptor is valid")
    }

    /// The bundled 4-layer descriptor used by the synthetic toy dataset.
    pub fn toy() -> Self {
        Self::from_toml_str(include_str!("../../assets/arch/toy4.toml")).expect("bundled descriptor is valid")
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Layer `l` (1-based).
    pub fn layer(&self, l: usize) -> Result<&LayerSpec, NetworkError> {
        l.checked_sub(1)
            .and_then(|i| self.layers.get(i))
            .ok_or(NetworkError::NoSuchLayer {
                layer: l,
                count: self.layers.len(),
            })
    }

    /// Number of layers preceding the first dense layer: the layers whose
    /// outputs are spatial grids of local descriptors.
    pub fn nondense_count(&self) -> usize {
        self.layers.iter().take_while(|l| !l.is_dense()).count()
    }

    /// Inferred shapes `[input, out_1, …, out_L]`.
    pub fn shape_chain(&self) -> Result<Vec<Shape3>, NetworkError> {
        let input: Shape3 = self.input.into();
        if input.is_empty() {
            return Err(NetworkError::InvalidShape {
                layer: 0,
                reason: format!("input shape {input} has a zero dimension"),
            });
        }
        if self.layers.is_empty() {
            return Err(NetworkError::Parse("descriptor declares no layers".into()));
        }
        let mut chain = Vec::with_capacity(self.layers.len() + 1);
        chain.push(input);
        for (i, spec) in self.layers.iter().enumerate() {
            let prev = *chain.last().unwrap();
            let next = next_shape(i + 1, spec, prev)?;
            chain.push(next);
        }
        Ok(chain)
    }

    /// Parameter tensor shapes for layer `l`, `None` for parameter-free layers.
    pub fn param_shapes(&self, l: usize) -> Result<Option<ParamShapes>, NetworkError> {
        let chain = self.shape_chain()?;
        let input = chain[l - 1];
        Ok(match self.layer(l)? {
            LayerSpec::Conv {
                kernel,
                groups,
                out_channels,
                ..
            } => Some(ParamShapes {
                weights: vec![*out_channels, *kernel, *kernel, input.channels / groups],
                biases: vec![*out_channels],
            }),
            LayerSpec::Dense { out_units, .. } => Some(ParamShapes {
                weights: vec![*out_units, input.len()],
                biases: vec![*out_units],
            }),
            _ => None,
        })
    }
}

fn next_shape(layer: usize, spec: &LayerSpec, prev: Shape3) -> Result<Shape3, NetworkError> {
    let invalid = |reason: String| NetworkError::InvalidShape { layer, reason };
    match *spec {
        LayerSpec::Conv {
            kernel,
            stride,
            pad,
            groups,
            out_channels,
            ..
        } => {
            if kernel == 0 || stride == 0 || groups == 0 || out_channels == 0 {
                return Err(invalid(
                    "conv kernel, stride, groups and out_channels must be positive".into(),
                ));
            }
            if !prev.channels.is_multiple_of(groups) || out_channels % groups != 0 {
                return Err(invalid(format!(
                    "channels {}->{out_channels} not divisible by {groups} groups",
                    prev.channels
                )));
            }
            let rows = output_extent(prev.rows, kernel, stride, pad);
            let cols = output_extent(prev.cols, kernel, stride, pad);
            match (rows, cols) {
                (Some(r), Some(c)) => Ok(Shape3::new(r, c, out_channels)),
                _ => Err(invalid(format!("{kernel}x{kernel} kernel does not fit a {prev} input"))),
            }
        }
        LayerSpec::Lrn { window, k, .. } => {
            if window == 0 || window % 2 == 0 {
                return Err(invalid(format!("LRN window must be positive and odd, got {window}")));
            }
            if k <= 0.0 {
                return Err(invalid(format!("LRN k must be positive, got {k}")));
            }
            Ok(prev)
        }
        LayerSpec::MaxPool { size, stride } => {
            if size == 0 || stride == 0 {
                return Err(invalid("pool size and stride must be positive".into()));
            }
            match (
                output_extent(prev.rows, size, stride, 0),
                output_extent(prev.cols, size, stride, 0),
            ) {
                (Some(r), Some(c)) => Ok(Shape3::new(r, c, prev.channels)),
                _ => Err(invalid(format!("{size}x{size} pool does not fit a {prev} input"))),
            }
        }
        LayerSpec::Dense { out_units, .. } => {
            if out_units == 0 {
                return Err(invalid("dense out_units must be positive".into()));
            }
            Ok(Shape3::new(1, 1, out_units))
        }
        LayerSpec::Softmax => Ok(Shape3::new(1, 1, prev.len())),
    }
}
