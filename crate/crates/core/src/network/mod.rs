//! Sequential convolutional network: descriptor, weight binding, forward
//! pass with tapped intermediate outputs, and receptive-field arithmetic.

mod arch;
mod receptive;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use arch::{biases_name, weights_name, Activation, ArchitectureDescriptor, InputShape, LayerSpec, ParamShapes};
pub use receptive::{receptive_field, SupportRule};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::container::{TensorRecord, WeightContainer};
use crate::kernels::{
    conv_forward, dense_forward, lrn_forward, maxpool_forward, softmax_tensor, ConvKernelBank, DenseWeights,
    KernelError, LrnSpec,
};
use crate::tensor::{Shape3, Tensor3};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("descriptor parse error: {0}")]
    Parse(String),
    #[error("layer {layer}: {reason}")]
    InvalidShape { layer: usize, reason: String },
    #[error("layer {layer} does not exist (network has {count} layers)")]
    NoSuchLayer { layer: usize, count: usize },
    #[error("layer {layer}: missing tensor `{name}`")]
    MissingTensor { layer: usize, name: String },
    #[error("layer {layer}: tensor `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        layer: usize,
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("input image is {found}, network expects {expected}")]
    InputShape { expected: Shape3, found: Shape3 },
    #[error("layer {layer} is a {kind} layer; no spatial support is defined")]
    NotSpatial { layer: usize, kind: &'static str },
    #[error("layer {layer}: {source}")]
    Kernel {
        layer: usize,
        #[source]
        source: KernelError,
    },
}

/// Layer indices whose outputs a forward pass returns.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TapSet(BTreeSet<usize>);

impl TapSet {
    pub fn new(
        layers: impl IntoIterator<Item = usize>,
        descriptor: &ArchitectureDescriptor,
    ) -> Result<Self, NetworkError> {
        let set: BTreeSet<usize> = layers.into_iter().collect();
        for &l in &set {
            descriptor.layer(l)?;
        }
        Ok(Self(set))
    }

    pub fn all(descriptor: &ArchitectureDescriptor) -> Self {
        Self((1..=descriptor.len()).collect())
    }

    pub fn contains(&self, layer: usize) -> bool {
        self.0.contains(&layer)
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone)]
enum BoundLayer {
    Conv {
        bank: ConvKernelBank,
        relu: bool,
    },
    Lrn(LrnSpec),
    MaxPool {
        size: usize,
        stride: usize,
    },
    Dense {
        weights: DenseWeights,
        activation: Activation,
    },
    Softmax,
}

/// A descriptor with shape-checked parameters bound to every layer.
/// Immutable once built; share it across threads freely.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    descriptor: ArchitectureDescriptor,
    shapes: Vec<Shape3>,
    layers: Vec<BoundLayer>,
}

/// Uniform random weights in `±√(6 / fan_in)` and zero biases for every
/// parameterized layer. Useful for smoke tests and synthetic runs.
pub fn random_weights(descriptor: &ArchitectureDescriptor, seed: u64) -> Result<WeightContainer, NetworkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for l in 1..=descriptor.len() {
        let Some(shapes) = descriptor.param_shapes(l)? else {
            continue;
        };
        let fan_in: usize = shapes.weights[1..].iter().product();
        let bound = (6.0 / fan_in as f64).sqrt() as f32;
        let count: usize = shapes.weights.iter().product();
        let values = (0..count).map(|_| rng.random_range(-bound..bound)).collect();
        let to_err = |e: crate::container::ContainerError| NetworkError::Parse(e.to_string());
        records.push(TensorRecord::new(weights_name(l), shapes.weights, values).map_err(to_err)?);
        let nb = shapes.biases[0];
        records.push(TensorRecord::new(biases_name(l), shapes.biases, vec![0.0; nb]).map_err(to_err)?);
    }
    WeightContainer::new(records).map_err(|e| NetworkError::Parse(e.to_string()))
}

/// Checks every parameterized layer's tensors against the descriptor and
/// binds them. Tensors are looked up as `layer<l>.weights` / `layer<l>.biases`.
pub fn validate_and_bind(
    descriptor: &ArchitectureDescriptor,
    container: &WeightContainer,
) -> Result<NetworkModel, NetworkError> {
    let shapes = descriptor.shape_chain()?;
    let mut layers = Vec::with_capacity(descriptor.len());
    for (i, spec) in descriptor.layers.iter().enumerate() {
        let l = i + 1;
        let input = shapes[i];
        let kernel_err = |source| NetworkError::Kernel { layer: l, source };
        let bound = match *spec {
            LayerSpec::Conv {
                kernel,
                stride,
                pad,
                groups,
                out_channels,
                relu,
            } => {
                let expected = descriptor.param_shapes(l)?.expect("conv has parameters");
                let (w, b) = fetch_params(container, l, &expected)?;
                let bank = ConvKernelBank::new(kernel, input.channels, out_channels, groups, stride, pad, w, b)
                    .map_err(kernel_err)?;
                BoundLayer::Conv { bank, relu }
            }
            LayerSpec::Lrn { window, k, alpha, beta } => {
                let spec = LrnSpec { window, k, alpha, beta };
                spec.validate().map_err(kernel_err)?;
                BoundLayer::Lrn(spec)
            }
            LayerSpec::MaxPool { size, stride } => BoundLayer::MaxPool { size, stride },
            LayerSpec::Dense { out_units, activation } => {
                let expected = descriptor.param_shapes(l)?.expect("dense has parameters");
                let (w, b) = fetch_params(container, l, &expected)?;
                let weights = DenseWeights::new(out_units, input.len(), w, b).map_err(kernel_err)?;
                BoundLayer::Dense { weights, activation }
            }
            LayerSpec::Softmax => BoundLayer::Softmax,
        };
        layers.push(bound);
    }
    Ok(NetworkModel {
        descriptor: descriptor.clone(),
        shapes,
        layers,
    })
}

fn fetch_params(
    container: &WeightContainer,
    layer: usize,
    expected: &ParamShapes,
) -> Result<(Vec<f32>, Vec<f32>), NetworkError> {
    let fetch = |name: String, shape: &[usize]| {
        let rec = container.get(&name).ok_or_else(|| NetworkError::MissingTensor {
            layer,
            name: name.clone(),
        })?;
        if rec.shape != shape {
            return Err(NetworkError::ShapeMismatch {
                layer,
                name,
                expected: shape.to_vec(),
                found: rec.shape.clone(),
            });
        }
        Ok(rec.values.clone())
    };
    let w = fetch(weights_name(layer), &expected.weights)?;
    let b = fetch(biases_name(layer), &expected.biases)?;
    Ok((w, b))
}

impl NetworkModel {
    pub fn descriptor(&self) -> &ArchitectureDescriptor {
        &self.descriptor
    }

    /// Inferred shapes `[input, out_1, …, out_L]`.
    pub fn shape_chain(&self) -> &[Shape3] {
        &self.shapes
    }

    pub fn input_shape(&self) -> Shape3 {
        self.shapes[0]
    }

    /// Runs the layers in order up to the highest tapped index and returns
    /// the outputs of the tapped layers.
    pub fn forward(&self, image: &Tensor3, taps: &TapSet) -> Result<BTreeMap<usize, Tensor3>, NetworkError> {
        if image.shape() != self.input_shape() {
            return Err(NetworkError::InputShape {
                expected: self.input_shape(),
                found: image.shape(),
            });
        }
        let mut outputs = BTreeMap::new();
        let Some(last) = taps.last() else {
            return Ok(outputs);
        };
        if last > self.layers.len() {
            return Err(NetworkError::NoSuchLayer {
                layer: last,
                count: self.layers.len(),
            });
        }
        let mut current: Option<Tensor3> = None;
        for (i, layer) in self.layers[..last].iter().enumerate() {
            let l = i + 1;
            let input = current.as_ref().unwrap_or(image);
            let out = apply(layer, input).map_err(|source| NetworkError::Kernel { layer: l, source })?;
            if taps.contains(l) {
                outputs.insert(l, out.clone());
            }
            current = Some(out);
        }
        Ok(outputs)
    }
}

fn apply(layer: &BoundLayer, input: &Tensor3) -> Result<Tensor3, KernelError> {
    match layer {
        BoundLayer::Conv { bank, relu } => conv_forward(input, bank, *relu),
        BoundLayer::Lrn(spec) => lrn_forward(input, spec),
        BoundLayer::MaxPool { size, stride } => maxpool_forward(input, *size, *stride),
        BoundLayer::Dense { weights, activation } => match activation {
            Activation::None => dense_forward(input, weights, false),
            Activation::Relu => dense_forward(input, weights, true),
            Activation::Softmax => softmax_tensor(&dense_forward(input, weights, false)?),
        },
        BoundLayer::Softmax => softmax_tensor(input),
    }
}
