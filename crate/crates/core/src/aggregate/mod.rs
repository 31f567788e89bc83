//! Local descriptors, codebook and mixture training, and per-layer encoders.

use thiserror::Error;

use crate::container::ContainerError;

mod descriptors;
mod encode;
mod gmm;
mod hybrid;
mod kmeans;
pub mod persist;
mod reservoir;

pub use descriptors::{harvest, DescriptorSet};
pub use encode::{bow_encode, fv_encode, power_l2_normalize, FisherOptions, ResidualScaling};
pub use gmm::{gmm_train, EmReport, GmmConfig, GmmModel, MIN_VARIANCE, VARIANCE_FLOOR};
pub use hybrid::{
    append_fc, concat_layers, encode_layer, EncoderModel, HybridFeature, LayerFeature, LayerSubset, SegmentKind,
    SubsetStrategy,
};
pub use kmeans::{kmeans_train, Codebook, KmeansConfig, KmeansReport};
pub use reservoir::{DescriptorSample, DEFAULT_CAPACITY};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("descriptor dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("empty descriptor set")]
    EmptySet,
    #[error("{points} points cannot seed {required} clusters")]
    TooFewPoints { points: usize, required: usize },
    #[error("only {distinct} distinct points for {required} clusters")]
    TooFewDistinct { distinct: usize, required: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model is for layer {model} but descriptors come from layer {set}")]
    LayerMismatch { model: usize, set: usize },
    #[error("no feature for layer {0}")]
    MissingLayer(usize),
    #[error("layer {layer} output {shape} is not a 1x1 vector")]
    NotFlat { layer: usize, shape: String },
    #[error("invalid layer subset: {0}")]
    InvalidSubset(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
}
