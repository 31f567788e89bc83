//! Image manifests and input preprocessing.

use std::io;

use thiserror::Error;

mod manifest;
mod preprocess;

pub use manifest::{parse_manifest, Manifest, Record, Split};
pub use preprocess::{
    load_and_preprocess, load_mean, preprocess_rgb, resize_bilinear, ChannelOrder, PreprocessSpec, ResizeMode,
    MEAN_TENSOR,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest has no records")]
    NoRecords,
    #[error("manifest line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("manifest line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("manifest line {line}: duplicate path `{path}` (first seen on line {first})")]
    DuplicatePath { line: usize, path: String, first: usize },
    #[error("cannot read image {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("cannot decode image {path}: {reason}")]
    Decode { path: String, reason: String },
    #[error("invalid preprocessing: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Container(#[from] crate::container::ContainerError),
}
