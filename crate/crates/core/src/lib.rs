//! Hybrid image features built from convolutional-network layer outputs.
//!
//! The outputs of the non-dense layers of a convolutional network are read
//! as grids of densely extracted local descriptors. Each layer's descriptors
//! are aggregated with a Bag-of-Words histogram or a first-order Fisher
//! vector, and the per-layer features are concatenated (optionally followed
//! by the raw fully connected outputs) into a single image feature that is
//! classified with one-vs-all linear SVMs.

pub mod aggregate;
pub mod container;
pub mod dataset;
pub mod eval;
pub mod kernels;
pub mod network;
pub mod svm;
pub mod tensor;

pub use container::{ContainerError, TensorRecord, WeightContainer};
pub use network::{random_weights, validate_and_bind, ArchitectureDescriptor, NetworkModel, TapSet};
pub use tensor::{Shape3, Tensor3};
