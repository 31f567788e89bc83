use super::AggregateError;
use crate::tensor::Tensor3;

/// The local descriptors harvested from one layer output of one image: one
/// channel fiber per spatial location, in row-major scan order.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    layer: usize,
    dim: usize,
    data: Vec<f32>,
}

/// Reads every channel fiber `x_ij` of a layer output as a local descriptor.
pub fn harvest(layer_output: &Tensor3, layer: usize) -> DescriptorSet {
    DescriptorSet {
        layer,
        dim: layer_output.channels(),
        data: layer_output.as_slice().to_vec(),
    }
}

impl DescriptorSet {
    /// Builds a set from a flat row-major buffer of `len / dim` descriptors.
    pub fn from_flat(layer: usize, dim: usize, data: Vec<f32>) -> Result<Self, AggregateError> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(AggregateError::DimMismatch {
                expected: dim,
                found: data.len(),
            });
        }
        Ok(Self { layer, dim, data })
    }

    pub fn from_vectors(layer: usize, vectors: &[Vec<f32>]) -> Result<Self, AggregateError> {
        let dim = vectors.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            if v.len() != dim {
                return Err(AggregateError::DimMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        Ok(Self { layer, dim, data })
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of descriptors (`M`).
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }
}
