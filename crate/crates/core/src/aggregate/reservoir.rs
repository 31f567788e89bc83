use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AggregateError, DescriptorSet};

/// Default number of descriptors retained per layer.
pub const DEFAULT_CAPACITY: usize = 200_000;

/// Uniform fixed-size sample of the descriptors of one layer, pooled over a
/// stream of images (reservoir sampling, Algorithm R). Deterministic given
/// the seed and the order in which descriptor sets are presented.
#[derive(Debug, Clone)]
pub struct DescriptorSample {
    layer: usize,
    dim: usize,
    capacity: usize,
    seed: u64,
    seen: u64,
    data: Vec<f32>,
    rng: ChaCha8Rng,
}

impl DescriptorSample {
    pub fn new(layer: usize, dim: usize, capacity: usize, seed: u64) -> Self {
        Self {
            layer,
            dim,
            capacity,
            seed,
            seen: 0,
            data: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A sample holding exactly `points` (row-major, `dim` wide). Used for
    /// training directly on a known point set.
    pub fn from_points(layer: usize, dim: usize, points: Vec<f32>) -> Result<Self, AggregateError> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(AggregateError::DimMismatch {
                expected: dim,
                found: points.len(),
            });
        }
        let n = points.len() / dim;
        Ok(Self {
            layer,
            dim,
            capacity: n,
            seed: 0,
            seen: n as u64,
            data: points,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    /// Offers every descriptor of `set` to the reservoir.
    pub fn extend(&mut self, set: &DescriptorSet) -> Result<(), AggregateError> {
        if set.dim() != self.dim {
            return Err(AggregateError::DimMismatch {
                expected: self.dim,
                found: set.dim(),
            });
        }
        for x in set.iter() {
            self.offer(x);
        }
        Ok(())
    }

    fn offer(&mut self, x: &[f32]) {
        self.seen += 1;
        if self.len() < self.capacity {
            self.data.extend_from_slice(x);
        } else {
            let j = self.rng.random_range(0..self.seen);
            if j < self.capacity as u64 {
                let j = j as usize;
                self.data[j * self.dim..(j + 1) * self.dim].copy_from_slice(x);
            }
        }
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Descriptors offered so far.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f32] {
        &self.data
    }
}
