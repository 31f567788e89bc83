//! Dense `rows × cols × channels` arrays.
//!
//! Storage is row-major over (row, column, channel): the channel fiber at a
//! spatial location is a contiguous slice. Every flattening in the crate
//! (dense layers, descriptor harvesting, containers) uses this order.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("tensor dimensions must be positive, got {0}")]
    ZeroDimension(Shape3),
    #[error("data length {found} does not match shape {shape} (expected {expected})")]
    LengthMismatch {
        shape: Shape3,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape3 {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl Shape3 {
    pub const fn new(rows: usize, cols: usize, channels: usize) -> Self {
        Self { rows, cols, channels }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of spatial locations, `rows · cols`.
    pub const fn locations(&self) -> usize {
        self.rows * self.cols
    }
}

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.rows, self.cols, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    shape: Shape3,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn new(rows: usize, cols: usize, channels: usize, data: Vec<f32>) -> Result<Self, TensorError> {
        let shape = Shape3::new(rows, cols, channels);
        if rows == 0 || cols == 0 || channels == 0 {
            return Err(TensorError::ZeroDimension(shape));
        }
        if data.len() != shape.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected: shape.len(),
                found: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Result<Self, TensorError> {
        Self::new(rows, cols, channels, vec![0.0; rows * cols * channels])
    }

    pub fn filled(rows: usize, cols: usize, channels: usize, value: f32) -> Result<Self, TensorError> {
        Self::new(rows, cols, channels, vec![value; rows * cols * channels])
    }

    /// Builds a tensor by evaluating `f(row, col, channel)` in storage order.
    pub fn from_fn<F>(rows: usize, cols: usize, channels: usize, mut f: F) -> Result<Self, TensorError>
    where
        F: FnMut(usize, usize, usize) -> f32,
    {
        let mut data = Vec::with_capacity(rows * cols * channels);
        for r in 0..rows {
            for c in 0..cols {
                for k in 0..channels {
                    data.push(f(r, c, k));
                }
            }
        }
        Self::new(rows, cols, channels, data)
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    #[inline]
    pub fn offset(&self, row: usize, col: usize, channel: usize) -> usize {
        debug_assert!(row < self.shape.rows && col < self.shape.cols && channel < self.shape.channels);
        (row * self.shape.cols + col) * self.shape.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[self.offset(row, col, channel)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f32) {
        let i = self.offset(row, col, channel);
        self.data[i] = value;
    }

    /// The channel fiber `x_ij` at one spatial location.
    #[inline]
    pub fn fiber(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.shape.cols + col) * self.shape.channels;
        &self.data[start..start + self.shape.channels]
    }

    /// All channel fibers in scan order (row-major over locations).
    pub fn fibers(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.shape.channels)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}
