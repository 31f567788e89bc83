//! Layer kernels used by the forward pass: convolution (+ReLU), local
//! response normalization, max-pooling, dense and softmax.
//!
//! Storage is `f32`; every reduction accumulates in `f64`.

use thiserror::Error;

use crate::tensor::{Shape3, Tensor3, TensorError};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("input has {found} channels, kernel expects {expected}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("window {window} with stride {stride} and pad {pad} leaves no output positions on a {input} input")]
    EmptyOutput {
        input: Shape3,
        window: usize,
        stride: usize,
        pad: usize,
    },
    #[error("dense layer expects {expected} inputs, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid kernel parameters: {0}")]
    InvalidParameters(String),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Output side length for a window sweep; `None` when no window fits.
pub fn output_extent(input: usize, window: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if window == 0 || stride == 0 || padded < window {
        return None;
    }
    Some((padded - window) / stride + 1)
}

/// Convolution weights for one layer.
///
/// Weights are laid out `[out_channel][kernel_row][kernel_col][in_channel_within_group]`,
/// matching the tensor storage order so a kernel row dots directly with an
/// input patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernelBank {
    kernel_size: usize,
    in_channels: usize,
    out_channels: usize,
    groups: usize,
    stride: usize,
    pad: usize,
    weights: Vec<f32>,
    biases: Vec<f32>,
}

impl ConvKernelBank {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kernel_size: usize,
        in_channels: usize,
        out_channels: usize,
        groups: usize,
        stride: usize,
        pad: usize,
        weights: Vec<f32>,
        biases: Vec<f32>,
    ) -> Result<Self, KernelError> {
        if kernel_size == 0 || stride == 0 || groups == 0 || in_channels == 0 || out_channels == 0 {
            return Err(KernelError::InvalidParameters(
                "kernel size, stride, groups and channel counts must be positive".into(),
            ));
        }
        if !in_channels.is_multiple_of(groups) || !out_channels.is_multiple_of(groups) {
            return Err(KernelError::InvalidParameters(format!(
                "channels {in_channels}->{out_channels} not divisible by {groups} groups"
            )));
        }
        let expected = out_channels * kernel_size * kernel_size * (in_channels / groups);
        if weights.len() != expected {
            return Err(KernelError::InvalidParameters(format!(
                "expected {expected} weights, got {}",
                weights.len()
            )));
        }
        if biases.len() != out_channels {
            return Err(KernelError::InvalidParameters(format!(
                "expected {out_channels} biases, got {}",
                biases.len()
            )));
        }
        Ok(Self {
            kernel_size,
            in_channels,
            out_channels,
            groups,
            stride,
            pad,
            weights,
            biases,
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }
    pub fn in_channels(&self) -> usize {
        self.in_channels
    }
    pub fn out_channels(&self) -> usize {
        self.out_channels
    }
    pub fn groups(&self) -> usize {
        self.groups
    }
    pub fn stride(&self) -> usize {
        self.stride
    }
    pub fn pad(&self) -> usize {
        self.pad
    }
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }
    pub fn biases(&self) -> &[f32] {
        &self.biases
    }

    /// Length of one kernel: `kernel_size² · in_channels/groups`.
    pub fn kernel_len(&self) -> usize {
        self.kernel_size * self.kernel_size * (self.in_channels / self.groups)
    }

    pub fn output_shape(&self, input: Shape3) -> Result<Shape3, KernelError> {
        if input.channels != self.in_channels {
            return Err(KernelError::ChannelMismatch {
                expected: self.in_channels,
                found: input.channels,
            });
        }
        let empty = || KernelError::EmptyOutput {
            input,
            window: self.kernel_size,
            stride: self.stride,
            pad: self.pad,
        };
        let rows = output_extent(input.rows, self.kernel_size, self.stride, self.pad).ok_or_else(empty)?;
        let cols = output_extent(input.cols, self.kernel_size, self.stride, self.pad).ok_or_else(empty)?;
        Ok(Shape3::new(rows, cols, self.out_channels))
    }
}

/// Grouped cross-correlation (no kernel flip) plus bias, optionally rectified.
pub fn conv_forward(input: &Tensor3, bank: &ConvKernelBank, apply_relu: bool) -> Result<Tensor3, KernelError> {
    let out_shape = bank.output_shape(input.shape())?;
    let n = bank.kernel_size;
    let cin_g = bank.in_channels / bank.groups;
    let cout_g = bank.out_channels / bank.groups;
    let klen = bank.kernel_len();
    let (rows, cols) = (input.rows() as isize, input.cols() as isize);
    let src = input.as_slice();

    let mut out = vec![0.0f32; out_shape.len()];
    let mut patch = vec![0.0f32; klen];
    for orow in 0..out_shape.rows {
        for ocol in 0..out_shape.cols {
            let base_r = (orow * bank.stride) as isize - bank.pad as isize;
            let base_c = (ocol * bank.stride) as isize - bank.pad as isize;
            let out_off = (orow * out_shape.cols + ocol) * out_shape.channels;
            for g in 0..bank.groups {
                // gather the receptive patch for this group, zero outside the image
                let mut p = 0;
                for kr in 0..n as isize {
                    let ir = base_r + kr;
                    for kc in 0..n as isize {
                        let ic = base_c + kc;
                        let dst = &mut patch[p..p + cin_g];
                        if ir < 0 || ir >= rows || ic < 0 || ic >= cols {
                            dst.fill(0.0);
                        } else {
                            let s = (ir as usize * input.cols() + ic as usize) * input.channels() + g * cin_g;
                            dst.copy_from_slice(&src[s..s + cin_g]);
                        }
                        p += cin_g;
                    }
                }
                for oc in g * cout_g..(g + 1) * cout_g {
                    let w = &bank.weights[oc * klen..(oc + 1) * klen];
                    let acc = bank.biases[oc] as f64 + dot_f64(w, &patch);
                    let v = if apply_relu { acc.max(0.0) } else { acc };
                    out[out_off + oc] = v as f32;
                }
            }
        }
    }
    Ok(Tensor3::new(out_shape.rows, out_shape.cols, out_shape.channels, out)?)
}

#[inline]
fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Across-channel local response normalization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrnSpec {
    pub window: usize,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LrnSpec {
    fn default() -> Self {
        Self {
            window: 5,
            k: 2.0,
            alpha: 1e-4,
            beta: 0.75,
        }
    }
}

impl LrnSpec {
    pub fn validate(&self) -> Result<(), KernelError> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(KernelError::InvalidParameters(format!(
                "LRN window must be a positive odd integer, got {}",
                self.window
            )));
        }
        if !(self.k > 0.0 && self.k.is_finite())
            || !(self.alpha >= 0.0 && self.alpha.is_finite())
            || !self.beta.is_finite()
        {
            return Err(KernelError::InvalidParameters(format!(
                "LRN constants out of range: k={} alpha={} beta={}",
                self.k, self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Divides each entry `x_m` by `(k + alpha·Σ_{n∈I_m} x_n²)^beta`, where
/// `I_m` is the channel window centred at `m`, clipped at the fiber ends.
pub fn lrn_forward(input: &Tensor3, spec: &LrnSpec) -> Result<Tensor3, KernelError> {
    spec.validate()?;
    if !input.is_finite() {
        return Err(KernelError::NonFinite);
    }
    let channels = input.channels();
    let half = spec.window / 2;
    let mut out = Vec::with_capacity(input.len());
    let mut squares = vec![0.0f64; channels];
    for fiber in input.fibers() {
        for (s, &x) in squares.iter_mut().zip(fiber) {
            *s = x as f64 * x as f64;
        }
        for (m, &x) in fiber.iter().enumerate() {
            let lo = m.saturating_sub(half);
            let hi = (m + half).min(channels - 1);
            let sum: f64 = squares[lo..=hi].iter().sum();
            let scale = (spec.k + spec.alpha * sum).powf(spec.beta);
            out.push((x as f64 / scale) as f32);
        }
    }
    Ok(Tensor3::new(input.rows(), input.cols(), channels, out)?)
}

/// Per-channel maximum over `size × size` windows stepped by `stride`.
pub fn maxpool_forward(input: &Tensor3, size: usize, stride: usize) -> Result<Tensor3, KernelError> {
    if size == 0 || stride == 0 {
        return Err(KernelError::InvalidParameters(
            "pool size and stride must be positive".into(),
        ));
    }
    let empty = || KernelError::EmptyOutput {
        input: input.shape(),
        window: size,
        stride,
        pad: 0,
    };
    let orows = output_extent(input.rows(), size, stride, 0).ok_or_else(empty)?;
    let ocols = output_extent(input.cols(), size, stride, 0).ok_or_else(empty)?;
    let channels = input.channels();
    let mut out = vec![f32::NEG_INFINITY; orows * ocols * channels];
    for orow in 0..orows {
        for ocol in 0..ocols {
            let dst = &mut out[(orow * ocols + ocol) * channels..][..channels];
            for r in orow * stride..orow * stride + size {
                for c in ocol * stride..ocol * stride + size {
                    for (d, &v) in dst.iter_mut().zip(input.fiber(r, c)) {
                        if v > *d {
                            *d = v;
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor3::new(orows, ocols, channels, out)?)
}

/// Fully connected layer weights, `[out_unit][flattened_input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    out_units: usize,
    in_len: usize,
    weights: Vec<f32>,
    biases: Vec<f32>,
}

impl DenseWeights {
    pub fn new(out_units: usize, in_len: usize, weights: Vec<f32>, biases: Vec<f32>) -> Result<Self, KernelError> {
        if out_units == 0 || in_len == 0 {
            return Err(KernelError::InvalidParameters(
                "dense layer dimensions must be positive".into(),
            ));
        }
        if weights.len() != out_units * in_len {
            return Err(KernelError::InvalidParameters(format!(
                "expected {}x{in_len} weights, got {}",
                out_units,
                weights.len()
            )));
        }
        if biases.len() != out_units {
            return Err(KernelError::InvalidParameters(format!(
                "expected {out_units} biases, got {}",
                biases.len()
            )));
        }
        Ok(Self {
            out_units,
            in_len,
            weights,
            biases,
        })
    }

    pub fn out_units(&self) -> usize {
        self.out_units
    }
    pub fn in_len(&self) -> usize {
        self.in_len
    }
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }
    pub fn biases(&self) -> &[f32] {
        &self.biases
    }
}

/// `out_i = b_i + ⟨w_i, flatten(input)⟩`, returned as a `1×1×out` tensor.
pub fn dense_forward(input: &Tensor3, layer: &DenseWeights, apply_relu: bool) -> Result<Tensor3, KernelError> {
    let x = input.as_slice();
    if x.len() != layer.in_len {
        return Err(KernelError::DimensionMismatch {
            expected: layer.in_len,
            found: x.len(),
        });
    }
    let out: Vec<f32> = layer
        .weights
        .chunks_exact(layer.in_len)
        .zip(&layer.biases)
        .map(|(w, &b)| {
            let acc = b as f64 + dot_f64(w, x);
            (if apply_relu { acc.max(0.0) } else { acc }) as f32
        })
        .collect();
    Ok(Tensor3::new(1, 1, layer.out_units, out)?)
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax over the flattened tensor, returned as `1×1×len`.
pub fn softmax_tensor(input: &Tensor3) -> Result<Tensor3, KernelError> {
    if !input.is_finite() {
        return Err(KernelError::NonFinite);
    }
    let logits: Vec<f64> = input.as_slice().iter().map(|&v| v as f64).collect();
    let probs = softmax(&logits).into_iter().map(|p| p as f32).collect();
    Ok(Tensor3::new(1, 1, input.len(), probs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_bank(channels: usize) -> ConvKernelBank {
        let mut w = vec![0.0; channels * channels];
        for c in 0..channels {
            w[c * channels + c] = 1.0;
        }
        ConvKernelBank::new(1, channels, channels, 1, 1, 0, w, vec![0.0; channels]).unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor3::from_fn(5, 5, 1, |r, c, _| (r * 5 + c) as f32 - 7.0).unwrap();
        let y = conv_forward(&x, &identity_bank(1), false).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn sum_kernel_on_ones() {
        let x = Tensor3::filled(3, 3, 1, 1.0).unwrap();
        let bank = ConvKernelBank::new(3, 1, 1, 1, 1, 0, vec![1.0; 9], vec![0.0]).unwrap();
        let y = conv_forward(&x, &bank, false).unwrap();
        assert_eq!(y.shape(), Shape3::new(1, 1, 1));
        assert_eq!(y.as_slice(), &[9.0]);
    }

    #[test]
    fn first_layer_grid_is_55() {
        assert_eq!(output_extent(224, 11, 4, 2), Some(55));
        assert_eq!(output_extent(13, 3, 2, 0), Some(6));
        assert_eq!(output_extent(2, 3, 1, 0), None);
    }

    #[test]
    fn conv_errors() {
        let x = Tensor3::zeros(4, 4, 2).unwrap();
        let bank = identity_bank(3);
        assert_eq!(
            conv_forward(&x, &bank, true),
            Err(KernelError::ChannelMismatch { expected: 3, found: 2 })
        );
        let big = ConvKernelBank::new(5, 2, 1, 1, 1, 0, vec![0.0; 50], vec![0.0]).unwrap();
        assert!(matches!(
            conv_forward(&x, &big, true),
            Err(KernelError::EmptyOutput { .. })
        ));
        assert!(ConvKernelBank::new(1, 3, 4, 2, 1, 0, vec![0.0; 6], vec![0.0; 4]).is_err());
    }

    #[test]
    fn relu_clamps_negative_sums() {
        let x = Tensor3::filled(2, 2, 1, 1.0).unwrap();
        let bank = ConvKernelBank::new(1, 1, 1, 1, 1, 0, vec![-1.0], vec![0.0]).unwrap();
        assert!(conv_forward(&x, &bank, true)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
        assert!(conv_forward(&x, &bank, false)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == -1.0));
    }

    #[test]
    fn lrn_zero_and_scalar() {
        let z = Tensor3::zeros(2, 2, 6).unwrap();
        assert_eq!(lrn_forward(&z, &LrnSpec::default()).unwrap(), z);
        let one = Tensor3::filled(1, 1, 1, 1.0).unwrap();
        let y = lrn_forward(&one, &LrnSpec::default()).unwrap();
        // 1 / 2.0001^0.75, evaluated at 40 digits
        let expected = 0.594_581_260_843_431_f64;
        assert!(((y.as_slice()[0] as f64) - expected).abs() / expected < 1e-7);
    }

    #[test]
    fn lrn_rejects_even_window_and_nan() {
        let x = Tensor3::filled(1, 1, 3, 1.0).unwrap();
        let spec = LrnSpec {
            window: 4,
            ..LrnSpec::default()
        };
        assert!(matches!(lrn_forward(&x, &spec), Err(KernelError::InvalidParameters(_))));
        let nan = Tensor3::filled(1, 1, 3, f32::NAN).unwrap();
        assert_eq!(lrn_forward(&nan, &LrnSpec::default()), Err(KernelError::NonFinite));
    }

    #[test]
    fn maxpool_constant_and_shape() {
        let x = Tensor3::filled(5, 5, 2, 7.0).unwrap();
        let y = maxpool_forward(&x, 3, 2).unwrap();
        assert_eq!(y.shape(), Shape3::new(2, 2, 2));
        assert!(y.as_slice().iter().all(|&v| v == 7.0));
        let big = Tensor3::zeros(13, 13, 4).unwrap();
        assert_eq!(maxpool_forward(&big, 3, 2).unwrap().shape(), Shape3::new(6, 6, 4));
        let small = Tensor3::zeros(2, 5, 1).unwrap();
        assert!(matches!(
            maxpool_forward(&small, 3, 2),
            Err(KernelError::EmptyOutput { .. })
        ));
    }

    #[test]
    fn dense_identity_and_bias_relu() {
        let x = Tensor3::new(1, 1, 4, vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        let mut eye = vec![0.0; 16];
        for i in 0..4 {
            eye[i * 4 + i] = 1.0;
        }
        let layer = DenseWeights::new(4, 4, eye, vec![0.0; 4]).unwrap();
        assert_eq!(dense_forward(&x, &layer, false).unwrap(), x);

        let layer = DenseWeights::new(2, 4, vec![0.0; 8], vec![1.0, -1.0]).unwrap();
        assert_eq!(dense_forward(&x, &layer, true).unwrap().as_slice(), &[1.0, 0.0]);

        let wrong = DenseWeights::new(2, 3, vec![0.0; 6], vec![0.0; 2]).unwrap();
        assert_eq!(
            dense_forward(&x, &wrong, true),
            Err(KernelError::DimensionMismatch { expected: 3, found: 4 })
        );
    }

    #[test]
    fn softmax_closed_forms() {
        for c in [-3.0, 0.0, 17.5] {
            for p in softmax(&[c; 4]) {
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
        let p = softmax(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 1e-300);
    }
}
