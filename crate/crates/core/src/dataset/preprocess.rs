use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::container::WeightContainer;
use crate::tensor::Tensor3;

/// Name of the per-channel mean tensor in a mean file.
pub const MEAN_TENSOR: &str = "input.mean";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrder {
    #[default]
    Rgb,
    Bgr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResizeMode {
    /// Stretch the whole image to the target size.
    #[default]
    Warp,
    /// Take the largest centered window with the target aspect ratio.
    CenterCrop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSpec {
    pub rows: usize,
    pub cols: usize,
    pub order: ChannelOrder,
    /// Subtracted after reordering, so it is given in network channel order.
    pub mean: [f32; 3],
    pub mode: ResizeMode,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self {
            rows: 224,
            cols: 224,
            order: ChannelOrder::Rgb,
            mean: [0.0; 3],
            mode: ResizeMode::Warp,
        }
    }
}

/// Reads the `[3]` mean vector from a mean file.
pub fn load_mean(path: impl AsRef<Path>) -> Result<[f32; 3], DatasetError> {
    let c = WeightContainer::load(path)?;
    let rec = c.require(MEAN_TENSOR)?;
    match rec.values[..] {
        [a, b, d] if rec.shape == [3] => Ok([a, b, d]),
        _ => Err(DatasetError::InvalidSpec(format!(
            "`{MEAN_TENSOR}` must have shape [3], found {:?}",
            rec.shape
        ))),
    }
}

/// Decodes a PNG or JPEG file and preprocesses it.
pub fn load_and_preprocess(path: impl AsRef<Path>, spec: &PreprocessSpec) -> Result<Tensor3, DatasetError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
        path: shown.clone(),
        source,
    })?;
    let img = image::load_from_memory(&bytes).map_err(|e| DatasetError::Decode {
        path: shown,
        reason: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    preprocess_rgb(rgb.width() as usize, rgb.height() as usize, rgb.as_raw(), spec)
}

/// Preprocesses interleaved 8-bit RGB pixels (`height × width × 3`).
pub fn preprocess_rgb(
    width: usize,
    height: usize,
    pixels: &[u8],
    spec: &PreprocessSpec,
) -> Result<Tensor3, DatasetError> {
    if width == 0 || height == 0 || pixels.len() != width * height * 3 {
        return Err(DatasetError::InvalidSpec(format!(
            "{width}x{height} RGB image needs {} bytes, got {}",
            width * height * 3,
            pixels.len()
        )));
    }
    if spec.rows == 0 || spec.cols == 0 {
        return Err(DatasetError::InvalidSpec("target size must be nonzero".into()));
    }
    let src = Tensor3::new(height, width, 3, pixels.iter().map(|&p| p as f32).collect())
        .map_err(|e| DatasetError::InvalidSpec(e.to_string()))?;
    let window = match spec.mode {
        ResizeMode::Warp => (0.0, 0.0, height as f64, width as f64),
        ResizeMode::CenterCrop => {
            let target = spec.rows as f64 / spec.cols as f64;
            let (h, w) = (height as f64, width as f64);
            if h / w > target {
                let ch = w * target;
                ((h - ch) / 2.0, 0.0, ch, w)
            } else {
                let cw = h / target;
                (0.0, (w - cw) / 2.0, h, cw)
            }
        }
    };
    let mut out = resize_window(&src, window, spec.rows, spec.cols);
    let perm = match spec.order {
        ChannelOrder::Rgb => [0, 1, 2],
        ChannelOrder::Bgr => [2, 1, 0],
    };
    for px in out.as_mut_slice().chunks_exact_mut(3) {
        let v = [px[perm[0]], px[perm[1]], px[perm[2]]];
        for c in 0..3 {
            px[c] = v[c] - spec.mean[c];
        }
    }
    Ok(out)
}

/// Bilinear resize with pixel-center alignment and edge clamping.
pub fn resize_bilinear(src: &Tensor3, rows: usize, cols: usize) -> Tensor3 {
    resize_window(src, (0.0, 0.0, src.rows() as f64, src.cols() as f64), rows, cols)
}

/// Resamples the source window `(top, left, height, width)` to `rows × cols`.
fn resize_window(src: &Tensor3, window: (f64, f64, f64, f64), rows: usize, cols: usize) -> Tensor3 {
    let (top, left, h, w) = window;
    let k = src.channels();
    let axis = |n_out: usize, start: f64, span: f64, n_src: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let pos = (start + (i as f64 + 0.5) * span / n_out as f64 - 0.5).clamp(0.0, (n_src - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(n_src - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let ys = axis(rows, top, h, src.rows());
    let xs = axis(cols, left, w, src.cols());
    let data = src.as_slice();
    let at = |r: usize, c: usize, ch: usize| data[(r * src.cols() + c) * k + ch] as f64;
    let mut out = Vec::with_capacity(rows * cols * k);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..k {
                let top_row = at(y0, x0, ch) * (1.0 - fx) + at(y0, x1, ch) * fx;
                let bottom = at(y1, x0, ch) * (1.0 - fx) + at(y1, x1, ch) * fx;
                out.push((top_row * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Tensor3::new(rows, cols, k, out).expect("resize output matches its shape")
}
