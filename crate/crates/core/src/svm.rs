//! One-vs-all linear SVMs trained by dual coordinate descent.
//!
//! Each binary problem minimizes `½‖w‖² + C Σ max(0, 1 − y_i w·x̃_i)` where
//! `x̃_i = [x_i, B]` carries a constant bias feature `B`, so the bias is
//! regularized along with the weights.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("no training examples")]
    Empty,
    #[error("expected {expected} labels, found {found}")]
    LabelCount { expected: usize, found: usize },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("feature matrix length {len} is not a multiple of dimension {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("non-finite feature value in row {0}")]
    NonFinite(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Row-major `n × dim` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, SvmError> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(SvmError::Ragged { len: data.len(), dim });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite(pos / dim));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SvmError> {
        let dim = rows.first().ok_or(SvmError::Empty)?.len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(SvmError::DimMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Scales every nonzero row to unit ℓ₂ norm.
    pub fn l2_normalize_rows(&mut self) {
        for row in self.data.chunks_exact_mut(self.dim) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    /// Value of the constant feature appended to every example.
    pub bias_feature: f64,
    pub max_epochs: usize,
    /// Stop once the projected gradient spread falls below this.
    pub eps: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            bias_feature: 1.0,
            max_epochs: 2000,
            eps: 1e-6,
            seed: 0,
        }
    }
}

impl SvmConfig {
    fn validate(&self) -> Result<(), SvmError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SvmError::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !self.bias_feature.is_finite() || !(self.eps.is_finite() && self.eps > 0.0) || self.max_epochs == 0 {
            return Err(SvmError::InvalidConfig(
                "bias feature must be finite, eps positive and max_epochs nonzero".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Dual objective `½‖w‖² − Σα` after every epoch.
    pub dual_trace: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    /// Only one class was present; the model scores every input the same.
    pub degenerate: bool,
}

/// `f(x) = w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn decision_scores(&self, features: &FeatureMatrix) -> Result<Vec<f64>, SvmError> {
        if features.dim() != self.weights.len() {
            return Err(SvmError::DimMismatch {
                expected: self.weights.len(),
                found: features.dim(),
            });
        }
        Ok((0..features.rows()).map(|i| self.decision(features.row(i))).collect())
    }

    /// Primal objective with the bias carried as the weight of the constant
    /// feature `bias_feature`.
    pub fn primal_objective(&self, features: &FeatureMatrix, labels: &[bool], config: &SvmConfig) -> f64 {
        let wb = if config.bias_feature == 0.0 {
            0.0
        } else {
            self.bias / config.bias_feature
        };
        let reg = 0.5 * (self.weights.iter().map(|w| w * w).sum::<f64>() + wb * wb);
        let loss: f64 = (0..features.rows())
            .map(|i| {
                let y = if labels[i] { 1.0 } else { -1.0 };
                (1.0 - y * self.decision(features.row(i))).max(0.0)
            })
            .sum();
        reg + config.c * loss
    }
}

/// Trains one binary SVM. `labels[i]` is true for positives.
pub fn train_binary(
    features: &FeatureMatrix,
    labels: &[bool],
    config: &SvmConfig,
) -> Result<(LinearModel, TrainReport), SvmError> {
    config.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(SvmError::Empty);
    }
    if labels.len() != n {
        return Err(SvmError::LabelCount {
            expected: n,
            found: labels.len(),
        });
    }
    let dim = features.dim();
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == n {
        let sign = if positives == n { 1.0 } else { -1.0 };
        warn!("only one class among {n} training examples; using a constant score");
        return Ok((
            LinearModel {
                weights: vec![0.0; dim],
                bias: sign,
            },
            TrainReport {
                dual_trace: Vec::new(),
                epochs: 0,
                converged: true,
                degenerate: true,
            },
        ));
    }

    let b = config.bias_feature;
    let u = config.c;
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let qii: Vec<f64> = (0..n)
        .map(|i| features.row(i).iter().map(|v| v * v).sum::<f64>() + b * b)
        .collect();
    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; dim];
    let mut wb = 0.0f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = TrainReport {
        dual_trace: Vec::new(),
        epochs: 0,
        converged: false,
        degenerate: false,
    };

    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            if qii[i] == 0.0 {
                continue;
            }
            let x = features.row(i);
            let margin = w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + wb * b;
            let g = y[i] * margin - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == u {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, u);
                let step = (alpha[i] - old) * y[i];
                w.iter_mut().zip(x).for_each(|(a, v)| *a += step * v);
                wb += step * b;
            }
        }
        report.epochs += 1;
        let norm2 = w.iter().map(|a| a * a).sum::<f64>() + wb * wb;
        report.dual_trace.push(0.5 * norm2 - alpha.iter().sum::<f64>());
        if pg_max - pg_min < config.eps {
            report.converged = true;
            break;
        }
    }
    Ok((
        LinearModel {
            weights: w,
            bias: wb * b,
        },
        report,
    ))
}

/// Trains one binary SVM per class in parallel. `class_labels[c][i]` marks
/// example `i` as a positive for class `c`. Class `c` shuffles with seed
/// `config.seed + c`.
pub fn train_ova(
    features: &FeatureMatrix,
    class_labels: &[Vec<bool>],
    config: &SvmConfig,
) -> Result<Vec<(LinearModel, TrainReport)>, SvmError> {
    class_labels
        .par_iter()
        .enumerate()
        .map(|(c, labels)| {
            let cfg = SvmConfig {
                seed: config.seed.wrapping_add(c as u64),
                ..*config
            };
            train_binary(features, labels, &cfg)
        })
        .collect()
}
