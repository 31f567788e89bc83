use rayon::prelude::*;

use super::kmeans::{lloyd, KmeansConfig};
use super::{AggregateError, DescriptorSample};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Relative variance floor: `floor_d = max(VARIANCE_FLOOR · var_d, MIN_VARIANCE)`
/// where `var_d` is the per-dimension variance of the training sample.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Absolute floor for dimensions with (near) zero spread, e.g. dead ReLU channels.
pub const MIN_VARIANCE: f64 = 1e-9;

const CHUNK: usize = 2048;

/// Diagonal-covariance Gaussian mixture for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    layer: usize,
    dim: usize,
    priors: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl GmmModel {
    /// Validates shapes, positivity and finiteness. Priors must sum to one
    /// within `1e-4` and are renormalized exactly.
    pub fn new(
        layer: usize,
        dim: usize,
        priors: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self, AggregateError> {
        let m = priors.len();
        if dim == 0 || m == 0 || means.len() != m * dim || variances.len() != m * dim {
            return Err(AggregateError::InvalidModel(format!(
                "GMM with {m} components of dimension {dim} needs {} means and variances, got {} and {}",
                m * dim,
                means.len(),
                variances.len()
            )));
        }
        if priors.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(AggregateError::InvalidModel("GMM priors must be positive".into()));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-4 {
            return Err(AggregateError::InvalidModel(format!("GMM priors sum to {total}")));
        }
        if means.iter().any(|v| !v.is_finite()) || variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(AggregateError::InvalidModel(
                "GMM means must be finite and variances positive".into(),
            ));
        }
        let priors = priors.into_iter().map(|p| p / total).collect();
        Ok(Self {
            layer,
            dim,
            priors,
            means,
            variances,
        })
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of mixture components `m`.
    pub fn components(&self) -> usize {
        self.priors.len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self, j: usize) -> &[f64] {
        &self.means[j * self.dim..(j + 1) * self.dim]
    }

    pub fn variance(&self, j: usize) -> &[f64] {
        &self.variances[j * self.dim..(j + 1) * self.dim]
    }

    fn log_norms(&self) -> Vec<f64> {
        (0..self.components())
            .map(|j| {
                let logdet: f64 = self.variance(j).iter().map(|v| v.ln()).sum();
                self.priors[j].ln() - 0.5 * (self.dim as f64 * LN_2PI + logdet)
            })
            .collect()
    }

    /// `log β_j + log N(x; c_j, Σ_j)` for every component, given precomputed
    /// normalizers.
    fn joint_log(&self, x: &[f32], log_norms: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mahal: f64 = x
                .iter()
                .zip(self.mean(j))
                .zip(self.variance(j))
                .map(|((&xv, &mu), &var)| {
                    let t = xv as f64 - mu;
                    t * t / var
                })
                .sum();
            *o = log_norms[j] - 0.5 * mahal;
        }
    }

    /// Posterior `p(j | x)` over components, computed in log space.
    pub fn posterior(&self, x: &[f32]) -> Result<Vec<f64>, AggregateError> {
        if x.len() != self.dim {
            return Err(AggregateError::DimMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let norms = self.log_norms();
        let mut post = vec![0.0; self.components()];
        self.joint_log(x, &norms, &mut post);
        normalize_log(&mut post);
        Ok(post)
    }

    /// Posteriors for many descriptors at once (row-major `n × m`).
    pub(crate) fn posteriors_flat(&self, points: &[f32]) -> Vec<f64> {
        let m = self.components();
        let norms = self.log_norms();
        let mut out = vec![0.0; points.len() / self.dim * m];
        for (x, post) in points.chunks_exact(self.dim).zip(out.chunks_exact_mut(m)) {
            self.joint_log(x, &norms, post);
            normalize_log(post);
        }
        out
    }

    /// Average log-likelihood of a point set.
    pub fn mean_log_likelihood(&self, points: &[f32]) -> f64 {
        let m = self.components();
        let norms = self.log_norms();
        let mut buf = vec![0.0; m];
        let n = points.len() / self.dim;
        let total: f64 = points
            .chunks_exact(self.dim)
            .map(|x| {
                self.joint_log(x, &norms, &mut buf);
                log_sum_exp(&buf)
            })
            .sum();
        total / n as f64
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Turns log joint values into normalized posteriors in place; returns the
/// log normalizer.
fn normalize_log(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
    max + sum.ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iters: usize,
    /// EM stops once the mean log-likelihood changes by less than `tol`.
    /// Zero runs all `max_iters` iterations.
    pub tol: f64,
    pub seed: u64,
    /// Iteration budget for the K-means initialization.
    pub kmeans_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmReport {
    /// Mean log-likelihood at the initialization and after every M-step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub variance_floor: Vec<f64>,
}

/// Expectation-maximization for a diagonal mixture, initialized from
/// K-means with the same number of components.
pub fn gmm_train(sample: &DescriptorSample, config: &GmmConfig) -> Result<(GmmModel, EmReport), AggregateError> {
    let dim = sample.dim();
    let points = sample.points();
    let n = sample.len();
    let m = config.components;
    if m == 0 {
        return Err(AggregateError::InvalidModel("component count must be positive".into()));
    }
    if n < m {
        return Err(AggregateError::TooFewPoints { points: n, required: m });
    }
    let floor = variance_floor(points, dim);

    let (centroids, _) = lloyd(
        points,
        dim,
        &KmeansConfig {
            clusters: m,
            max_iters: config.kmeans_iters,
            seed: config.seed,
        },
    )?;
    let mut model = init_from_centroids(sample.layer(), points, dim, centroids, &floor);

    let mut trace = vec![model.mean_log_likelihood(points)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        model = em_step(&model, points, &floor);
        let ll = model.mean_log_likelihood(points);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if (ll - prev).abs() < config.tol {
            converged = true;
            break;
        }
    }
    Ok((
        model,
        EmReport {
            log_likelihood_trace: trace,
            iterations,
            converged,
            variance_floor: floor,
        },
    ))
}

fn variance_floor(points: &[f32], dim: usize) -> Vec<f64> {
    let n = (points.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    for x in points.chunks_exact(dim) {
        for (m, &v) in mean.iter_mut().zip(x) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for x in points.chunks_exact(dim) {
        for ((s, &v), &mu) in var.iter_mut().zip(x).zip(&mean) {
            let t = v as f64 - mu;
            *s += t * t;
        }
    }
    var.into_iter()
        .map(|s| (VARIANCE_FLOOR * s / n).max(MIN_VARIANCE))
        .collect()
}

fn init_from_centroids(layer: usize, points: &[f32], dim: usize, centroids: Vec<f64>, floor: &[f64]) -> GmmModel {
    let m = centroids.len() / dim;
    let n = points.len() / dim;
    let mut counts = vec![0usize; m];
    let mut sq = vec![0.0f64; m * dim];
    for x in points.chunks_exact(dim) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.chunks_exact(dim).enumerate() {
            let d: f64 = x.iter().zip(c).map(|(&a, &b)| (a as f64 - b).powi(2)).sum();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        counts[best] += 1;
        for ((s, &v), &c) in sq[best * dim..(best + 1) * dim]
            .iter_mut()
            .zip(x)
            .zip(&centroids[best * dim..])
        {
            *s += (v as f64 - c).powi(2);
        }
    }
    let mut variances = vec![0.0; m * dim];
    for j in 0..m {
        for d in 0..dim {
            let v = if counts[j] > 0 {
                sq[j * dim + d] / counts[j] as f64
            } else {
                0.0
            };
            variances[j * dim + d] = v.max(floor[d]);
        }
    }
    let priors = counts.iter().map(|&c| (c.max(1)) as f64 / n as f64).collect::<Vec<_>>();
    let total: f64 = priors.iter().sum();
    GmmModel {
        layer,
        dim,
        priors: priors.into_iter().map(|p| p / total).collect(),
        means: centroids,
        variances,
    }
}

struct Moments {
    weight: Vec<f64>,
    first: Vec<f64>,
}

/// One EM iteration. Chunks are reduced in a fixed order so results do not
/// depend on the thread count.
fn em_step(model: &GmmModel, points: &[f32], floor: &[f64]) -> GmmModel {
    let dim = model.dim;
    let m = model.components();
    let n = points.len() / dim;

    let chunks: Vec<(&[f32], Vec<f64>)> = points
        .par_chunks(CHUNK * dim)
        .map(|chunk| (chunk, model.posteriors_flat(chunk)))
        .collect();

    let partial: Vec<Moments> = chunks
        .par_iter()
        .map(|(chunk, post)| {
            let mut acc = Moments {
                weight: vec![0.0; m],
                first: vec![0.0; m * dim],
            };
            for (x, r) in chunk.chunks_exact(dim).zip(post.chunks_exact(m)) {
                for (j, &w) in r.iter().enumerate() {
                    acc.weight[j] += w;
                    for (s, &v) in acc.first[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                        *s += w * v as f64;
                    }
                }
            }
            acc
        })
        .collect();
    let mut weight = vec![0.0; m];
    let mut first = vec![0.0; m * dim];
    for p in &partial {
        add_into(&mut weight, &p.weight);
        add_into(&mut first, &p.first);
    }

    let mut means = model.means.clone();
    for j in 0..m {
        if weight[j] > 0.0 {
            for d in 0..dim {
                means[j * dim + d] = first[j * dim + d] / weight[j];
            }
        }
    }

    let second_parts: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|(chunk, post)| {
            let mut acc = vec![0.0; m * dim];
            for (x, r) in chunk.chunks_exact(dim).zip(post.chunks_exact(m)) {
                for j in 0..m {
                    let w = r[j];
                    let mu = &means[j * dim..(j + 1) * dim];
                    for ((s, &v), &c) in acc[j * dim..(j + 1) * dim].iter_mut().zip(x).zip(mu) {
                        let t = v as f64 - c;
                        *s += w * t * t;
                    }
                }
            }
            acc
        })
        .collect();
    let mut second = vec![0.0; m * dim];
    for p in &second_parts {
        add_into(&mut second, p);
    }

    let mut variances = model.variances.clone();
    for j in 0..m {
        if weight[j] > 0.0 {
            for d in 0..dim {
                variances[j * dim + d] = (second[j * dim + d] / weight[j]).max(floor[d]);
            }
        }
    }
    let priors: Vec<f64> = weight.iter().map(|&w| (w / n as f64).max(f64::MIN_POSITIVE)).collect();
    let total: f64 = priors.iter().sum();
    GmmModel {
        layer: model.layer,
        dim,
        priors: priors.into_iter().map(|p| p / total).collect(),
        means,
        variances,
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
