use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AggregateError, DescriptorSample};

/// K-means centroids for one layer. Voronoi cells are implicit through
/// [`Codebook::nearest_codeword`].
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    layer: usize,
    dim: usize,
    centroids: Vec<f32>,
}

impl Codebook {
    pub fn new(layer: usize, dim: usize, centroids: Vec<f32>) -> Result<Self, AggregateError> {
        if dim == 0 || centroids.is_empty() || !centroids.len().is_multiple_of(dim) {
            return Err(AggregateError::InvalidModel(format!(
                "codebook needs at least one centroid of dimension {dim}, got {} values",
                centroids.len()
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(AggregateError::InvalidModel("codebook has non-finite centroids".into()));
        }
        let rows: Vec<&[f32]> = centroids.chunks_exact(dim).collect();
        for i in 0..rows.len() {
            for j in 0..i {
                if rows[i] == rows[j] {
                    return Err(AggregateError::InvalidModel(format!("centroids {j} and {i} coincide")));
                }
            }
        }
        Ok(Self { layer, dim, centroids })
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Codebook size `N`.
    pub fn len(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn centroid(&self, j: usize) -> &[f32] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    /// Index of the nearest centroid by squared Euclidean distance; ties go
    /// to the lowest index.
    pub fn nearest_codeword(&self, x: &[f32]) -> Result<usize, AggregateError> {
        if x.len() != self.dim {
            return Err(AggregateError::DimMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.nearest_unchecked(x))
    }

    pub(crate) fn nearest_unchecked(&self, x: &[f32]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (j, c) in self.centroids.chunks_exact(self.dim).enumerate() {
            let d: f64 = x
                .iter()
                .zip(c)
                .map(|(&a, &b)| {
                    let t = a as f64 - b as f64;
                    t * t
                })
                .sum();
            if d < best_dist {
                best_dist = d;
                best = j;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KmeansConfig {
    pub clusters: usize,
    pub max_iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansReport {
    /// Mean squared distance to the assigned centroid: after seeding, then
    /// after every centroid update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded at
/// the point farthest from its assigned centroid. Stops when assignments
/// stop changing or after `max_iters` updates.
pub fn kmeans_train(
    sample: &DescriptorSample,
    config: &KmeansConfig,
) -> Result<(Codebook, KmeansReport), AggregateError> {
    let (centroids, report) = lloyd(sample.points(), sample.dim(), config)?;
    let centroids = centroids.into_iter().map(|v| v as f32).collect();
    let codebook = Codebook::new(sample.layer(), sample.dim(), centroids)?;
    Ok((codebook, report))
}

pub(crate) fn lloyd(
    points: &[f32],
    dim: usize,
    config: &KmeansConfig,
) -> Result<(Vec<f64>, KmeansReport), AggregateError> {
    let k = config.clusters;
    let n = points.len() / dim.max(1);
    if k == 0 {
        return Err(AggregateError::InvalidModel("cluster count must be positive".into()));
    }
    if n < k {
        return Err(AggregateError::TooFewPoints { points: n, required: k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = seed_plus_plus(points, dim, k, &mut rng)?;

    let (mut assign, mut dists) = assign_all(points, dim, &centroids);
    let mut trace = vec![mean(&dists)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        update_centroids(points, dim, &assign, &dists, &mut centroids);
        let (next_assign, next_dists) = assign_all(points, dim, &centroids);
        trace.push(mean(&next_dists));
        let stable = next_assign == assign;
        assign = next_assign;
        dists = next_dists;
        if stable {
            converged = true;
            break;
        }
    }
    Ok((
        centroids,
        KmeansReport {
            objective_trace: trace,
            iterations,
            converged,
        },
    ))
}

fn sq_dist(x: &[f32], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(&a, &b)| {
            let t = a as f64 - b;
            t * t
        })
        .sum()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn seed_plus_plus(points: &[f32], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, AggregateError> {
    let n = points.len() / dim;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids: Vec<f64> = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend(point(first).iter().map(|&v| v as f64));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), &centroids[..dim])).collect();
    for found in 1..k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(AggregateError::TooFewDistinct {
                distinct: found,
                required: k,
            });
        }
        let mut target = rng.random::<f64>() * total;
        let mut chosen = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                chosen = i;
                break;
            }
            target -= d;
        }
        // guard against rounding landing on a zero-weight tail
        if d2[chosen] <= 0.0 {
            chosen = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
        }
        let start = centroids.len();
        centroids.extend(point(chosen).iter().map(|&v| v as f64));
        for (i, d) in d2.iter_mut().enumerate() {
            let nd = sq_dist(point(i), &centroids[start..]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(centroids)
}

fn nearest(x: &[f32], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best_dist {
            best_dist = d;
            best = j;
        }
    }
    (best, best_dist)
}

fn assign_all(points: &[f32], dim: usize, centroids: &[f64]) -> (Vec<usize>, Vec<f64>) {
    points
        .par_chunks_exact(dim)
        .with_min_len(256)
        .map(|x| nearest(x, centroids, dim))
        .unzip()
}

fn update_centroids(points: &[f32], dim: usize, assign: &[usize], dists: &[f64], centroids: &mut [f64]) {
    let k = centroids.len() / dim;
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (x, &a) in points.chunks_exact(dim).zip(assign) {
        counts[a] += 1;
        for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(x) {
            *s += v as f64;
        }
    }
    let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
    for j in 0..k {
        if counts[j] > 0 {
            let c = counts[j] as f64;
            for (dst, s) in centroids[j * dim..(j + 1) * dim].iter_mut().zip(&sums[j * dim..]) {
                *dst = s / c;
            }
        }
    }
    if empty.is_empty() {
        return;
    }
    // farthest points first, lowest index on ties
    let mut order: Vec<usize> = (0..dists.len()).collect();
    order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
    for (&j, &i) in empty.iter().zip(&order) {
        if dists[i] <= 0.0 {
            break;
        }
        for (dst, &v) in centroids[j * dim..(j + 1) * dim]
            .iter_mut()
            .zip(&points[i * dim..(i + 1) * dim])
        {
            *dst = v as f64;
        }
    }
}
