//! Straight-loop reference implementations used as test oracles.
//!
//! Everything here works on plain `f64` slices in (row, col, channel)
//! order and avoids the library's own helpers.

#![allow(dead_code, clippy::too_many_arguments)]

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-9)
}

/// Grouped cross-correlation. Weights are `[out][kr][kc][in/groups]`.
pub fn conv(
    input: &[f64],
    rows: usize,
    cols: usize,
    cin: usize,
    weights: &[f64],
    biases: &[f64],
    n: usize,
    stride: usize,
    pad: usize,
    groups: usize,
    relu: bool,
) -> (Vec<f64>, usize, usize) {
    let cout = biases.len();
    let orows = (rows + 2 * pad - n) / stride + 1;
    let ocols = (cols + 2 * pad - n) / stride + 1;
    let cin_g = cin / groups;
    let cout_g = cout / groups;
    let mut out = vec![0.0; orows * ocols * cout];
    for i in 0..orows {
        for j in 0..ocols {
            for o in 0..cout {
                let g = o / cout_g;
                let mut acc = biases[o];
                for a in 0..n {
                    for b in 0..n {
                        let r = (i * stride + a) as i64 - pad as i64;
                        let c = (j * stride + b) as i64 - pad as i64;
                        if r < 0 || c < 0 || r >= rows as i64 || c >= cols as i64 {
                            continue;
                        }
                        for k in 0..cin_g {
                            let x = input[((r as usize) * cols + c as usize) * cin + g * cin_g + k];
                            let w = weights[((o * n + a) * n + b) * cin_g + k];
                            acc += w * x;
                        }
                    }
                }
                if relu && acc < 0.0 {
                    acc = 0.0;
                }
                out[(i * ocols + j) * cout + o] = acc;
            }
        }
    }
    (out, orows, ocols)
}

pub fn lrn(input: &[f64], channels: usize, window: usize, k: f64, alpha: f64, beta: f64) -> Vec<f64> {
    let half = (window / 2) as i64;
    let mut out = vec![0.0; input.len()];
    for p in 0..input.len() / channels {
        for m in 0..channels as i64 {
            let mut s = 0.0;
            for n in m - half..=m + half {
                if n >= 0 && n < channels as i64 {
                    let v = input[p * channels + n as usize];
                    s += v * v;
                }
            }
            out[p * channels + m as usize] = input[p * channels + m as usize] / (k + alpha * s).powf(beta);
        }
    }
    out
}

pub fn maxpool(
    input: &[f64],
    rows: usize,
    cols: usize,
    ch: usize,
    size: usize,
    stride: usize,
) -> (Vec<f64>, usize, usize) {
    let orows = (rows - size) / stride + 1;
    let ocols = (cols - size) / stride + 1;
    let mut out = vec![f64::NEG_INFINITY; orows * ocols * ch];
    for i in 0..orows {
        for j in 0..ocols {
            for k in 0..ch {
                for a in 0..size {
                    for b in 0..size {
                        let v = input[((i * stride + a) * cols + j * stride + b) * ch + k];
                        let o = &mut out[(i * ocols + j) * ch + k];
                        if v > *o {
                            *o = v;
                        }
                    }
                }
            }
        }
    }
    (out, orows, ocols)
}

pub fn dense(input: &[f64], weights: &[f64], biases: &[f64], relu: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for (u, &b) in biases.iter().enumerate() {
        let mut acc = b;
        for (i, &x) in input.iter().enumerate() {
            acc += weights[u * input.len() + i] * x;
        }
        out.push(if relu { acc.max(0.0) } else { acc });
    }
    out
}

/// Plain `exp(x_i) / Σ exp(x_j)`; only valid for moderate logits.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let total: f64 = x.iter().map(|v| v.exp()).sum();
    x.iter().map(|v| v.exp() / total).collect()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest centroid, lowest index on ties.
pub fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    for j in 1..centroids.len() {
        if sq_dist(x, &centroids[j]) < sq_dist(x, &centroids[best]) {
            best = j;
        }
    }
    best
}

/// Relative frequency of nearest-codeword assignments.
pub fn bow(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; centroids.len()];
    for x in points {
        h[nearest(x, centroids)] += 1.0;
    }
    let m = points.len() as f64;
    h.iter().map(|c| c / m).collect()
}

/// Mean squared distance to the nearest centroid.
pub fn kmeans_objective(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|x| sq_dist(x, &centroids[nearest(x, centroids)]))
        .sum::<f64>()
        / points.len() as f64
}

/// Diagonal Gaussian density evaluated directly.
pub fn gaussian(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut p = 1.0;
    for d in 0..x.len() {
        p *= (-(x[d] - mean[d]).powi(2) / (2.0 * var[d])).exp() / (2.0 * std::f64::consts::PI * var[d]).sqrt();
    }
    p
}

pub fn gmm_mean_loglik(points: &[Vec<f64>], priors: &[f64], means: &[Vec<f64>], vars: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|x| {
            (0..priors.len())
                .map(|j| priors[j] * gaussian(x, &means[j], &vars[j]))
                .sum::<f64>()
                .ln()
        })
        .sum::<f64>()
        / points.len() as f64
}

/// First-order Fisher vector, written term by term: for each component,
/// `(1/M) Σ_k γ_k(j) / √β_j · (x_k − c_j) / σ_j²`.
pub fn fisher(points: &[Vec<f64>], priors: &[f64], means: &[Vec<f64>], vars: &[Vec<f64>]) -> Vec<f64> {
    let m = priors.len();
    let dim = means[0].len();
    let count = points.len() as f64;
    let mut out = vec![0.0; m * dim];
    for x in points {
        let joint: Vec<f64> = (0..m).map(|j| priors[j] * gaussian(x, &means[j], &vars[j])).collect();
        let total: f64 = joint.iter().sum();
        for j in 0..m {
            let gamma = joint[j] / total;
            for d in 0..dim {
                out[j * dim + d] += gamma / priors[j].sqrt() * (x[d] - means[j][d]) / vars[j][d] / count;
            }
        }
    }
    out
}

/// 11-point interpolated average precision, transcribed literally: rank by
/// descending score (earlier index first on ties), then for each recall
/// level take the best precision at that recall or beyond.
pub fn ap11(scores: &[f64], relevant: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // insertion sort keeps equal scores in input order
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && scores[idx[j - 1]] < scores[idx[j]] {
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    let npos = relevant.iter().filter(|&&r| r).count() as f64;
    let mut prec = Vec::new();
    let mut rec = Vec::new();
    let mut hits = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        if relevant[i] {
            hits += 1.0;
        }
        prec.push(hits / (k + 1) as f64);
        rec.push(hits / npos);
    }
    let mut ap = 0.0;
    for t in 0..=10 {
        let level = t as f64 / 10.0;
        let mut best: f64 = 0.0;
        for k in 0..prec.len() {
            if rec[k] >= level && prec[k] > best {
                best = prec[k];
            }
        }
        ap += best;
    }
    ap / 11.0
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}
