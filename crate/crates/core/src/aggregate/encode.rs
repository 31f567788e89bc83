//! Bag-of-Words and first-order Fisher vector encoders.

use super::{AggregateError, Codebook, DescriptorSet, GmmModel};

/// Relative frequency of descriptors falling in each Voronoi cell.
pub fn bow_encode(set: &DescriptorSet, codebook: &Codebook) -> Result<Vec<f64>, AggregateError> {
    if set.is_empty() {
        return Err(AggregateError::EmptySet);
    }
    if set.dim() != codebook.dim() {
        return Err(AggregateError::DimMismatch {
            expected: codebook.dim(),
            found: set.dim(),
        });
    }
    let mut counts = vec![0usize; codebook.len()];
    for x in set.iter() {
        counts[codebook.nearest_unchecked(x)] += 1;
    }
    let total = set.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// How residuals `x − c_j` are scaled by the component's diagonal covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualScaling {
    /// `Σ_j⁻¹ (x − c_j)`: divide by the variance.
    #[default]
    InverseVariance,
    /// `Σ_j^{-1/2} (x − c_j)`: divide by the standard deviation.
    InverseStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FisherOptions {
    pub scaling: ResidualScaling,
    /// Signed square root followed by unit ℓ₂ normalization of the whole vector.
    pub normalize: bool,
}

/// First-order Fisher vector: for each component `j`, the segment
/// `(1/M) Σ_k p(j|x_k)/√β_j · Σ_j⁻¹ (x_k − c_j)`, laid out component-major
/// (length `m · dim`).
pub fn fv_encode(set: &DescriptorSet, gmm: &GmmModel, options: &FisherOptions) -> Result<Vec<f64>, AggregateError> {
    if set.is_empty() {
        return Err(AggregateError::EmptySet);
    }
    let dim = gmm.dim();
    if set.dim() != dim {
        return Err(AggregateError::DimMismatch {
            expected: dim,
            found: set.dim(),
        });
    }
    let m = gmm.components();
    let scale: Vec<f64> = match options.scaling {
        ResidualScaling::InverseVariance => gmm.variances().iter().map(|v| 1.0 / v).collect(),
        ResidualScaling::InverseStd => gmm.variances().iter().map(|v| 1.0 / v.sqrt()).collect(),
    };
    let posts = gmm.posteriors_flat(set.as_flat());
    let mut fv = vec![0.0f64; m * dim];
    for (x, post) in set.iter().zip(posts.chunks_exact(m)) {
        for (j, &p) in post.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mean = gmm.mean(j);
            let seg = &mut fv[j * dim..(j + 1) * dim];
            for (d, out) in seg.iter_mut().enumerate() {
                *out += p * (x[d] as f64 - mean[d]) * scale[j * dim + d];
            }
        }
    }
    let count = set.len() as f64;
    for (j, seg) in fv.chunks_exact_mut(dim).enumerate() {
        let w = 1.0 / (count * gmm.priors()[j].sqrt());
        seg.iter_mut().for_each(|v| *v *= w);
    }
    if options.normalize {
        power_l2_normalize(&mut fv);
    }
    Ok(fv)
}

/// Signed square root, then unit ℓ₂ norm. An all-zero vector stays zero.
pub fn power_l2_normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bow_single_cell() {
        let cb = Codebook::new(1, 2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let set = DescriptorSet::from_vectors(1, &vec![vec![1.0, 1.0]; 7]).unwrap();
        assert_eq!(bow_encode(&set, &cb).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn bow_two_thirds() {
        let cb = Codebook::new(1, 1, vec![0.0, 10.0]).unwrap();
        let set = DescriptorSet::from_vectors(1, &[vec![0.5], vec![-1.0], vec![9.0]]).unwrap();
        let f = bow_encode(&set, &cb).unwrap();
        assert_eq!(f, vec![2.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn bow_errors() {
        let cb = Codebook::new(1, 1, vec![0.0, 10.0]).unwrap();
        let empty = DescriptorSet::from_flat(1, 1, vec![]).unwrap();
        assert!(matches!(bow_encode(&empty, &cb), Err(AggregateError::EmptySet)));
        let wrong = DescriptorSet::from_flat(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            bow_encode(&wrong, &cb),
            Err(AggregateError::DimMismatch { .. })
        ));
    }

    #[test]
    fn fisher_hand_evaluation() {
        let gmm = GmmModel::new(1, 2, vec![1.0], vec![1.0, 1.0], vec![4.0, 4.0]).unwrap();
        let set = DescriptorSet::from_vectors(1, &[vec![3.0, 1.0]]).unwrap();
        let fv = fv_encode(&set, &gmm, &FisherOptions::default()).unwrap();
        assert_eq!(fv, vec![0.5, 0.0]);
        let fv = fv_encode(
            &set,
            &gmm,
            &FisherOptions {
                scaling: ResidualScaling::InverseStd,
                normalize: false,
            },
        )
        .unwrap();
        assert_eq!(fv, vec![1.0, 0.0]);
    }

    #[test]
    fn fisher_mean_collapse_is_zero() {
        let gmm = GmmModel::new(1, 3, vec![1.0], vec![0.5, -2.0, 7.0], vec![1.0, 2.0, 3.0]).unwrap();
        let set = DescriptorSet::from_vectors(1, &vec![vec![0.5, -2.0, 7.0]; 9]).unwrap();
        let fv = fv_encode(&set, &gmm, &FisherOptions::default()).unwrap();
        assert!(fv.iter().all(|&v| v == 0.0));
        let normed = fv_encode(
            &set,
            &gmm,
            &FisherOptions {
                normalize: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(normed.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization_gives_unit_norm() {
        let mut v = vec![4.0, -9.0, 0.0, 1.0];
        power_l2_normalize(&mut v);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(v[1] < 0.0 && v[2] == 0.0);
    }
}
