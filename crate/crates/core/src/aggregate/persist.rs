//! Storing trained aggregators and descriptor samples in HFW1 containers.
//!
//! Tensor names: `codebook<l>.centroids` `[m, dim]`; `gmm<l>.priors` `[m]`,
//! `gmm<l>.means` and `gmm<l>.variances` `[m, dim]`; `sample<l>.points`
//! `[n, dim]`.

use super::{AggregateError, Codebook, DescriptorSample, GmmModel};
use crate::container::{TensorRecord, WeightContainer};

fn matrix(container: &WeightContainer, name: &str) -> Result<(usize, usize, Vec<f32>), AggregateError> {
    let rec = container.require(name)?;
    match rec.shape[..] {
        [rows, cols] => Ok((rows, cols, rec.values.clone())),
        _ => Err(AggregateError::InvalidModel(format!(
            "`{name}` must be a matrix, found shape {:?}",
            rec.shape
        ))),
    }
}

pub fn codebook_records(codebook: &Codebook) -> Result<Vec<TensorRecord>, AggregateError> {
    Ok(vec![TensorRecord::new(
        format!("codebook{}.centroids", codebook.layer()),
        vec![codebook.len(), codebook.dim()],
        codebook.centroids().to_vec(),
    )?])
}

pub fn codebook_from_container(container: &WeightContainer, layer: usize) -> Result<Codebook, AggregateError> {
    let (_, dim, values) = matrix(container, &format!("codebook{layer}.centroids"))?;
    Codebook::new(layer, dim, values)
}

pub fn gmm_records(gmm: &GmmModel) -> Result<Vec<TensorRecord>, AggregateError> {
    let l = gmm.layer();
    let (m, dim) = (gmm.components(), gmm.dim());
    let f = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
    Ok(vec![
        TensorRecord::new(format!("gmm{l}.priors"), vec![m], f(gmm.priors()))?,
        TensorRecord::new(format!("gmm{l}.means"), vec![m, dim], f(gmm.means()))?,
        TensorRecord::new(format!("gmm{l}.variances"), vec![m, dim], f(gmm.variances()))?,
    ])
}

pub fn gmm_from_container(container: &WeightContainer, layer: usize) -> Result<GmmModel, AggregateError> {
    let f = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
    let priors = container.require(&format!("gmm{layer}.priors"))?.values.clone();
    let (m, dim, means) = matrix(container, &format!("gmm{layer}.means"))?;
    let (vm, vdim, variances) = matrix(container, &format!("gmm{layer}.variances"))?;
    if vm != m || vdim != dim {
        return Err(AggregateError::InvalidModel(format!(
            "gmm{layer}: means are {m}x{dim} but variances are {vm}x{vdim}"
        )));
    }
    GmmModel::new(layer, dim, f(priors), f(means), f(variances))
}

pub fn sample_records(sample: &DescriptorSample) -> Result<Vec<TensorRecord>, AggregateError> {
    Ok(vec![TensorRecord::new(
        format!("sample{}.points", sample.layer()),
        vec![sample.len(), sample.dim()],
        sample.points().to_vec(),
    )?])
}

pub fn sample_from_container(container: &WeightContainer, layer: usize) -> Result<DescriptorSample, AggregateError> {
    let (_, dim, values) = matrix(container, &format!("sample{layer}.points"))?;
    DescriptorSample::from_points(layer, dim, values)
}
