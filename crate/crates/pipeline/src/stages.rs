//! Pipeline stages: extract → sample → train-agg → encode → train-svm →
//! evaluate. Each stage reads its upstream artifacts from the cache and
//! skips work whose key is already present.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use deepbow_core::aggregate::persist::{
    codebook_from_container, codebook_records, gmm_from_container, gmm_records, sample_from_container, sample_records,
};
use deepbow_core::aggregate::{
    append_fc, concat_layers, encode_layer, gmm_train, harvest, kmeans_train, DescriptorSample, EncoderModel,
    GmmConfig, KmeansConfig, LayerSubset,
};
use deepbow_core::dataset::{load_and_preprocess, load_mean, parse_manifest, Manifest, PreprocessSpec, Split};
use deepbow_core::eval::{average_precision, mean_ap, ScoredLabels};
use deepbow_core::network::{validate_and_bind, NetworkModel, TapSet};
use deepbow_core::svm::{train_ova, FeatureMatrix, LinearModel};
use deepbow_core::{ArchitectureDescriptor, Tensor3, TensorRecord, WeightContainer};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cache::{digest_bytes, digest_file, Cache, Key, KeyBuilder};
use crate::config::{EncoderKind, PipelineConfig};

pub const OUTPUT_FILE: &str = "output.hfw";
pub const SAMPLE_FILE: &str = "sample.hfw";
pub const MODEL_FILE: &str = "model.hfw";
pub const FEATURES_FILE: &str = "features.hfw";
pub const SVM_FILE: &str = "svm.hfw";
pub const RESULTS_TSV: &str = "results.tsv";
pub const RESULTS_JSON: &str = "results.json";

const OUTPUT_TENSOR: &str = "output";

/// The C grid searched when `svm.grid` is on: 2^-5 … 2^5.
pub fn c_grid() -> Vec<f64> {
    (-5..=5).map(|e| 2f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub name: String,
    /// `None` when the test split has no positives for the class.
    pub ap: Option<f64>,
    pub test_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub classes: Vec<ClassResult>,
    pub map: f64,
    pub ap_mode: String,
    pub encoder: EncoderKind,
    pub size: usize,
    pub layers: String,
    pub append_fc: Vec<usize>,
    pub feature_dim: usize,
    pub svm_c: f64,
    pub test_images: usize,
}

impl EvalSummary {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("class\tAP\n");
        for c in &self.classes {
            match c.ap {
                Some(ap) => out.push_str(&format!("{}\t{ap:.6}\n", c.name)),
                None => out.push_str(&format!("{}\tn/a\n", c.name)),
            }
        }
        out.push_str(&format!("mAP\t{:.6}\n", self.map));
        out
    }
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub desc: ArchitectureDescriptor,
    pub manifest: Manifest,
    pub cache: Cache,
    data_root: PathBuf,
    subset: LayerSubset,
    fc_layers: Vec<usize>,
    weights_digest: String,
    arch_digest: String,
    mean: [f32; 3],
    image_digests: Vec<String>,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        let desc = cfg.descriptor()?;
        let text = fs::read_to_string(&cfg.manifest)
            .with_context(|| format!("reading manifest {}", cfg.manifest.display()))?;
        let manifest = parse_manifest(&text).with_context(|| format!("in manifest {}", cfg.manifest.display()))?;
        let data_root = cfg.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
        let subset = LayerSubset::resolve(cfg.features.subset()?, desc.nondense_count())?;
        for &l in &cfg.features.append_fc {
            if !desc.layer(l)?.is_dense() {
                bail!("append_fc layer {l} is not a dense layer");
            }
        }
        let mut fc_layers = cfg.features.append_fc.clone();
        fc_layers.dedup();
        let weights_digest = digest_file(&cfg.weights).context("hashing weights")?;
        let arch_digest = digest_bytes(desc.to_toml_string().as_bytes());
        let mean = match &cfg.mean {
            Some(p) => load_mean(p).with_context(|| format!("loading mean file {}", p.display()))?,
            None => [0.0; 3],
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
        let cache = Cache::open(&cfg.cache_dir)?;
        let image_digests = pool.install(|| {
            manifest
                .records
                .par_iter()
                .map(|r| digest_file(&data_root.join(&r.path)))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(Self {
            cfg,
            desc,
            manifest,
            cache,
            data_root,
            subset,
            fc_layers,
            weights_digest,
            arch_digest,
            mean,
            image_digests,
            pool,
        })
    }

    fn preprocess_spec(&self) -> PreprocessSpec {
        PreprocessSpec {
            rows: self.desc.input.rows,
            cols: self.desc.input.cols,
            order: self.cfg.preprocess.order,
            mean: self.mean,
            mode: self.cfg.preprocess.mode,
        }
    }

    pub fn subset(&self) -> &LayerSubset {
        &self.subset
    }

    /// Layers whose outputs the encoder reads, ascending.
    fn needed_layers(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.subset.layers().iter().chain(&self.fc_layers).copied().collect();
        set.into_iter().collect()
    }

    fn fit_indices(&self) -> Vec<usize> {
        self.indices(&[Split::Train, Split::Val])
    }

    fn indices(&self, splits: &[Split]) -> Vec<usize> {
        (0..self.manifest.records.len())
            .filter(|&i| splits.contains(&self.manifest.records[i].split))
            .collect()
    }

    pub fn extract_key(&self, image: usize, layer: usize) -> Key {
        KeyBuilder::new("extract")
            .field("image", &self.image_digests[image])
            .field("weights", &self.weights_digest)
            .field("arch", &self.arch_digest)
            .field("preprocess", &self.cfg.preprocess)
            .field("mean", &self.mean)
            .field("layer", &layer)
            .finish()
    }

    fn extract_stage_key(&self) -> Key {
        let keys: Vec<Key> = self
            .needed_layers()
            .iter()
            .flat_map(|&l| (0..self.manifest.records.len()).map(move |i| (i, l)))
            .map(|(i, l)| self.extract_key(i, l))
            .collect();
        KeyBuilder::new("extract-all").field("keys", &keys).finish()
    }

    pub fn sample_key(&self, layer: usize) -> Key {
        let inputs: Vec<Key> = self
            .fit_indices()
            .into_iter()
            .map(|i| self.extract_key(i, layer))
            .collect();
        KeyBuilder::new("sample")
            .field("inputs", &inputs)
            .field("capacity", &self.cfg.features.sample_capacity)
            .field("seed", &self.cfg.seed)
            .finish()
    }

    pub fn agg_key(&self, layer: usize) -> Key {
        let f = &self.cfg.features;
        let mut b = KeyBuilder::new("train-agg")
            .field("sample", &self.sample_key(layer))
            .field("encoder", &f.encoder)
            .field("size", &f.size)
            .field("kmeans_iters", &f.kmeans_iters)
            .field("seed", &self.cfg.seed);
        if f.encoder == EncoderKind::Fisher {
            b = b.field("em_iters", &f.em_iters).field("em_tol", &f.em_tol);
        }
        b.finish()
    }

    pub fn encode_key(&self) -> Key {
        let n = self.manifest.records.len();
        let aggs: Vec<Key> = self.subset.layers().iter().map(|&l| self.agg_key(l)).collect();
        let inputs: Vec<Key> = self
            .needed_layers()
            .iter()
            .flat_map(|&l| (0..n).map(move |i| (i, l)))
            .map(|(i, l)| self.extract_key(i, l))
            .collect();
        let mut b = KeyBuilder::new("encode")
            .field("layers", &self.subset.layers())
            .field("aggregators", &aggs)
            .field("inputs", &inputs)
            .field("append_fc", &self.fc_layers);
        if self.cfg.features.encoder == EncoderKind::Fisher {
            b = b
                .field("fisher_scaling", &self.cfg.features.fisher_scaling)
                .field("fisher_normalize", &self.cfg.features.fisher_normalize);
        }
        b.finish()
    }

    fn labels_digest(&self) -> String {
        digest_bytes(self.manifest.to_text().as_bytes())
    }

    pub fn svm_key(&self) -> Key {
        KeyBuilder::new("train-svm")
            .field("features", &self.encode_key())
            .field("labels", &self.labels_digest())
            .field("svm", &self.cfg.svm)
            .field("seed", &self.cfg.seed)
            .finish()
    }

    pub fn eval_key(&self) -> Key {
        KeyBuilder::new("evaluate")
            .field("svm", &self.svm_key())
            .field("features", &self.encode_key())
            .field("ap", &self.cfg.eval.ap)
            .finish()
    }

    fn load_output(&self, image: usize, layer: usize) -> Result<Tensor3> {
        let dir = self.cache.require("extract", &self.extract_key(image, layer))?;
        let c = WeightContainer::load(dir.join(OUTPUT_FILE))?;
        let rec = c.require(OUTPUT_TENSOR)?;
        match rec.shape[..] {
            [r, k, ch] => Ok(Tensor3::new(r, k, ch, rec.values.clone())?),
            _ => bail!(
                "extract artifact for image {image} layer {layer} has shape {:?}",
                rec.shape
            ),
        }
    }

    /// Runs the network over every image whose tapped outputs are missing.
    pub fn run_extract(&self) -> Result<()> {
        let start = Instant::now();
        let layers = self.needed_layers();
        let todo: Vec<(usize, Vec<usize>)> = (0..self.manifest.records.len())
            .filter_map(|i| {
                let missing: Vec<usize> = layers
                    .iter()
                    .copied()
                    .filter(|&l| !self.cache.is_complete("extract", &self.extract_key(i, l)))
                    .collect();
                (!missing.is_empty()).then_some((i, missing))
            })
            .collect();
        if !todo.is_empty() {
            let weights = WeightContainer::load(&self.cfg.weights)
                .with_context(|| format!("loading weights {}", self.cfg.weights.display()))?;
            let model = validate_and_bind(&self.desc, &weights)?;
            drop(weights);
            let spec = self.preprocess_spec();
            self.pool.install(|| {
                todo.par_iter()
                    .try_for_each(|(i, missing)| self.extract_one(&model, &spec, *i, missing))
            })?;
        }
        self.cache.log_stage(
            "extract",
            &self.extract_stage_key(),
            todo.is_empty(),
            start.elapsed().as_millis(),
            &format!("images={} computed={}", self.manifest.records.len(), todo.len()),
        );
        Ok(())
    }

    fn extract_one(&self, model: &NetworkModel, spec: &PreprocessSpec, i: usize, missing: &[usize]) -> Result<()> {
        let path = self.data_root.join(&self.manifest.records[i].path);
        let image = load_and_preprocess(&path, spec)?;
        let outs = model
            .forward(&image, &TapSet::new(missing.iter().copied(), &self.desc)?)
            .with_context(|| format!("forward pass on {}", path.display()))?;
        for (&l, t) in &outs {
            let rec = TensorRecord::new(
                OUTPUT_TENSOR,
                vec![t.rows(), t.cols(), t.channels()],
                t.as_slice().to_vec(),
            )?;
            let key = self.extract_key(i, l);
            self.cache.store(
                "extract",
                &key,
                json!({ "image": self.manifest.records[i].path, "layer": l }),
                |d| Ok(WeightContainer::new(vec![rec])?.save(d.join(OUTPUT_FILE))?),
            )?;
        }
        Ok(())
    }

    fn require_extract(&self) -> Result<()> {
        for l in self.needed_layers() {
            for i in 0..self.manifest.records.len() {
                self.cache.require("extract", &self.extract_key(i, l))?;
            }
        }
        Ok(())
    }

    /// Pools descriptors from train+val images and fits one aggregator per
    /// subset layer.
    pub fn run_train_agg(&self) -> Result<()> {
        self.require_extract()?;
        for &l in self.subset.layers() {
            self.run_sample(l)?;
            self.pool.install(|| self.run_fit(l))?;
        }
        Ok(())
    }

    fn run_sample(&self, layer: usize) -> Result<()> {
        let start = Instant::now();
        let key = self.sample_key(layer);
        let hit = self.cache.is_complete("sample", &key);
        if !hit {
            let dim = self.desc.shape_chain()?[layer].channels;
            let mut sample = DescriptorSample::new(
                layer,
                dim,
                self.cfg.features.sample_capacity,
                self.cfg.seed.wrapping_add(layer as u64),
            );
            for i in self.fit_indices() {
                sample.extend(&harvest(&self.load_output(i, layer)?, layer))?;
            }
            let info = json!({ "layer": layer, "seen": sample.seen(), "kept": sample.len() });
            self.cache.store("sample", &key, info, |d| {
                Ok(WeightContainer::new(sample_records(&sample)?)?.save(d.join(SAMPLE_FILE))?)
            })?;
        }
        self.cache.log_stage(
            "sample",
            &key,
            hit,
            start.elapsed().as_millis(),
            &format!("layer={layer}"),
        );
        Ok(())
    }

    fn run_fit(&self, layer: usize) -> Result<()> {
        let start = Instant::now();
        let key = self.agg_key(layer);
        let hit = self.cache.is_complete("train-agg", &key);
        if !hit {
            let dir = self.cache.require("sample", &self.sample_key(layer))?;
            let sample = sample_from_container(&WeightContainer::load(dir.join(SAMPLE_FILE))?, layer)?;
            let f = &self.cfg.features;
            let seed = self.cfg.seed.wrapping_add(layer as u64);
            let (records, info) = match f.encoder {
                EncoderKind::Bow => {
                    let cfg = KmeansConfig {
                        clusters: f.size,
                        max_iters: f.kmeans_iters,
                        seed,
                    };
                    let (cb, report) =
                        kmeans_train(&sample, &cfg).with_context(|| format!("training the layer {layer} codebook"))?;
                    (
                        codebook_records(&cb)?,
                        json!({ "layer": layer, "objective_trace": report.objective_trace, "converged": report.converged }),
                    )
                }
                EncoderKind::Fisher => {
                    let cfg = GmmConfig {
                        components: f.size,
                        max_iters: f.em_iters,
                        tol: f.em_tol,
                        seed,
                        kmeans_iters: f.kmeans_iters,
                    };
                    let (gmm, report) =
                        gmm_train(&sample, &cfg).with_context(|| format!("training the layer {layer} mixture"))?;
                    (
                        gmm_records(&gmm)?,
                        json!({ "layer": layer, "log_likelihood_trace": report.log_likelihood_trace, "converged": report.converged }),
                    )
                }
            };
            self.cache.store("train-agg", &key, info, |d| {
                Ok(WeightContainer::new(records)?.save(d.join(MODEL_FILE))?)
            })?;
        }
        self.cache.log_stage(
            "train-agg",
            &key,
            hit,
            start.elapsed().as_millis(),
            &format!("layer={layer}"),
        );
        Ok(())
    }

    fn load_encoder(&self, layer: usize) -> Result<EncoderModel> {
        let dir = self.cache.require("train-agg", &self.agg_key(layer))?;
        let c = WeightContainer::load(dir.join(MODEL_FILE))?;
        Ok(match self.cfg.features.encoder {
            EncoderKind::Bow => EncoderModel::Bow(codebook_from_container(&c, layer)?),
            EncoderKind::Fisher => EncoderModel::Fisher {
                gmm: gmm_from_container(&c, layer)?,
                options: self.cfg.features.fisher_options(),
            },
        })
    }

    /// Encodes every image into its hybrid feature.
    pub fn run_encode(&self) -> Result<()> {
        let start = Instant::now();
        let key = self.encode_key();
        let hit = self.cache.is_complete("encode", &key);
        if !hit {
            self.require_extract()?;
            let encoders = self
                .subset
                .layers()
                .iter()
                .map(|&l| self.load_encoder(l))
                .collect::<Result<Vec<_>>>()?;
            let n = self.manifest.records.len();
            let feats = self.pool.install(|| {
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let segs = self
                            .subset
                            .layers()
                            .iter()
                            .zip(&encoders)
                            .map(|(&l, enc)| Ok(encode_layer(&harvest(&self.load_output(i, l)?, l), enc)?))
                            .collect::<Result<Vec<_>>>()?;
                        let hybrid = concat_layers(&segs, &self.subset)?;
                        let fc = self
                            .fc_layers
                            .iter()
                            .map(|&l| Ok((l, self.load_output(i, l)?)))
                            .collect::<Result<Vec<_>>>()?;
                        let fc_refs: Vec<(usize, &Tensor3)> = fc.iter().map(|(l, t)| (*l, t)).collect();
                        Ok(append_fc(hybrid, &fc_refs)?)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let first = &feats[0];
            let dim = first.total_dim();
            let mut data = Vec::with_capacity(n * dim);
            for f in &feats {
                if f.total_dim() != dim {
                    bail!("feature dimension differs between images ({} vs {dim})", f.total_dim());
                }
                data.extend(f.to_vec().into_iter().map(|v| v as f32));
            }
            let segs = first.segments();
            let seg_layer = segs.iter().map(|s| s.layer as f32).collect();
            let seg_dim = segs.iter().map(|s| s.values.len() as f32).collect();
            let seg_kind = segs.iter().map(|s| s.kind.code() as f32).collect();
            let records = vec![
                TensorRecord::new("features", vec![n, dim], data)?,
                TensorRecord::vector("segments.layer", seg_layer)?,
                TensorRecord::vector("segments.dim", seg_dim)?,
                TensorRecord::vector("segments.kind", seg_kind)?,
            ];
            let paths: Vec<&str> = self.manifest.records.iter().map(|r| r.path.as_str()).collect();
            let info =
                json!({ "images": paths, "dim": dim, "layers": self.subset.layers(), "append_fc": self.fc_layers });
            self.cache.store("encode", &key, info, |d| {
                Ok(WeightContainer::new(records)?.save(d.join(FEATURES_FILE))?)
            })?;
        }
        self.cache
            .log_stage("encode", &key, hit, start.elapsed().as_millis(), "");
        Ok(())
    }

    /// The encoded feature matrix, one row per manifest record.
    pub fn load_features(&self) -> Result<FeatureMatrix> {
        let dir = self.cache.require("encode", &self.encode_key())?;
        let c = WeightContainer::load(dir.join(FEATURES_FILE))?;
        let rec = c.require("features")?;
        let [n, dim] = rec.shape[..] else {
            bail!("features tensor has shape {:?}", rec.shape);
        };
        if n != self.manifest.records.len() {
            bail!(
                "features hold {n} rows but the manifest has {} records",
                self.manifest.records.len()
            );
        }
        Ok(FeatureMatrix::new(dim, rec.values.iter().map(|&v| v as f64).collect())?)
    }

    pub fn features_path(&self) -> PathBuf {
        self.cache.dir("encode", &self.encode_key()).join(FEATURES_FILE)
    }

    fn class_labels(&self, rows: &[usize]) -> Vec<Vec<bool>> {
        (0..self.manifest.classes.len())
            .map(|c| rows.iter().map(|&i| self.manifest.records[i].has_label(c)).collect())
            .collect()
    }

    fn prepared_features(&self, normalize: bool) -> Result<FeatureMatrix> {
        let mut x = self.load_features()?;
        if normalize {
            x.l2_normalize_rows();
        }
        Ok(x)
    }

    /// Trains one-vs-all SVMs on train+val, optionally choosing C on val first.
    pub fn run_train_svm(&self) -> Result<()> {
        self.pool.install(|| self.train_svm())
    }

    fn train_svm(&self) -> Result<()> {
        let start = Instant::now();
        let key = self.svm_key();
        let hit = self.cache.is_complete("train-svm", &key);
        if !hit {
            let x = self.prepared_features(self.cfg.svm.l2_normalize)?;
            let (c, grid) = if self.cfg.svm.grid {
                self.select_c(&x)?
            } else {
                (self.cfg.svm.c, Vec::new())
            };
            let rows = self.fit_indices();
            if rows.is_empty() {
                bail!("the manifest has no train or val records");
            }
            let models = train_ova(
                &x.select(&rows),
                &self.class_labels(&rows),
                &self.cfg.svm.solver(c, self.cfg.seed),
            )?;
            let mut records = vec![TensorRecord::vector(
                "svm.normalize",
                vec![self.cfg.svm.l2_normalize as u8 as f32],
            )?];
            let mut degenerate = Vec::new();
            let mut epochs = Vec::new();
            for (name, (model, report)) in self.manifest.classes.iter().zip(&models) {
                records.push(TensorRecord::vector(
                    format!("svm.{name}.weights"),
                    model.weights.iter().map(|&w| w as f32).collect(),
                )?);
                records.push(TensorRecord::vector(
                    format!("svm.{name}.bias"),
                    vec![model.bias as f32],
                )?);
                if report.degenerate {
                    degenerate.push(name.clone());
                }
                epochs.push(report.epochs);
            }
            let info =
                json!({ "c": c, "grid": grid, "degenerate": degenerate, "epochs": epochs, "config": self.cfg.svm });
            self.cache.store("train-svm", &key, info, |d| {
                Ok(WeightContainer::new(records)?.save(d.join(SVM_FILE))?)
            })?;
        }
        self.cache
            .log_stage("train-svm", &key, hit, start.elapsed().as_millis(), "");
        Ok(())
    }

    fn select_c(&self, x: &FeatureMatrix) -> Result<(f64, Vec<(f64, f64)>)> {
        let train = self.indices(&[Split::Train]);
        let val = self.indices(&[Split::Val]);
        if train.is_empty() || val.is_empty() {
            warn!(
                "C grid search needs train and val records; using C = {}",
                self.cfg.svm.c
            );
            return Ok((self.cfg.svm.c, Vec::new()));
        }
        let xt = x.select(&train);
        let xv = x.select(&val);
        let yt = self.class_labels(&train);
        let yv = self.class_labels(&val);
        let mut scores = Vec::new();
        for c in c_grid() {
            let models = train_ova(&xt, &yt, &self.cfg.svm.solver(c, self.cfg.seed))?;
            let aps = models
                .iter()
                .zip(&yv)
                .filter_map(|((m, _), rel)| class_ap(m, &xv, rel, self.cfg.eval.mode()).transpose())
                .collect::<Result<Vec<_>>>()?;
            if aps.is_empty() {
                warn!("no class has validation positives; using C = {}", self.cfg.svm.c);
                return Ok((self.cfg.svm.c, Vec::new()));
            }
            scores.push((c, mean_ap(&aps)?));
        }
        let best = scores
            .iter()
            .fold(scores[0], |best, &s| if s.1 > best.1 { s } else { best });
        Ok((best.0, scores))
    }

    fn load_svm(&self) -> Result<(Vec<LinearModel>, bool, f64)> {
        let dir = self.cache.require("train-svm", &self.svm_key())?;
        let c = WeightContainer::load(dir.join(SVM_FILE))?;
        let normalize = c.require("svm.normalize")?.values[0] != 0.0;
        let models = self
            .manifest
            .classes
            .iter()
            .map(|name| {
                Ok(LinearModel {
                    weights: c
                        .require(&format!("svm.{name}.weights"))?
                        .values
                        .iter()
                        .map(|&v| v as f64)
                        .collect(),
                    bias: c.require(&format!("svm.{name}.bias"))?.values[0] as f64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let meta: serde_json::Value = serde_json::from_slice(&fs::read(dir.join(crate::cache::META_FILE))?)?;
        let svm_c = meta["info"]["c"].as_f64().unwrap_or(self.cfg.svm.c);
        Ok((models, normalize, svm_c))
    }

    /// Scores the test split and computes per-class AP and mAP.
    pub fn run_evaluate(&self) -> Result<EvalSummary> {
        let start = Instant::now();
        let key = self.eval_key();
        let hit = self.cache.is_complete("evaluate", &key);
        if !hit {
            self.cache.require("encode", &self.encode_key())?;
            let (models, normalize, svm_c) = self.load_svm()?;
            let x = self.prepared_features(normalize)?;
            let test = self.indices(&[Split::Test]);
            if test.is_empty() {
                bail!("the manifest has no test records");
            }
            let xt = x.select(&test);
            let labels = self.class_labels(&test);
            let mode = self.cfg.eval.mode();
            let mut classes = Vec::new();
            for ((name, model), rel) in self.manifest.classes.iter().zip(&models).zip(&labels) {
                classes.push(ClassResult {
                    name: name.clone(),
                    ap: class_ap(model, &xt, rel, mode)?,
                    test_positives: rel.iter().filter(|&&r| r).count(),
                });
            }
            let defined: Vec<f64> = classes.iter().filter_map(|c| c.ap).collect();
            let map = mean_ap(&defined).map_err(|_| anyhow!("no class has a positive test image"))?;
            let summary = EvalSummary {
                classes,
                map,
                ap_mode: serde_json::to_value(self.cfg.eval.ap)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                encoder: self.cfg.features.encoder,
                size: self.cfg.features.size,
                layers: self.cfg.features.layers.clone(),
                append_fc: self.fc_layers.clone(),
                feature_dim: x.dim(),
                svm_c,
                test_images: test.len(),
            };
            self.cache.store("evaluate", &key, json!({ "map": map }), |d| {
                fs::write(d.join(RESULTS_TSV), summary.to_tsv())?;
                fs::write(d.join(RESULTS_JSON), serde_json::to_vec_pretty(&summary)?)?;
                Ok(())
            })?;
        }
        let dir = self.cache.require("evaluate", &key)?;
        let summary = self.load_summary()?;
        fs::create_dir_all(&self.cfg.out_dir)?;
        for f in [RESULTS_TSV, RESULTS_JSON] {
            copy_if_changed(&dir.join(f), &self.cfg.out_dir.join(f))?;
        }
        self.cache.log_stage(
            "evaluate",
            &key,
            hit,
            start.elapsed().as_millis(),
            &format!("mAP={:.4}", summary.map),
        );
        Ok(summary)
    }

    pub fn load_summary(&self) -> Result<EvalSummary> {
        let dir = self.cache.require("evaluate", &self.eval_key())?;
        Ok(serde_json::from_slice(&fs::read(dir.join(RESULTS_JSON))?)?)
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<EvalSummary> {
        self.run_extract()?;
        self.run_train_agg()?;
        self.run_encode()?;
        self.run_train_svm()?;
        let summary = self.run_evaluate()?;
        crate::report::run_report(self)?;
        Ok(summary)
    }
}

fn class_ap(
    model: &LinearModel,
    x: &FeatureMatrix,
    relevant: &[bool],
    mode: deepbow_core::eval::ApMode,
) -> Result<Option<f64>> {
    if !relevant.iter().any(|&r| r) {
        return Ok(None);
    }
    let scores = model.decision_scores(x)?;
    Ok(Some(average_precision(
        &ScoredLabels::new(scores, relevant.to_vec())?,
        mode,
    )))
}

/// Copies `src` over `dst` unless the contents already match.
pub fn copy_if_changed(src: &Path, dst: &Path) -> Result<()> {
    let bytes = fs::read(src)?;
    if fs::read(dst).ok().as_deref() != Some(&bytes[..]) {
        fs::write(dst, bytes)?;
    }
    Ok(())
}
