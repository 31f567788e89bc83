//! Run configuration: a TOML file whose every field can be overridden by a
//! command-line flag of the same name.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use deepbow_core::aggregate::{FisherOptions, ResidualScaling, SubsetStrategy};
use deepbow_core::dataset::{ChannelOrder, ResizeMode};
use deepbow_core::eval::ApMode;
use deepbow_core::svm::SvmConfig;
use deepbow_core::ArchitectureDescriptor;
use serde::{Deserialize, Serialize};

pub const BUILTIN_REFERENCE: &str = "builtin:reference";
pub const BUILTIN_TOY: &str = "builtin:toy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Bow,
    #[serde(alias = "fv")]
    Fisher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    InverseVariance,
    InverseStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApKind {
    #[serde(rename = "11-point")]
    ElevenPoint,
    #[serde(rename = "all-points")]
    AllPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub order: ChannelOrder,
    pub mode: ResizeMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            order: ChannelOrder::Rgb,
            mode: ResizeMode::Warp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub encoder: EncoderKind,
    /// Codebook size `N` for BoW, mixture components `m` for Fisher.
    pub size: usize,
    /// `single:L`, `first:L`, `last:L` or `list:a,b,...`.
    pub layers: String,
    /// Dense layer indices whose raw outputs are appended.
    pub append_fc: Vec<usize>,
    pub sample_capacity: usize,
    pub kmeans_iters: usize,
    pub em_iters: usize,
    pub em_tol: f64,
    pub fisher_scaling: Scaling,
    pub fisher_normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Bow,
            size: 500,
            layers: "last:5".into(),
            append_fc: Vec::new(),
            sample_capacity: deepbow_core::aggregate::DEFAULT_CAPACITY,
            kmeans_iters: 50,
            em_iters: 50,
            em_tol: 1e-6,
            fisher_scaling: Scaling::InverseVariance,
            fisher_normalize: false,
        }
    }
}

impl FeatureConfig {
    pub fn subset(&self) -> Result<SubsetStrategy> {
        Ok(self.layers.parse()?)
    }

    pub fn fisher_options(&self) -> FisherOptions {
        FisherOptions {
            scaling: match self.fisher_scaling {
                Scaling::InverseVariance => ResidualScaling::InverseVariance,
                Scaling::InverseStd => ResidualScaling::InverseStd,
            },
            normalize: self.fisher_normalize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub c: f64,
    /// Select C from {2^-5, ..., 2^5} by validation mAP, then retrain on
    /// train+val.
    pub grid: bool,
    pub l2_normalize: bool,
    pub max_epochs: usize,
    pub eps: f64,
    pub bias_feature: f64,
}

impl Default for SvmSection {
    fn default() -> Self {
        let d = SvmConfig::default();
        Self {
            c: d.c,
            grid: false,
            l2_normalize: true,
            max_epochs: d.max_epochs,
            eps: d.eps,
            bias_feature: d.bias_feature,
        }
    }
}

impl SvmSection {
    pub fn solver(&self, c: f64, seed: u64) -> SvmConfig {
        SvmConfig {
            c,
            bias_feature: self.bias_feature,
            max_epochs: self.max_epochs,
            eps: self.eps,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ap: ApKind,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            ap: ApKind::ElevenPoint,
        }
    }
}

impl EvalSection {
    pub fn mode(&self) -> ApMode {
        match self.ap {
            ApKind::ElevenPoint => ApMode::ElevenPoint,
            ApKind::AllPoints => ApMode::AllPoints,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    /// Descriptor file, or `builtin:reference` / `builtin:toy`.
    pub arch: String,
    pub weights: PathBuf,
    pub mean: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads for image-level work; 0 uses every core.
    pub workers: usize,
    pub deterministic: bool,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub svm: SvmSection,
    pub eval: EvalSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.tsv"),
            arch: BUILTIN_REFERENCE.into(),
            weights: PathBuf::from("weights.hfw"),
            mean: None,
            cache_dir: PathBuf::from("cache"),
            out_dir: PathBuf::from("out"),
            seed: 0,
            workers: 0,
            deterministic: false,
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            svm: SvmSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.weights);
        fix(&mut self.cache_dir);
        fix(&mut self.out_dir);
        if let Some(m) = self.mean.as_mut() {
            fix(m);
        }
        if !self.arch.starts_with("builtin:") && Path::new(&self.arch).is_relative() {
            self.arch = base.join(&self.arch).to_string_lossy().into_owned();
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn descriptor(&self) -> Result<ArchitectureDescriptor> {
        Ok(match self.arch.as_str() {
            BUILTIN_REFERENCE => ArchitectureDescriptor::reference(),
            BUILTIN_TOY => ArchitectureDescriptor::toy(),
            path => ArchitectureDescriptor::load(path).with_context(|| format!("loading descriptor {path}"))?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.size == 0 {
            bail!("features.size must be positive");
        }
        if self.svm.c.is_nan() || self.svm.c <= 0.0 {
            bail!("svm.c must be positive");
        }
        self.features.subset()?;
        Ok(())
    }
}

/// Flags shared by every pipeline subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Architecture descriptor (TOML) or builtin:reference / builtin:toy.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Mean file with an `input.mean` tensor.
    #[arg(long)]
    pub mean: Option<PathBuf>,
    #[arg(long = "cache", visible_alias = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long = "out")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Accepted for compatibility; reductions are always ordered.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, value_parser = parse_enum::<EncoderKind>)]
    pub encoder: Option<EncoderKind>,
    /// Codebook size (BoW) or number of mixture components (Fisher).
    #[arg(long, visible_aliases = ["codebook-size", "gmm-components"])]
    pub size: Option<usize>,
    /// Layer subset: single:L, first:L, last:L or list:a,b,...
    #[arg(long)]
    pub layers: Option<String>,
    /// Dense layer outputs to append, e.g. 11,12,13.
    #[arg(long, value_delimiter = ',')]
    pub append_fc: Option<Vec<usize>>,
    /// Power and l2 normalization of each Fisher segment.
    #[arg(long)]
    pub fv_normalize: bool,
    #[arg(long = "svm-c")]
    pub svm_c: Option<f64>,
    /// Select C on the validation split.
    #[arg(long)]
    pub grid: bool,
    /// Train on unnormalized features.
    #[arg(long)]
    pub no_l2: bool,
    #[arg(long, value_parser = parse_enum::<ApKind>)]
    pub ap: Option<ApKind>,
    #[arg(long, value_parser = parse_enum::<ChannelOrder>)]
    pub order: Option<ChannelOrder>,
    #[arg(long, value_parser = parse_enum::<ResizeMode>)]
    pub resize: Option<ResizeMode>,
}

fn parse_enum<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T, String> {
    T::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(s)).map_err(|e| e.to_string())
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(cfg.manifest, self.manifest);
        set!(cfg.arch, self.arch);
        set!(cfg.weights, self.weights);
        set!(cfg.cache_dir, self.cache_dir);
        set!(cfg.out_dir, self.out_dir);
        set!(cfg.seed, self.seed);
        set!(cfg.workers, self.workers);
        set!(cfg.features.encoder, self.encoder);
        set!(cfg.features.size, self.size);
        set!(cfg.features.layers, self.layers);
        set!(cfg.features.append_fc, self.append_fc);
        set!(cfg.svm.c, self.svm_c);
        set!(cfg.eval.ap, self.ap);
        set!(cfg.preprocess.order, self.order);
        set!(cfg.preprocess.mode, self.resize);
        if self.mean.is_some() {
            cfg.mean = self.mean.clone();
        }
        cfg.deterministic |= self.deterministic;
        cfg.svm.grid |= self.grid;
        cfg.features.fisher_normalize |= self.fv_normalize;
        if self.no_l2 {
            cfg.svm.l2_normalize = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_rebase() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "manifest = \"m.tsv\"\narch = \"builtin:toy\"\n[features]\nencoder = \"fisher\"\nsize = 4\nlayers = \"list:2,1\"\n",
        )
        .unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.manifest, dir.path().join("m.tsv"));
        assert_eq!(cfg.arch, BUILTIN_TOY);
        assert_eq!(cfg.features.encoder, EncoderKind::Fisher);
        let again: PipelineConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn flags_override_file() {
        let args = CommonArgs {
            size: Some(8),
            layers: Some("single:2".into()),
            ap: Some(ApKind::AllPoints),
            no_l2: true,
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.features.size, 8);
        assert_eq!(cfg.features.layers, "single:2");
        assert_eq!(cfg.eval.ap, ApKind::AllPoints);
        assert!(!cfg.svm.l2_normalize);
        assert!(parse_enum::<ApKind>("11-point").is_ok());
        assert!(parse_enum::<EncoderKind>("vlad").is_err());
        assert_eq!(parse_enum::<EncoderKind>("fv").unwrap(), EncoderKind::Fisher);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(toml::from_str::<PipelineConfig>("bogus = 1").is_err());
        let bad = CommonArgs {
            layers: Some("middle:3".into()),
            ..Default::default()
        };
        assert!(bad.resolve().is_err());
    }
}
