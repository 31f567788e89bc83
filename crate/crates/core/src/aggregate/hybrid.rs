use std::fmt;
use std::str::FromStr;

use super::{bow_encode, fv_encode, AggregateError, Codebook, DescriptorSet, FisherOptions, GmmModel};
use crate::tensor::Tensor3;

/// How the layer subset `𝓛` is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubsetStrategy {
    /// `{L}`
    Single(usize),
    /// `{1, …, L}`
    First(usize),
    /// `{n, n−1, …, n−L+1}` where `n` is the number of non-dense layers.
    Last(usize),
    /// Explicit indices in the given order.
    List(Vec<usize>),
}

impl FromStr for SubsetStrategy {
    type Err = AggregateError;

    /// Parses `single:L`, `first:L`, `last:L` or `list:a,b,c`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AggregateError::InvalidSubset(format!("cannot parse layer subset `{s}`"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let num = |a: &str| a.trim().parse::<usize>().map_err(|_| bad());
        Ok(match kind.trim() {
            "single" => SubsetStrategy::Single(num(arg)?),
            "first" => SubsetStrategy::First(num(arg)?),
            "last" => SubsetStrategy::Last(num(arg)?),
            "list" => SubsetStrategy::List(arg.split(',').map(num).collect::<Result<_, _>>()?),
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for SubsetStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetStrategy::Single(l) => write!(f, "single:{l}"),
            SubsetStrategy::First(l) => write!(f, "first:{l}"),
            SubsetStrategy::Last(l) => write!(f, "last:{l}"),
            SubsetStrategy::List(ls) => {
                let parts: Vec<String> = ls.iter().map(ToString::to_string).collect();
                write!(f, "list:{}", parts.join(","))
            }
        }
    }
}

/// A strategy resolved against a network with `nondense` spatial layers.
/// Segment order in hybrid features follows [`LayerSubset::layers`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSubset {
    strategy: SubsetStrategy,
    layers: Vec<usize>,
}

impl LayerSubset {
    pub fn resolve(strategy: SubsetStrategy, nondense: usize) -> Result<Self, AggregateError> {
        let count_ok = |l: usize| {
            if l == 0 || l > nondense {
                Err(AggregateError::InvalidSubset(format!(
                    "{strategy} needs 1 <= L <= {nondense}"
                )))
            } else {
                Ok(l)
            }
        };
        let layers = match &strategy {
            SubsetStrategy::Single(l) => vec![count_ok(*l)?],
            SubsetStrategy::First(l) => (1..=count_ok(*l)?).collect(),
            SubsetStrategy::Last(l) => (nondense + 1 - count_ok(*l)?..=nondense).rev().collect(),
            SubsetStrategy::List(ls) => {
                if ls.is_empty() {
                    return Err(AggregateError::InvalidSubset("empty layer list".into()));
                }
                for (i, &l) in ls.iter().enumerate() {
                    count_ok(l)?;
                    if ls[..i].contains(&l) {
                        return Err(AggregateError::InvalidSubset(format!("layer {l} listed twice")));
                    }
                }
                ls.clone()
            }
        };
        Ok(Self { strategy, layers })
    }

    pub fn strategy(&self) -> &SubsetStrategy {
        &self.strategy
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Bow,
    Fisher,
    /// Fully connected output appended without encoding.
    RawFc,
}

impl SegmentKind {
    pub fn code(self) -> u8 {
        match self {
            SegmentKind::Bow => 0,
            SegmentKind::Fisher => 1,
            SegmentKind::RawFc => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SegmentKind::Bow),
            1 => Some(SegmentKind::Fisher),
            2 => Some(SegmentKind::RawFc),
            _ => None,
        }
    }
}

/// A trained per-layer aggregator.
#[derive(Debug, Clone)]
pub enum EncoderModel {
    Bow(Codebook),
    Fisher { gmm: GmmModel, options: FisherOptions },
}

impl EncoderModel {
    pub fn layer(&self) -> usize {
        match self {
            EncoderModel::Bow(cb) => cb.layer(),
            EncoderModel::Fisher { gmm, .. } => gmm.layer(),
        }
    }

    /// Length of the encoded segment.
    pub fn output_dim(&self) -> usize {
        match self {
            EncoderModel::Bow(cb) => cb.len(),
            EncoderModel::Fisher { gmm, .. } => gmm.components() * gmm.dim(),
        }
    }
}

/// One encoded (or raw) segment of a hybrid feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFeature {
    pub layer: usize,
    pub kind: SegmentKind,
    pub values: Vec<f64>,
}

/// Encodes one layer's descriptor set with that layer's aggregator.
pub fn encode_layer(set: &DescriptorSet, model: &EncoderModel) -> Result<LayerFeature, AggregateError> {
    if set.layer() != model.layer() {
        return Err(AggregateError::LayerMismatch {
            model: model.layer(),
            set: set.layer(),
        });
    }
    let (kind, values) = match model {
        EncoderModel::Bow(cb) => (SegmentKind::Bow, bow_encode(set, cb)?),
        EncoderModel::Fisher { gmm, options } => (SegmentKind::Fisher, fv_encode(set, gmm, options)?),
    };
    Ok(LayerFeature {
        layer: set.layer(),
        kind,
        values,
    })
}

/// Concatenated per-layer features, optionally followed by raw fully
/// connected outputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridFeature {
    segments: Vec<LayerFeature>,
}

impl HybridFeature {
    pub fn segments(&self) -> &[LayerFeature] {
        &self.segments
    }

    /// Total dimension `D`.
    pub fn total_dim(&self) -> usize {
        self.segments.iter().map(|s| s.values.len()).sum()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_dim());
        for s in &self.segments {
            out.extend_from_slice(&s.values);
        }
        out
    }
}

/// Concatenates one feature per subset layer, in subset order. Features for
/// layers outside the subset are ignored.
pub fn concat_layers(features: &[LayerFeature], subset: &LayerSubset) -> Result<HybridFeature, AggregateError> {
    let mut segments = Vec::with_capacity(subset.layers().len());
    for &l in subset.layers() {
        let mut matching = features.iter().filter(|f| f.layer == l && f.kind != SegmentKind::RawFc);
        let f = matching.next().ok_or(AggregateError::MissingLayer(l))?;
        if matching.next().is_some() {
            return Err(AggregateError::InvalidSubset(format!(
                "two features supplied for layer {l}"
            )));
        }
        segments.push(f.clone());
    }
    Ok(HybridFeature { segments })
}

/// Appends raw fully connected outputs (each `1×1×units`) as extra segments,
/// in the order given.
pub fn append_fc(feature: HybridFeature, fc_outputs: &[(usize, &Tensor3)]) -> Result<HybridFeature, AggregateError> {
    let mut segments = feature.segments;
    for &(layer, t) in fc_outputs {
        if t.rows() != 1 || t.cols() != 1 {
            return Err(AggregateError::NotFlat {
                layer,
                shape: t.shape().to_string(),
            });
        }
        segments.push(LayerFeature {
            layer,
            kind: SegmentKind::RawFc,
            values: t.as_slice().iter().map(|&v| v as f64).collect(),
        });
    }
    Ok(HybridFeature { segments })
}
