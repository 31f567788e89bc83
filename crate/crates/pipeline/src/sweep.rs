//! One full pipeline run per value of a single configuration axis.

use std::fmt;
use std::fs;
use std::str::FromStr;

use anyhow::{bail, Result};
use deepbow_core::aggregate::{LayerSubset, SubsetStrategy};

use crate::config::PipelineConfig;
use crate::report::{sweep_chart, write_if_changed};
use crate::stages::Context;

pub const SWEEP_DIR: &str = "sweeps";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    LayerSubset,
    CodebookSize,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::LayerSubset => "layer_subset",
            Axis::CodebookSize => "codebook_size",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "layer_subset" | "layers" => Ok(Axis::LayerSubset),
            "codebook_size" | "size" => Ok(Axis::CodebookSize),
            _ => Err(format!(
                "unknown sweep axis `{s}` (expected layer_subset or codebook_size)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub map: f64,
    pub feature_dim: usize,
}

/// Splits a value list. Layer subsets are separated by `;` because `list:`
/// subsets contain commas; codebook sizes accept `,` or `;`.
pub fn parse_values(axis: Axis, text: &str) -> Result<Vec<String>> {
    let seps: &[char] = match axis {
        Axis::LayerSubset => &[';'],
        Axis::CodebookSize => &[',', ';'],
    };
    let values: Vec<String> = text
        .split(seps)
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    Ok(values)
}

fn ordered(axis: Axis, base: &PipelineConfig, values: &[String]) -> Result<Vec<(String, PipelineConfig)>> {
    let nondense = base.descriptor()?.nondense_count();
    let mut runs = Vec::new();
    for v in values {
        let mut cfg = base.clone();
        let rank = match axis {
            Axis::CodebookSize => {
                let n: usize = v
                    .parse()
                    .map_err(|_| anyhow::anyhow!("codebook size `{v}` is not an integer"))?;
                cfg.features.size = n;
                n
            }
            Axis::LayerSubset => {
                let strategy: SubsetStrategy = v.parse()?;
                let len = LayerSubset::resolve(strategy, nondense)?.layers().len();
                cfg.features.layers = v.clone();
                len
            }
        };
        cfg.out_dir = base.out_dir.join(SWEEP_DIR).join(axis.as_str()).join(sanitize(v));
        cfg.validate()?;
        runs.push((rank, v.clone(), cfg));
    }
    runs.sort_by_key(|r| r.0);
    Ok(runs.into_iter().map(|(_, v, c)| (v, c)).collect())
}

fn sanitize(v: &str) -> String {
    v.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

pub fn to_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value\tmAP\tdim\n");
    for r in rows {
        out.push_str(&format!("{}\t{:.6}\t{}\n", r.value, r.map, r.feature_dim));
    }
    out
}

/// Runs the whole pipeline for every value, ordered by codebook size or by
/// subset length, and writes `<out>/sweeps/<axis>.tsv` and `.svg`. Upstream
/// artifacts shared between values come from the cache.
pub fn run_sweep(base: &PipelineConfig, axis: Axis, values: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let mut rows = Vec::new();
    for (value, cfg) in ordered(axis, base, values)? {
        log::info!("sweep {axis}={value}");
        let summary = Context::new(cfg)?.run_all()?;
        rows.push(SweepRow {
            value,
            map: summary.map,
            feature_dim: summary.feature_dim,
        });
    }
    let dir = base.out_dir.join(SWEEP_DIR);
    fs::create_dir_all(&dir)?;
    write_if_changed(&dir.join(format!("{axis}.tsv")), &to_tsv(&rows))?;
    let points: Vec<(String, f64)> = rows.iter().map(|r| (r.value.clone(), r.map)).collect();
    write_if_changed(&dir.join(format!("{axis}.svg")), &sweep_chart(axis.as_str(), &points))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_parsing_and_order() {
        assert_eq!(parse_values(Axis::CodebookSize, "500, 30").unwrap(), ["500", "30"]);
        assert_eq!(
            parse_values(Axis::LayerSubset, "list:1,2;last:1").unwrap(),
            ["list:1,2", "last:1"]
        );
        assert!(parse_values(Axis::LayerSubset, " ; ").is_err());
        let base = PipelineConfig {
            arch: crate::config::BUILTIN_TOY.into(),
            ..Default::default()
        };
        let runs = ordered(Axis::CodebookSize, &base, &["500".into(), "30".into()]).unwrap();
        assert_eq!(runs[0].1.features.size, 30);
        assert_eq!(runs[1].1.features.size, 500);
        let runs = ordered(Axis::LayerSubset, &base, &["last:3".into(), "single:2".into()]).unwrap();
        assert_eq!(runs[0].0, "single:2");
        assert!(ordered(Axis::CodebookSize, &base, &["x".into()]).is_err());
        assert_eq!("codebook-size".parse::<Axis>().unwrap(), Axis::CodebookSize);
    }
}
