use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// Relative to the manifest's directory.
    pub path: String,
    pub split: Split,
    /// Sorted, deduplicated class indices.
    pub labels: Vec<usize>,
}

impl Record {
    pub fn has_label(&self, class: usize) -> bool {
        self.labels.binary_search(&class).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub classes: Vec<String>,
    pub records: Vec<Record>,
}

const CLASSES_DIRECTIVE: &str = "@classes";

/// Parses the tab-separated manifest format:
///
/// ```text
/// # comment
/// @classes<TAB>cat,dog
/// images/0001.jpg<TAB>train<TAB>cat,dog
/// images/0002.jpg<TAB>test<TAB>
/// ```
///
/// Without an `@classes` line the vocabulary is every label seen, in order
/// of first appearance.
pub fn parse_manifest(text: &str) -> Result<Manifest, DatasetError> {
    let mut vocab: Option<Vec<String>> = None;
    let mut inferred: Vec<String> = Vec::new();
    let mut records = Vec::new();
    let mut raw_labels: Vec<(usize, Vec<String>)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim_end_matches('\r');
        if content.trim().is_empty() || content.trim_start().starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| DatasetError::Malformed {
            line,
            reason: reason.to_string(),
        };
        if let Some(rest) = content.strip_prefix(CLASSES_DIRECTIVE) {
            if vocab.is_some() || !records.is_empty() {
                return Err(malformed("@classes must appear once, before any record"));
            }
            let list = rest
                .strip_prefix('\t')
                .ok_or_else(|| malformed("expected a tab after @classes"))?;
            let names = split_labels(list);
            if names.is_empty() {
                return Err(malformed("@classes lists no classes"));
            }
            for (i, n) in names.iter().enumerate() {
                if names[..i].contains(n) {
                    return Err(malformed(&format!("class `{n}` listed twice")));
                }
            }
            vocab = Some(names);
            continue;
        }
        let fields: Vec<&str> = content.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(&format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let path = fields[0].trim();
        if path.is_empty() {
            return Err(malformed("empty image path"));
        }
        let split: Split = fields[1].trim().parse().map_err(|e: String| malformed(&e))?;
        if let Some(&first) = seen.get(path) {
            return Err(DatasetError::DuplicatePath {
                line,
                path: path.to_string(),
                first,
            });
        }
        seen.insert(path.to_string(), line);
        let labels = split_labels(fields[2]);
        for l in &labels {
            if !inferred.contains(l) {
                inferred.push(l.clone());
            }
        }
        raw_labels.push((line, labels));
        records.push(Record {
            path: path.to_string(),
            split,
            labels: Vec::new(),
        });
    }
    if records.is_empty() {
        return Err(DatasetError::NoRecords);
    }
    let classes = vocab.unwrap_or(inferred);
    for (record, (line, labels)) in records.iter_mut().zip(raw_labels) {
        for label in labels {
            let idx = classes
                .iter()
                .position(|c| *c == label)
                .ok_or(DatasetError::UnknownLabel { line, label })?;
            record.labels.push(idx);
        }
        record.labels.sort_unstable();
        record.labels.dedup();
    }
    Ok(Manifest { classes, records })
}

fn split_labels(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// `counts[class][split]` in [`Split::ALL`] order.
    pub fn counts(&self) -> Vec<[usize; 3]> {
        let mut counts = vec![[0usize; 3]; self.classes.len()];
        for r in &self.records {
            let s = Split::ALL.iter().position(|&x| x == r.split).unwrap();
            for &c in &r.labels {
                counts[c][s] += 1;
            }
        }
        counts
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Renders the manifest in the text format accepted by [`parse_manifest`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{CLASSES_DIRECTIVE}\t{}\n", self.classes.join(","));
        for r in &self.records {
            let labels: Vec<&str> = r.labels.iter().map(|&c| self.classes[c].as_str()).collect();
            out.push_str(&format!("{}\t{}\t{}\n", r.path, r.split, labels.join(",")));
        }
        out
    }
}
