//! `HFW1` container for named `f32` tensors.
//!
//! ```text
//! magic      4 bytes   "HFW1"
//! version    u32 LE    currently 1
//! count      u32 LE    number of records
//! record*    name_len u32 LE, name (UTF-8), rank u32 LE, dims u64 LE × rank,
//!            values f32 LE × Π dims
//! crc32      u32 LE    CRC-32 (IEEE) of every byte between the magic and the crc
//! ```

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"HFW1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic bytes (not an HFW1 container)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated container: {0}")]
    Truncated(&'static str),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("tensor `{name}`: {reason}")]
    InvalidRecord { name: String, reason: String },
    #[error("tensor `{0}` not found")]
    Missing(String),
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl TensorRecord {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Result<Self, ContainerError> {
        let name = name.into();
        validate_record(&name, &shape, values.len())?;
        Ok(Self { name, shape, values })
    }

    pub fn vector(name: impl Into<String>, values: Vec<f32>) -> Result<Self, ContainerError> {
        let len = values.len();
        Self::new(name, vec![len], values)
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

fn validate_record(name: &str, shape: &[usize], len: usize) -> Result<(), ContainerError> {
    let invalid = |reason: String| ContainerError::InvalidRecord {
        name: name.to_string(),
        reason,
    };
    if shape.contains(&0) {
        return Err(invalid(format!("shape {shape:?} has a zero dimension")));
    }
    let numel = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| invalid(format!("shape {shape:?} overflows")))?;
    if numel != len {
        return Err(invalid(format!("shape {shape:?} needs {numel} values, got {len}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightContainer {
    pub version: u32,
    pub records: Vec<TensorRecord>,
}

impl Default for WeightContainer {
    fn default() -> Self {
        Self {
            version: FORMAT_VERSION,
            records: Vec::new(),
        }
    }
}

impl WeightContainer {
    pub fn new(records: Vec<TensorRecord>) -> Result<Self, ContainerError> {
        check_unique(&records)?;
        Ok(Self {
            version: FORMAT_VERSION,
            records,
        })
    }

    pub fn get(&self, name: &str) -> Option<&TensorRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&TensorRecord, ContainerError> {
        self.get(name).ok_or_else(|| ContainerError::Missing(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.name.as_str())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ContainerError> {
        write_container(&self.records)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ContainerError> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|source| ContainerError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| ContainerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        read_container(&bytes)
    }
}

fn check_unique(records: &[TensorRecord]) -> Result<(), ContainerError> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.name.as_str()) {
            return Err(ContainerError::DuplicateName(r.name.clone()));
        }
    }
    Ok(())
}

pub fn write_container(records: &[TensorRecord]) -> Result<Vec<u8>, ContainerError> {
    check_unique(records)?;
    let payload: usize = records
        .iter()
        .map(|r| 8 + r.name.len() + 8 * r.shape.len() + 4 * r.values.len())
        .sum();
    let mut out = Vec::with_capacity(4 + 8 + payload + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        validate_record(&r.name, &r.shape, r.values.len())?;
        out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.extend_from_slice(&(r.shape.len() as u32).to_le_bytes());
        for &d in &r.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &r.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[MAGIC.len()..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(ContainerError::Truncated(what)),
        }
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_container(bytes: &[u8]) -> Result<WeightContainer, ContainerError> {
    if bytes.len() < MAGIC.len() {
        return Err(ContainerError::Truncated("magic"));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut cur = Cursor {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(ContainerError::UnsupportedVersion(version));
    }
    let count = cur.u32("tensor count")? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let name_len = cur.u32("name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "name")?)
            .map_err(|_| ContainerError::InvalidRecord {
                name: "<non-utf8>".into(),
                reason: "name is not valid UTF-8".into(),
            })?
            .to_string();
        let rank = cur.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank.min(64));
        for _ in 0..rank {
            let d = cur.u64("dims")?;
            shape.push(usize::try_from(d).map_err(|_| ContainerError::InvalidRecord {
                name: name.clone(),
                reason: format!("dimension {d} exceeds address space"),
            })?);
        }
        let numel =
            shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| ContainerError::InvalidRecord {
                    name: name.clone(),
                    reason: "shape overflows".into(),
                })?;
        let nbytes = numel.checked_mul(4).ok_or(ContainerError::Truncated("values"))?;
        let raw = cur.take(nbytes, "values")?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push(TensorRecord::new(name, shape, values)?);
    }
    let body_end = cur.pos;
    let stored = cur.u32("checksum")?;
    if cur.pos != bytes.len() {
        return Err(ContainerError::TrailingBytes(bytes.len() - cur.pos));
    }
    let computed = crc32fast::hash(&bytes[MAGIC.len()..body_end]);
    if stored != computed {
        return Err(ContainerError::ChecksumMismatch { stored, computed });
    }
    let mut container = WeightContainer::new(records)?;
    container.version = version;
    Ok(container)
}
