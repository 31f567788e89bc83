//! Content-addressed artifact store and stage log.
//!
//! Every artifact lives in `<root>/<stage>/<key>/`, where the key is a
//! SHA-256 digest over the stage's upstream keys and configuration. A
//! directory is complete once its `meta.json` exists; artifacts are built in
//! a scratch directory and renamed into place.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const META_FILE: &str = "meta.json";
pub const LOG_FILE: &str = "pipeline.log";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Key(String);

impl Key {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn short(&self) -> &str {
        &self.0[..12]
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Accumulates named fields into a digest. Field names are hashed with their
/// values so reordering or renaming changes the key.
pub struct KeyBuilder {
    hasher: Sha256,
}

impl KeyBuilder {
    pub fn new(stage: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"deepbow-cache-v1\0");
        hasher.update(stage.as_bytes());
        Self { hasher }
    }

    pub fn field(mut self, name: &str, value: &impl Serialize) -> Self {
        let encoded = serde_json::to_vec(value).expect("cache key fields serialize");
        self.hasher.update(b"\0");
        self.hasher.update(name.as_bytes());
        self.hasher.update(b"=");
        self.hasher.update((encoded.len() as u64).to_le_bytes());
        self.hasher.update(&encoded);
        self
    }

    pub fn finish(self) -> Key {
        Key(format!("{:x}", self.hasher.finalize()))
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(digest_bytes(&bytes))
}

pub struct Cache {
    root: PathBuf,
    log: Mutex<fs::File>,
}

impl Cache {
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating cache directory {}", root.display()))?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(root.join(LOG_FILE))
            .with_context(|| format!("opening {}", root.join(LOG_FILE).display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            log: Mutex::new(log),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, stage: &str, key: &Key) -> PathBuf {
        self.root.join(stage).join(key.as_str())
    }

    pub fn is_complete(&self, stage: &str, key: &Key) -> bool {
        self.dir(stage, key).join(META_FILE).is_file()
    }

    /// Returns the artifact directory of an upstream stage, or an error
    /// naming the stage that has to run first.
    pub fn require(&self, stage: &str, key: &Key) -> Result<PathBuf> {
        let dir = self.dir(stage, key);
        let meta_path = dir.join(META_FILE);
        if !meta_path.is_file() {
            bail!(
                "missing upstream artifact: stage `{stage}` has no output for this configuration (key {}); run `deepbow {stage}` or `deepbow pipeline` first",
                key.short()
            );
        }
        let meta: Value = serde_json::from_slice(&fs::read(&meta_path)?)
            .with_context(|| format!("parsing {}", meta_path.display()))?;
        if meta.get("key").and_then(Value::as_str) != Some(key.as_str())
            || meta.get("stage").and_then(Value::as_str) != Some(stage)
        {
            bail!(
                "stale artifact in {}: its metadata does not match stage `{stage}` key {}; delete it and rerun",
                dir.display(),
                key.short()
            );
        }
        Ok(dir)
    }

    /// Builds an artifact with `build` writing into a scratch directory, then
    /// records `meta.json` and moves it into place.
    pub fn store<F>(&self, stage: &str, key: &Key, extra_meta: Value, build: F) -> Result<PathBuf>
    where
        F: FnOnce(&Path) -> Result<()>,
    {
        let final_dir = self.dir(stage, key);
        let parent = final_dir.parent().expect("artifact directories have a parent");
        fs::create_dir_all(parent)?;
        let scratch = parent.join(format!(".tmp-{}-{}", key.as_str(), std::process::id()));
        if scratch.exists() {
            fs::remove_dir_all(&scratch)?;
        }
        fs::create_dir_all(&scratch)?;
        build(&scratch)?;
        let meta = json!({ "stage": stage, "key": key.as_str(), "info": extra_meta });
        fs::write(scratch.join(META_FILE), serde_json::to_vec_pretty(&meta)?)?;
        if final_dir.exists() {
            fs::remove_dir_all(&final_dir)?;
        }
        fs::rename(&scratch, &final_dir).with_context(|| format!("moving artifact into {}", final_dir.display()))?;
        Ok(final_dir)
    }

    /// Writes one `stage=... key=... cache=hit|miss elapsed_ms=...` line to
    /// stderr and the cache log.
    pub fn log_stage(&self, stage: &str, key: &Key, hit: bool, elapsed_ms: u128, extra: &str) {
        let mut line = format!(
            "stage={stage} key={} cache={} elapsed_ms={elapsed_ms}",
            key.short(),
            if hit { "hit" } else { "miss" }
        );
        if !extra.is_empty() {
            line.push(' ');
            line.push_str(extra);
        }
        eprintln!("{line}");
        if let Ok(mut f) = self.log.lock() {
            let _ = writeln!(f, "{line}");
        }
    }
}
