//! Atomic file writes, hashing and run manifests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = match dir {
        Some(d) => d.join(tmp_name),
        None => PathBuf::from(tmp_name),
    };
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Hash of the canonical (key-sorted) JSON form of a serialisable value.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(sha256_hex(serde_json::to_string(&v)?.as_bytes()))
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Run manifest written next to every set of outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub master_seed: u64,
    /// Per-task seeds keyed by task name.
    pub seeds: BTreeMap<String, u64>,
    /// Output files (relative to the manifest directory) and their SHA-256.
    pub outputs: BTreeMap<String, String>,
    /// Input files and their SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub created_unix: u64,
    /// False while a run is still writing outputs.
    #[serde(default)]
    pub complete: bool,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, config: &T, master_seed: u64) -> Result<Self> {
        Ok(Manifest {
            tool: "srbp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            config_hash: config_hash(config)?,
            master_seed,
            seeds: BTreeMap::new(),
            outputs: BTreeMap::new(),
            inputs: BTreeMap::new(),
            wall_time_s: 0.0,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            complete: false,
        })
    }

    /// Writes `bytes` to `dir/name` atomically and records its hash.
    pub fn add_output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        atomic_write(&dir.join(name), bytes)?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        atomic_write(&dir.join(MANIFEST_NAME), &serde_json::to_vec_pretty(self)?)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let bytes = std::fs::read(dir.join(MANIFEST_NAME))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Recomputes the config hash and every output hash.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let h = config_hash(&self.config)?;
        if h != self.config_hash {
            return Err(Error::integrity(format!(
                "config hash mismatch: manifest records {}, config hashes to {h}",
                self.config_hash
            )));
        }
        for (name, want) in &self.outputs {
            let got = sha256_file(&dir.join(name))?;
            if &got != want {
                return Err(Error::integrity(format!("{name}: hash {got} does not match manifest {want}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("test", &serde_json::json!({"b": 1, "a": 2}), 5).unwrap();
        m.add_output(dir.path(), "out.csv", b"x\n1\n").unwrap();
        m.write(dir.path()).unwrap();
        let back = Manifest::read(dir.path()).unwrap();
        back.verify(dir.path()).unwrap();
        std::fs::write(dir.path().join("out.csv"), b"x\n2\n").unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::Integrity(_))));
        let mut bad = back.clone();
        bad.config = serde_json::json!({"b": 2});
        assert!(matches!(bad.verify(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn config_hash_ignores_key_order() {
        let a = serde_json::json!({"x": 1, "y": [1, 2]});
        let b: serde_json::Value = serde_json::from_str(r#"{"y":[1,2],"x":1}"#).unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    }
}
