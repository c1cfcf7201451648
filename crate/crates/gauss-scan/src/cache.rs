//! Content-addressed cache for expensive constants.
//!
//! An entry is keyed by the constant's name, its dimension, a SHA-256 of
//! its parameters and the code version; a changed parameter or a new build
//! simply misses. Unreadable entries are recomputed and overwritten.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::report::{to_compact_string, to_pretty_string, CODE_VERSION};

#[derive(Serialize, Deserialize)]
struct Entry<T> {
    name: String,
    d: usize,
    params: Value,
    code_version: String,
    payload: T,
}

#[derive(Clone, Debug)]
pub struct ConstantCache {
    dir: PathBuf,
}

/// Whether a value came from disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
}

impl ConstantCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex digest of `(name, d, params, code version)`.
    pub fn key<P: Serialize>(name: &str, d: usize, params: &P) -> String {
        let canonical = to_compact_string(&serde_json::json!({
            "name": name,
            "d": d,
            "params": params,
            "code_version": CODE_VERSION,
        }));
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn path_for(&self, name: &str, d: usize, key: &str) -> PathBuf {
        let safe: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        self.dir.join(format!("{safe}-d{d}-{}.json", &key[..32]))
    }

    pub fn get<T: DeserializeOwned, P: Serialize>(&self, name: &str, d: usize, params: &P) -> Option<T> {
        let key = Self::key(name, d, params);
        let text = fs::read_to_string(self.path_for(name, d, &key)).ok()?;
        let entry: Entry<T> = serde_json::from_str(&text).ok()?;
        (entry.name == name && entry.d == d && entry.code_version == CODE_VERSION).then_some(entry.payload)
    }

    /// Writes through a temporary file and a rename, so readers never see
    /// half an entry.
    pub fn put<T: Serialize, P: Serialize>(&self, name: &str, d: usize, params: &P, payload: &T) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let key = Self::key(name, d, params);
        let path = self.path_for(name, d, &key);
        let entry = Entry {
            name: name.to_string(),
            d,
            params: serde_json::to_value(params).map_err(io::Error::other)?,
            code_version: CODE_VERSION.to_string(),
            payload,
        };
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, to_pretty_string(&entry))?;
        fs::rename(&tmp, &path)
    }

    pub fn get_or_compute<T, P, E, F>(&self, name: &str, d: usize, params: &P, compute: F) -> Result<(T, Lookup), E>
    where
        T: Serialize + DeserializeOwned,
        P: Serialize,
        F: FnOnce() -> Result<T, E>,
    {
        if let Some(v) = self.get(name, d, params) {
            return Ok((v, Lookup::Hit));
        }
        let v = compute()?;
        if let Err(e) = self.put(name, d, params, &v) {
            eprintln!("gauss-scan: could not write cache entry in {}: {e}", self.dir.display());
        }
        Ok((v, Lookup::Miss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miss_then_hit_with_identical_bits() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ConstantCache::new(dir.path().join("c"));
        let params = serde_json::json!({ "reps": 10 });
        let (v, l) = cache.get_or_compute::<f64, _, (), _>("J", 2, &params, || Ok(0.1 + 0.2)).unwrap();
        assert_eq!(l, Lookup::Miss);
        let (w, l) = cache.get_or_compute::<f64, _, (), _>("J", 2, &params, || panic!("should hit")).unwrap();
        assert_eq!(l, Lookup::Hit);
        assert_eq!(v.to_bits(), w.to_bits());
    }

    #[test]
    fn key_depends_on_every_part() {
        let p = serde_json::json!({ "reps": 10 });
        let q = serde_json::json!({ "reps": 11 });
        let k = ConstantCache::key("J", 2, &p);
        assert_ne!(k, ConstantCache::key("J", 3, &p));
        assert_ne!(k, ConstantCache::key("E", 2, &p));
        assert_ne!(k, ConstantCache::key("J", 2, &q));
        assert_eq!(k, ConstantCache::key("J", 2, &p));
    }

    #[test]
    fn corrupt_entries_are_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ConstantCache::new(dir.path());
        cache.put("G", 1, &1u8, &1.5f64).unwrap();
        for e in fs::read_dir(dir.path()).unwrap() {
            fs::write(e.unwrap().path(), "{ not json").unwrap();
        }
        let (v, l) = cache.get_or_compute::<f64, _, (), _>("G", 1, &1u8, || Ok(2.5)).unwrap();
        assert_eq!((v, l), (2.5, Lookup::Miss));
    }
}
