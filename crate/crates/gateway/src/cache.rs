use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::provider::Usage;
use crate::request::CacheKey;

/// On-disk record for one cached response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEnvelope {
    pub request_digest: CacheKey,
    /// Seconds since the Unix epoch.
    pub stored_at: u64,
    pub body: String,
    pub tokens: Option<Usage>,
}

/// Write-once response cache: an in-memory map backed optionally by a
/// directory holding one `<digest>.json` file per key.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<CacheKey, CacheEnvelope>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| cache_err(&dir, e))?;
        Ok(ResponseCache {
            dir: Some(dir),
            memory: Mutex::default(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(&self, key: &CacheKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEnvelope>, GatewayError> {
        if let Some(hit) = self.memory.lock().unwrap().get(key) {
            return Ok(Some(hit.clone()));
        }
        let Some(path) = self.path_for(key) else {
            return Ok(None);
        };
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(&path, e)),
        };
        let envelope: CacheEnvelope = serde_json::from_slice(&raw)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        if &envelope.request_digest != key {
            return Err(GatewayError::Cache(format!(
                "{}: digest mismatch",
                path.display()
            )));
        }
        self.memory
            .lock()
            .unwrap()
            .insert(key.clone(), envelope.clone());
        Ok(Some(envelope))
    }

    /// Stores `envelope` unless the key is already present; returns the entry
    /// that ends up cached (the earlier one if there was one).
    pub fn put(&self, envelope: CacheEnvelope) -> Result<CacheEnvelope, GatewayError> {
        let key = envelope.request_digest.clone();
        if let Some(existing) = self.get(&key)? {
            return Ok(existing);
        }
        if let Some(path) = self.path_for(&key) {
            write_once(&path, &envelope)?;
        }
        let mut mem = self.memory.lock().unwrap();
        Ok(mem.entry(key).or_insert(envelope).clone())
    }

    pub fn len(&self) -> usize {
        self.memory.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_once(path: &Path, envelope: &CacheEnvelope) -> Result<(), GatewayError> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    let bytes = serde_json::to_vec_pretty(envelope).expect("envelope encodes as JSON");
    let mut f = fs::File::create(&tmp).map_err(|e| cache_err(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| cache_err(&tmp, e))?;
    f.sync_all().map_err(|e| cache_err(&tmp, e))?;
    drop(f);
    // hard_link refuses to replace an existing file, which keeps entries write-once.
    let linked = fs::hard_link(&tmp, path);
    let _ = fs::remove_file(&tmp);
    match linked {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Ok(()),
        Err(e) => Err(cache_err(path, e)),
    }
}

fn cache_err(path: &Path, e: io::Error) -> GatewayError {
    GatewayError::Cache(format!("{}: {e}", path.display()))
}
