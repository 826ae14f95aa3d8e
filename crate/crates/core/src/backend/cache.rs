use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_digest: String,
    pub response: BackendResponse,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

pub fn parse_cache_line(line: &str) -> Result<CacheEntry, serde_json::Error> {
    serde_json::from_str(line)
}

/// Append-only JSONL response cache keyed by request digest. When a digest
/// occurs more than once the last entry wins. Unparsable lines (e.g. a
/// truncated final line after a crash) are skipped on load.
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, BackendResponse>>,
    file: Option<Mutex<File>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            entries: Mutex::new(HashMap::new()),
            file: None,
        }
    }

    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let err = |e: std::io::Error| BackendError::Cache(format!("{}: {e}", path.display()));
        let mut entries = HashMap::new();
        let mut needs_newline = false;
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(err)?;
            needs_newline = !text.is_empty() && !text.ends_with('\n');
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match parse_cache_line(line) {
                    Ok(e) => {
                        entries.insert(e.request_digest, e.response);
                    }
                    Err(e) => log::warn!("{}:{}: skipping unreadable cache line: {e}", path.display(), i + 1),
                }
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(err)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        if needs_newline {
            file.write_all(b"\n").map_err(err)?;
        }
        Ok(ResponseCache {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
            file: Some(Mutex::new(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, digest: &str) -> Option<BackendResponse> {
        self.entries.lock().unwrap().get(digest).cloned()
    }

    pub fn insert(&self, digest: &str, response: &BackendResponse) -> Result<(), BackendError> {
        if let Some(file) = &self.file {
            let created_at = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let entry = CacheEntry {
                request_digest: digest.to_string(),
                response: response.clone(),
                created_at,
            };
            let mut line = serde_json::to_string(&entry).expect("cache entry serializes");
            line.push('\n');
            let mut f = file.lock().unwrap();
            f.write_all(line.as_bytes())
                .map_err(|e| BackendError::Cache(e.to_string()))?;
        }
        self.entries
            .lock()
            .unwrap()
            .insert(digest.to_string(), response.clone());
        Ok(())
    }
}
