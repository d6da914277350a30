//! Content-addressed response cache: one file per key, named by its hex
//! digest. Entries are written to a temporary sibling and renamed into place,
//! so a reader never observes a partially written entry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RequestKind;

const MAGIC: &str = "mtp-cache v1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey(String);

impl CacheKey {
    /// Digest of the canonical JSON of `material`.
    pub fn digest<T: Serialize>(material: &T) -> Self {
        let bytes = serde_json::to_vec(material).expect("cache key material serializes");
        CacheKey(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub kind: RequestKind,
    pub model_id: String,
    pub backend: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub meta: CacheMeta,
    pub value: String,
}

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    reproducible: bool,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            reproducible: false,
        })
    }

    /// Zero `created_at` so cache contents are byte-stable across runs.
    pub fn reproducible(mut self, on: bool) -> Self {
        self.reproducible = on;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.as_str())
    }

    pub fn get(&self, key: &CacheKey) -> Option<CacheEntry> {
        let text = fs::read_to_string(self.path_for(key)).ok()?;
        match decode(key, &text) {
            Some(entry) => Some(entry),
            None => {
                log::warn!("ignoring unreadable cache entry {}", key.as_str());
                None
            }
        }
    }

    /// Existing entries are never overwritten.
    pub fn put(
        &self,
        key: &CacheKey,
        kind: RequestKind,
        model_id: &str,
        backend: &str,
        value: &str,
    ) -> std::io::Result<()> {
        let target = self.path_for(key);
        if target.exists() {
            return Ok(());
        }
        let created_at = if self.reproducible {
            0
        } else {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        };
        let meta = CacheMeta {
            kind,
            model_id: model_id.to_string(),
            backend: backend.to_string(),
            created_at,
        };
        let tmp = self.dir.join(format!(
            ".{}.tmp-{}-{}",
            key.as_str(),
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(encode(&meta, value).as_bytes())?;
            file.sync_all()?;
        }
        fs::rename(&tmp, &target).inspect_err(|_| {
            let _ = fs::remove_file(&tmp);
        })
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| !e.file_name().to_string_lossy().starts_with('.'))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn encode(meta: &CacheMeta, value: &str) -> String {
    format!(
        "{MAGIC}\nmeta: {}\nlength: {}\n\n{value}",
        serde_json::to_string(meta).expect("meta serializes"),
        value.len()
    )
}

fn decode(key: &CacheKey, text: &str) -> Option<CacheEntry> {
    let rest = text.strip_prefix(MAGIC)?.strip_prefix('\n')?;
    let (meta_line, rest) = rest.split_once('\n')?;
    let (len_line, rest) = rest.split_once('\n')?;
    let value = rest.strip_prefix('\n')?;
    let meta: CacheMeta = serde_json::from_str(meta_line.strip_prefix("meta: ")?).ok()?;
    let len: usize = len_line.strip_prefix("length: ")?.parse().ok()?;
    if value.len() != len {
        return None;
    }
    Some(CacheEntry {
        key: key.clone(),
        meta,
        value: value.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_and_no_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap().reproducible(true);
        let key = CacheKey::digest(&("chat", "m", "hello"));
        assert!(cache.get(&key).is_none());
        cache
            .put(&key, RequestKind::Chat, "m", "mock", "line one\nline two")
            .unwrap();
        let entry = cache.get(&key).unwrap();
        assert_eq!(entry.value, "line one\nline two");
        assert_eq!(entry.meta.created_at, 0);
        cache
            .put(&key, RequestKind::Chat, "m", "mock", "different")
            .unwrap();
        assert_eq!(cache.get(&key).unwrap().value, "line one\nline two");
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn truncated_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = CacheKey::digest(&"k");
        cache
            .put(&key, RequestKind::Chat, "m", "mock", "complete value")
            .unwrap();
        let path = dir.path().join(key.as_str());
        let full = fs::read_to_string(&path).unwrap();
        fs::write(&path, &full[..full.len() - 3]).unwrap();
        assert!(cache.get(&key).is_none());
    }

    #[test]
    fn leftover_temp_files_are_invisible() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = CacheKey::digest(&"k");
        fs::write(
            dir.path().join(format!(".{}.tmp-1-0", key.as_str())),
            "mtp-cache v1\npartial",
        )
        .unwrap();
        assert!(cache.get(&key).is_none());
        assert!(cache.is_empty());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(CacheKey::digest(&"abc"), CacheKey::digest(&"abc"));
        assert_ne!(CacheKey::digest(&"abc"), CacheKey::digest(&"abd"));
        assert_eq!(CacheKey::digest(&"abc").as_str().len(), 64);
    }
}
