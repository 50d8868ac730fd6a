//! Replay store: one `<digest>.json` file per recorded completion.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GatewayError, Provider, ProviderError, ProviderKind, Request};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub digest: String,
    pub template_id: String,
    pub template_version: String,
    pub raw: String,
}

#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| GatewayError::StoreWriteFailure(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn get(&self, digest: &str) -> Option<ReplayEntry> {
        let text = std::fs::read_to_string(self.path_of(digest)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Writes an entry unless one with the same digest exists. The file is
    /// written under a temporary name and renamed into place.
    pub fn put(&self, entry: &ReplayEntry) -> Result<(), GatewayError> {
        let target = self.path_of(&entry.digest);
        if target.exists() {
            return Ok(());
        }
        let fail = |e: std::io::Error| GatewayError::StoreWriteFailure(format!("{}: {e}", target.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(fail)?;
        let text = serde_json::to_string_pretty(entry).expect("entry serializes");
        std::io::Write::write_all(&mut tmp, text.as_bytes()).map_err(fail)?;
        tmp.persist(&target).map_err(|e| fail(e.error))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Answers from a [`ReplayStore`]; misses are errors, never fallbacks.
pub struct ReplayProvider {
    store: ReplayStore,
}

impl ReplayProvider {
    pub fn new(store: ReplayStore) -> Self {
        Self { store }
    }
}

impl Provider for ReplayProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Replay
    }

    fn complete(&self, request: &Request<'_>) -> Result<String, ProviderError> {
        self.store
            .get(request.digest)
            .map(|e| e.raw)
            .ok_or_else(|| ProviderError::ReplayMiss(request.digest.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_and_no_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let store = ReplayStore::open(dir.path()).unwrap();
        let e = ReplayEntry { digest: "ab".into(), template_id: "t".into(), template_version: "v".into(), raw: "1".into() };
        store.put(&e).unwrap();
        store.put(&ReplayEntry { raw: "2".into(), ..e.clone() }).unwrap();
        assert_eq!(store.get("ab").unwrap().raw, "1");
        assert_eq!(store.len(), 1);
        assert!(store.get("cd").is_none());
    }
}
