//! Content-addressed blob directory: `<root>/<first two hex>/<sha256>`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use depot3d_core::catalog::{DocumentRecord, StorageRef};
use depot3d_core::digest::{is_sha256_hex, sha256_hex};
use depot3d_core::package::FileSource;

#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

/// Result of a scrub: keys whose content no longer hashes to the key, and
/// stray files that are not blobs at all.
#[derive(Debug, Default, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ScrubReport {
    pub checked: usize,
    pub corrupt: Vec<String>,
    pub stray: Vec<String>,
}

impl ScrubReport {
    pub fn is_clean(&self) -> bool {
        self.corrupt.is_empty() && self.stray.is_empty()
    }
}

impl BlobStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(BlobStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_of(&self, key: &str) -> Option<PathBuf> {
        is_sha256_hex(key).then(|| self.root.join(&key[..2]).join(key))
    }

    /// Stores `bytes` and returns their key. Storing the same bytes again is
    /// a no-op, so concurrent writers of one blob cannot conflict.
    pub fn put(&self, bytes: &[u8]) -> io::Result<String> {
        let key = sha256_hex(bytes);
        let path = self.path_of(&key).expect("digest is a valid key");
        if path.is_file() {
            return Ok(key);
        }
        let dir = path.parent().expect("sharded path");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(key)
    }

    pub fn get(&self, key: &str) -> io::Result<Option<Vec<u8>>> {
        let Some(path) = self.path_of(key) else {
            return Ok(None);
        };
        match fs::read(path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.path_of(key).is_some_and(|p| p.is_file())
    }

    pub fn size_of(&self, key: &str) -> Option<u64> {
        self.path_of(key).and_then(|p| fs::metadata(p).ok()).map(|m| m.len())
    }

    /// Re-hashes every blob.
    pub fn scrub(&self) -> io::Result<ScrubReport> {
        let mut report = ScrubReport::default();
        let mut shards: Vec<_> = fs::read_dir(&self.root)?.collect::<Result<_, _>>()?;
        shards.sort_by_key(|e| e.file_name());
        for shard in shards {
            let shard_name = shard.file_name().to_string_lossy().into_owned();
            if !shard.file_type()?.is_dir() {
                report.stray.push(shard_name);
                continue;
            }
            let mut files: Vec<_> = fs::read_dir(shard.path())?.collect::<Result<_, _>>()?;
            files.sort_by_key(|e| e.file_name());
            for f in files {
                let name = f.file_name().to_string_lossy().into_owned();
                if !is_sha256_hex(&name) || !name.starts_with(&shard_name) || !f.file_type()?.is_file() {
                    report.stray.push(format!("{shard_name}/{name}"));
                    continue;
                }
                report.checked += 1;
                if sha256_hex(&fs::read(f.path())?) != name {
                    report.corrupt.push(name);
                }
            }
        }
        Ok(report)
    }
}

impl FileSource for BlobStore {
    fn fetch(&self, _object_id: u64, doc: &DocumentRecord) -> io::Result<Option<Vec<u8>>> {
        match &doc.storage {
            Some(StorageRef::Internal { key }) => self.get(key),
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_is_idempotent_and_scrub_finds_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::open(dir.path()).unwrap();
        let a = store.put(b"hello").unwrap();
        let b = store.put(b"hello").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
        assert_eq!(store.get(&a).unwrap().unwrap(), b"hello");
        assert_eq!(store.get("../etc").unwrap(), None);
        store.put(b"world").unwrap();
        assert!(store.scrub().unwrap().is_clean());
        assert_eq!(store.scrub().unwrap().checked, 2);

        fs::write(dir.path().join(&a[..2]).join(&a), b"HELLO").unwrap();
        let r = store.scrub().unwrap();
        assert_eq!(r.corrupt, vec![a]);
    }
}
