//! Archive submission packages.
//!
//! Layout of a package rooted at `root/`:
//!
//! ```text
//! manifest.json
//! deposit.json                      deposit metadata, objects listed by id
//! objects/<id>/object.json          virtual object metadata
//! objects/<id>/files/<filename>     payload of internally stored documents
//! ```
//!
//! `manifest.json` lists every other file with its size and SHA-256, sorted
//! bytewise by path. Its `package_digest` is the SHA-256 of
//!
//! ```text
//! depot3d-package <package_format_version>
//! created <created, RFC 3339>
//! <sha256> <byte_size> <format_class or -> <path>      one line per entry
//! ```
//!
//! The manifest must also be byte-identical to its own canonical
//! serialization, so any edit to it is detected.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{validate_deposit_with, Deposit, DocumentRecord, StorageRef, VirtualObject};
use crate::digest::{is_sha256_hex, sha256_hex};
use crate::formats::{ArchivableWhitelist, FormatClass};
use crate::report::ValidationReport;

pub const PACKAGE_FORMAT_VERSION: &str = "1.0";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEPOSIT_FILE: &str = "deposit.json";

#[derive(Debug, Error)]
pub enum PackageError {
    #[error("VALIDATION_FAILED: deposit has {} error(s)", .0.errors.len())]
    ValidationFailed(ValidationReport),
    #[error("MISSING_FILE: no bytes for object {object_id} document '{filename}'")]
    MissingFile { object_id: u64, filename: String },
    #[error("SOURCE_MISMATCH: object {object_id} document '{filename}': {reason}")]
    SourceMismatch {
        object_id: u64,
        filename: String,
        reason: String,
    },
    #[error("OUTPUT_EXISTS: {0} exists and is not an empty directory")]
    OutputExists(PathBuf),
    #[error("NOT_A_PACKAGE: {0} has no manifest.json")]
    NotAPackage(PathBuf),
    #[error("VERIFY_FAILED: package has {} error(s)", .0.errors.len())]
    VerifyFailed(ValidationReport),
    #[error("METADATA_CORRUPT: {0}")]
    MetadataCorrupt(String),
    #[error("IO_FAILURE: {0}")]
    Io(String),
}

impl PackageError {
    pub fn code(&self) -> &'static str {
        match self {
            PackageError::ValidationFailed(_) => "VALIDATION_FAILED",
            PackageError::MissingFile { .. } => "MISSING_FILE",
            PackageError::SourceMismatch { .. } => "SOURCE_MISMATCH",
            PackageError::OutputExists(_) => "OUTPUT_EXISTS",
            PackageError::NotAPackage(_) => "NOT_A_PACKAGE",
            PackageError::VerifyFailed(_) => "VERIFY_FAILED",
            PackageError::MetadataCorrupt(_) => "METADATA_CORRUPT",
            PackageError::Io(_) => "IO_FAILURE",
        }
    }
}

fn io_err(context: impl std::fmt::Display, e: io::Error) -> PackageError {
    PackageError::Io(format!("{context}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub byte_size: u64,
    pub sha256: String,
    /// `None` for metadata files.
    pub format_class: Option<FormatClass>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub package_format_version: String,
    pub created: DateTime<Utc>,
    pub entries: Vec<ManifestEntry>,
    pub package_digest: String,
}

impl Manifest {
    /// Sorts entries and fills in the package digest.
    pub fn new(created: DateTime<Utc>, mut entries: Vec<ManifestEntry>) -> Self {
        entries.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
        let mut m = Manifest {
            package_format_version: PACKAGE_FORMAT_VERSION.to_string(),
            created,
            entries,
            package_digest: String::new(),
        };
        m.package_digest = m.compute_digest();
        m
    }

    /// The exact text hashed into `package_digest`.
    pub fn digest_input(&self) -> String {
        let mut s = format!(
            "depot3d-package {}\ncreated {}\n",
            self.package_format_version,
            self.created.to_rfc3339_opts(SecondsFormat::AutoSi, true)
        );
        for e in &self.entries {
            let class = match e.format_class {
                Some(c) => c.to_string(),
                None => "-".to_string(),
            };
            s.push_str(&format!("{} {} {} {}\n", e.sha256, e.byte_size, class, e.path));
        }
        s
    }

    pub fn compute_digest(&self) -> String {
        sha256_hex(self.digest_input().as_bytes())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    pub fn entry(&self, path: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.path == path)
    }
}

/// Relative, `/`-separated, no empty, `.` or `..` components.
pub fn is_safe_relative_path(path: &str) -> bool {
    !path.is_empty()
        && !path.starts_with('/')
        && !path.contains('\\')
        && path.split('/').all(|c| !c.is_empty() && c != "." && c != "..")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchivePackage {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub deposit: Deposit,
}

impl ArchivePackage {
    pub fn payload_count(&self) -> usize {
        self.manifest.entries.iter().filter(|e| e.format_class.is_some()).count()
    }

    pub fn metadata_count(&self) -> usize {
        // manifest.json itself is not an entry
        self.manifest.entries.iter().filter(|e| e.format_class.is_none()).count() + 1
    }
}

/// Supplies the bytes of internally stored documents.
pub trait FileSource {
    fn fetch(&self, object_id: u64, doc: &DocumentRecord) -> io::Result<Option<Vec<u8>>>;
}

/// Filename to bytes, shared by all objects.
impl FileSource for BTreeMap<String, Vec<u8>> {
    fn fetch(&self, _object_id: u64, doc: &DocumentRecord) -> io::Result<Option<Vec<u8>>> {
        Ok(self.get(&doc.filename).cloned())
    }
}

impl FileSource for HashMap<String, Vec<u8>> {
    fn fetch(&self, _object_id: u64, doc: &DocumentRecord) -> io::Result<Option<Vec<u8>>> {
        Ok(self.get(&doc.filename).cloned())
    }
}

/// Resolves internal storage keys as paths relative to a directory.
#[derive(Debug, Clone)]
pub struct DirSource {
    pub root: PathBuf,
}

impl FileSource for DirSource {
    fn fetch(&self, _object_id: u64, doc: &DocumentRecord) -> io::Result<Option<Vec<u8>>> {
        let Some(StorageRef::Internal { key }) = &doc.storage else {
            return Ok(None);
        };
        if !is_safe_relative_path(key) {
            return Ok(None);
        }
        match fs::read(self.root.join(key)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}

pub fn payload_path(object_id: u64, filename: &str) -> String {
    format!("objects/{object_id}/files/{filename}")
}

pub fn object_metadata_path(object_id: u64) -> String {
    format!("objects/{object_id}/object.json")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DepositFile {
    object_ids: Vec<u64>,
    deposit: Deposit,
}

fn to_json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("metadata serializes");
    out.push(b'\n');
    out
}

/// Builds a package into `out_dir`, which must not exist or be an empty
/// directory. On error nothing is left at `out_dir`.
pub fn build_package(
    deposit: &Deposit,
    source: &dyn FileSource,
    out_dir: &Path,
    created: DateTime<Utc>,
) -> Result<ArchivePackage, PackageError> {
    build_package_with(deposit, source, out_dir, created, &ArchivableWhitelist::default())
}

pub fn build_package_with(
    deposit: &Deposit,
    source: &dyn FileSource,
    out_dir: &Path,
    created: DateTime<Utc>,
    whitelist: &ArchivableWhitelist,
) -> Result<ArchivePackage, PackageError> {
    let report = validate_deposit_with(deposit, whitelist);
    if !report.is_error_free() {
        return Err(PackageError::ValidationFailed(report));
    }
    if out_dir.exists() {
        let empty_dir = out_dir.is_dir()
            && fs::read_dir(out_dir)
                .map_err(|e| io_err(out_dir.display(), e))?
                .next()
                .is_none();
        if !empty_dir {
            return Err(PackageError::OutputExists(out_dir.to_path_buf()));
        }
    }

    // gather everything in memory first so a missing file aborts early
    let mut files: Vec<(String, Vec<u8>, Option<FormatClass>)> = Vec::new();
    let mut packaged = deposit.clone();
    for obj in &mut packaged.objects {
        for doc in &mut obj.documents {
            if doc.is_external() {
                continue;
            }
            let bytes = source
                .fetch(obj.local_id, doc)
                .map_err(|e| io_err(&doc.filename, e))?
                .ok_or_else(|| PackageError::MissingFile {
                    object_id: obj.local_id,
                    filename: doc.filename.clone(),
                })?;
            check_source(obj.local_id, doc, &bytes)?;
            let path = payload_path(obj.local_id, &doc.filename);
            doc.storage = Some(StorageRef::Internal { key: path.clone() });
            files.push((path, bytes, doc.format_class));
        }
    }
    for obj in &packaged.objects {
        files.push((object_metadata_path(obj.local_id), to_json_bytes(obj), None));
    }
    let deposit_file = DepositFile {
        object_ids: packaged.objects.iter().map(|o| o.local_id).collect(),
        deposit: Deposit {
            objects: Vec::new(),
            ..packaged.clone()
        },
    };
    files.push((DEPOSIT_FILE.to_string(), to_json_bytes(&deposit_file), None));

    let entries = files
        .iter()
        .map(|(path, bytes, class)| ManifestEntry {
            path: path.clone(),
            byte_size: bytes.len() as u64,
            sha256: sha256_hex(bytes),
            format_class: *class,
        })
        .collect();
    let manifest = Manifest::new(created, entries);

    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| io_err(parent.display(), e))?;
    let staging = tempfile::Builder::new()
        .prefix(".package-")
        .tempdir_in(&parent)
        .map_err(|e| io_err(parent.display(), e))?;
    for (path, bytes, _) in &files {
        let target = staging.path().join(path);
        if let Some(dir) = target.parent() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir.display(), e))?;
        }
        fs::write(&target, bytes).map_err(|e| io_err(path, e))?;
    }
    fs::write(staging.path().join(MANIFEST_FILE), manifest.to_bytes()).map_err(|e| io_err(MANIFEST_FILE, e))?;
    let staged = staging.keep();
    if let Err(e) = fs::rename(&staged, out_dir) {
        let _ = fs::remove_dir_all(&staged);
        return Err(io_err(out_dir.display(), e));
    }

    Ok(ArchivePackage {
        root: out_dir.to_path_buf(),
        manifest,
        deposit: packaged,
    })
}

fn check_source(object_id: u64, doc: &DocumentRecord, bytes: &[u8]) -> Result<(), PackageError> {
    let mismatch = |reason: String| PackageError::SourceMismatch {
        object_id,
        filename: doc.filename.clone(),
        reason,
    };
    if doc.byte_size != Some(bytes.len() as u64) {
        return Err(mismatch(format!(
            "record says {:?} bytes, source has {}",
            doc.byte_size,
            bytes.len()
        )));
    }
    let actual = sha256_hex(bytes);
    if actual != doc.checksum {
        return Err(mismatch(format!("checksum {actual} differs from the record")));
    }
    Ok(())
}

/// Recomputes every digest. The report path of each issue is the
/// package-relative file path.
pub fn verify_package(root: &Path) -> Result<ValidationReport, PackageError> {
    let manifest_path = root.join(MANIFEST_FILE);
    let raw = match fs::read(&manifest_path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(PackageError::NotAPackage(root.to_path_buf())),
        Err(e) => return Err(io_err(manifest_path.display(), e)),
    };
    let mut report = ValidationReport::new();
    let manifest = match read_manifest(&raw) {
        Ok(m) => m,
        Err(reason) => {
            report.error(MANIFEST_FILE, "MANIFEST_CORRUPT", reason);
            return Ok(report);
        }
    };
    if manifest.compute_digest() != manifest.package_digest {
        report.error(
            MANIFEST_FILE,
            "PACKAGE_DIGEST_MISMATCH",
            "package_digest does not match the entries",
        );
    }

    for entry in &manifest.entries {
        let path = root.join(&entry.path);
        let bytes = match fs::symlink_metadata(&path) {
            Ok(meta) if meta.is_file() => fs::read(&path).map_err(|e| io_err(&entry.path, e))?,
            Ok(_) => {
                report.error(&entry.path, "MISSING_FILE", "listed path is not a regular file");
                continue;
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                report.error(&entry.path, "MISSING_FILE", "listed file is absent");
                continue;
            }
            Err(e) => return Err(io_err(&entry.path, e)),
        };
        if bytes.len() as u64 != entry.byte_size {
            report.error(
                &entry.path,
                "SIZE_MISMATCH",
                format!("manifest says {} bytes, file has {}", entry.byte_size, bytes.len()),
            );
        } else if sha256_hex(&bytes) != entry.sha256 {
            report.error(&entry.path, "CHECKSUM_MISMATCH", "SHA-256 differs from the manifest");
        }
    }

    let listed: BTreeSet<&str> = manifest.entries.iter().map(|e| e.path.as_str()).collect();
    let mut on_disk = Vec::new();
    walk(root, "", &mut on_disk).map_err(|e| io_err(root.display(), e))?;
    for rel in on_disk {
        if rel != MANIFEST_FILE && !listed.contains(rel.as_str()) {
            report.error(&rel, "UNLISTED_FILE", "file is not listed in the manifest");
        }
    }
    Ok(report)
}

fn read_manifest(raw: &[u8]) -> Result<Manifest, String> {
    let manifest: Manifest = serde_json::from_slice(raw).map_err(|e| format!("manifest does not parse: {e}"))?;
    if manifest.to_bytes() != raw {
        return Err("manifest is not in canonical form".into());
    }
    if manifest.package_format_version != PACKAGE_FORMAT_VERSION {
        return Err(format!(
            "unsupported package format version {}",
            manifest.package_format_version
        ));
    }
    for pair in manifest.entries.windows(2) {
        if pair[0].path.as_bytes() >= pair[1].path.as_bytes() {
            return Err(format!("entries not strictly sorted at '{}'", pair[1].path));
        }
    }
    for e in &manifest.entries {
        if !is_safe_relative_path(&e.path) || e.path == MANIFEST_FILE {
            return Err(format!("entry path '{}' is not a safe relative path", e.path));
        }
        if !is_sha256_hex(&e.sha256) {
            return Err(format!("entry '{}' has a malformed digest", e.path));
        }
    }
    Ok(manifest)
}

/// Every non-directory below `dir`, as `/`-joined relative paths.
fn walk(dir: &Path, prefix: &str, out: &mut Vec<String>) -> io::Result<()> {
    let mut names: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    names.sort_by_key(|e| e.file_name());
    for entry in names {
        let name = entry.file_name().to_string_lossy().into_owned();
        let rel = if prefix.is_empty() {
            name
        } else {
            format!("{prefix}/{name}")
        };
        if entry.file_type()?.is_dir() {
            walk(&entry.path(), &rel, out)?;
        } else {
            out.push(rel);
        }
    }
    Ok(())
}

/// Verifies, then reads the deposit back. Internal storage keys in the
/// result are package-relative paths.
pub fn load_package(root: &Path) -> Result<(Deposit, Manifest), PackageError> {
    let report = verify_package(root)?;
    if !report.is_error_free() {
        return Err(PackageError::VerifyFailed(report));
    }
    let manifest: Manifest = serde_json::from_slice(
        &fs::read(root.join(MANIFEST_FILE)).map_err(|e| io_err(MANIFEST_FILE, e))?,
    )
    .map_err(|e| PackageError::MetadataCorrupt(e.to_string()))?;

    let read_json = |rel: &str| -> Result<Vec<u8>, PackageError> {
        if manifest.entry(rel).is_none() {
            return Err(PackageError::MetadataCorrupt(format!("{rel} is not listed")));
        }
        fs::read(root.join(rel)).map_err(|e| io_err(rel, e))
    };
    let file: DepositFile = serde_json::from_slice(&read_json(DEPOSIT_FILE)?)
        .map_err(|e| PackageError::MetadataCorrupt(format!("{DEPOSIT_FILE}: {e}")))?;
    let mut deposit = file.deposit;
    if !deposit.objects.is_empty() {
        return Err(PackageError::MetadataCorrupt(format!("{DEPOSIT_FILE} embeds objects")));
    }
    for id in file.object_ids {
        let rel = object_metadata_path(id);
        let obj: VirtualObject = serde_json::from_slice(&read_json(&rel)?)
            .map_err(|e| PackageError::MetadataCorrupt(format!("{rel}: {e}")))?;
        if obj.local_id != id {
            return Err(PackageError::MetadataCorrupt(format!("{rel} holds object {}", obj.local_id)));
        }
        deposit.objects.push(obj);
    }
    let report = validate_deposit_with(&deposit, &ArchivableWhitelist::default());
    if !report.is_error_free() {
        return Err(PackageError::ValidationFailed(report));
    }
    Ok((deposit, manifest))
}

/// The deposit as it will appear inside a package: internal storage keys
/// replaced by package-relative payload paths.
pub fn with_package_storage(deposit: &Deposit) -> Deposit {
    let mut d = deposit.clone();
    for obj in &mut d.objects {
        let id = obj.local_id;
        for doc in &mut obj.documents {
            if let Some(StorageRef::Internal { key }) = &mut doc.storage {
                *key = payload_path(id, &doc.filename);
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn safe_paths() {
        assert!(is_safe_relative_path("objects/1/files/a.ply"));
        for bad in ["", "/etc/passwd", "a/../b", "a//b", "./a", "a\\b", "a/"] {
            assert!(!is_safe_relative_path(bad), "{bad}");
        }
    }

    #[test]
    fn manifest_sorts_bytewise() {
        let e = |p: &str| ManifestEntry {
            path: p.into(),
            byte_size: 0,
            sha256: sha256_hex(b""),
            format_class: None,
        };
        let m = Manifest::new(DateTime::UNIX_EPOCH, vec![e("b"), e("B"), e("a"), e("_")]);
        let paths: Vec<_> = m.entries.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["B", "_", "a", "b"]);
        assert_eq!(read_manifest(&m.to_bytes()).unwrap(), m);
    }
}
