//! Offline draft editing. Every mutation reads the draft, applies a pure
//! transformation and rewrites the file atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use depot3d_core::catalog::{Deposit, DocumentRecord, MediaRole, StorageRef, VirtualObject};
use depot3d_core::digest::sha256_hex;
use depot3d_core::formats::{classify, FormatVerdict};

use crate::Failure;

pub fn load(path: &Path) -> Result<Deposit, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
    Deposit::from_json(&text).map_err(|e| Failure::user("BAD_DRAFT", format!("{}: {e}", path.display())))
}

/// Temp file in the same directory, then rename: readers see the old draft
/// or the new one, never a partial write.
pub fn save(path: &Path, d: &Deposit) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let write = || -> std::io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        tmp.write_all(d.to_json().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    };
    write().map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

/// Directory internal storage keys are relative to.
pub fn base_dir(draft: &Path) -> PathBuf {
    match draft.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn scaffold(title: Option<&str>, local_id: u64, objects: u64) -> Deposit {
    Deposit {
        local_id,
        title: title.unwrap_or_default().to_string(),
        objects: (1..=objects)
            .map(|i| VirtualObject {
                local_id: i,
                ..VirtualObject::default()
            })
            .collect(),
        ..Deposit::default()
    }
}

/// Accepts `3`, `obj3` or `o3`.
pub fn parse_object_id(s: &str) -> Option<u64> {
    s.trim_start_matches(|c: char| c.is_ascii_alphabetic()).parse().ok().filter(|&n| n > 0)
}

/// Key of `file` relative to the draft directory, with `/` separators.
pub fn storage_key(base: &Path, file: &Path) -> Result<String, Failure> {
    let abs_base = fs::canonicalize(base).map_err(|e| Failure::io(format!("{}: {e}", base.display())))?;
    let abs_file = fs::canonicalize(file).map_err(|e| Failure::user("MISSING_FILE", format!("{}: {e}", file.display())))?;
    let rel = abs_file.strip_prefix(&abs_base).map_err(|_| {
        Failure::user(
            "OUTSIDE_DRAFT_DIR",
            format!("{} is not under the draft directory {}", file.display(), abs_base.display()),
        )
    })?;
    let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
    Ok(parts.join("/"))
}

/// Adds (or replaces, keeping relations) a document in `object_id`,
/// creating the object when the draft has none with that id.
pub fn attach(
    mut d: Deposit,
    object_id: u64,
    filename: &str,
    bytes: &[u8],
    key: String,
    role: Option<MediaRole>,
) -> (Deposit, DocumentRecord, FormatVerdict) {
    let verdict = classify(filename, bytes);
    if d.object(object_id).is_none() {
        d.objects.push(VirtualObject {
            local_id: object_id,
            ..VirtualObject::default()
        });
    }
    let obj = d.object_mut(object_id).expect("just ensured");
    let mut record = DocumentRecord {
        filename: filename.to_string(),
        media_role: role,
        byte_size: Some(bytes.len() as u64),
        checksum: sha256_hex(bytes),
        format_class: Some(verdict.format_class),
        storage: Some(StorageRef::Internal { key }),
        relations: Vec::new(),
    };
    match obj.document_mut(filename) {
        Some(existing) => {
            record.relations = std::mem::take(&mut existing.relations);
            if record.media_role.is_none() {
                record.media_role = existing.media_role;
            }
            record.media_role.get_or_insert(MediaRole::Other);
            *existing = record.clone();
        }
        None => {
            record.media_role.get_or_insert(MediaRole::Other);
            obj.documents.push(record.clone());
        }
    }
    if obj.final_model.is_none() && record.media_role == Some(MediaRole::FinalModel) {
        obj.final_model = Some(filename.to_string());
    }
    (d, record, verdict)
}
