//! 3D and document format handling: PLY parsing and writing, structural
//! COLLADA checks, archivability classification and preview decimation.

mod classify;
pub mod collada;
mod decimate;
pub mod ply;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use classify::{classify, classify_with, sniff_format};
pub use collada::validate_collada;
pub use decimate::{decimate, make_preview, preview_file_name, DecimateError, PREVIEW_DEFAULT_TARGET};
pub use ply::{
    parse_ply, parse_ply_with_issues, write_ply, PlyElement, PlyEncoding, PlyError, PlyModel, PlyProperty, PlyValue,
    PropertyType, Scalar, ScalarType,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormatClass {
    /// May be pushed to long-term archiving.
    Archivable,
    /// Kept in the repository but not eligible for long-term archiving.
    DepositOnly,
}

impl fmt::Display for FormatClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormatClass::Archivable => "Archivable",
            FormatClass::DepositOnly => "DepositOnly",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatIssue {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl FormatIssue {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        FormatIssue {
            severity: Severity::Error,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn warning(code: &str, message: impl Into<String>) -> Self {
        FormatIssue {
            severity: Severity::Warning,
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatVerdict {
    pub format_class: FormatClass,
    pub detected_format: String,
    pub issues: Vec<FormatIssue>,
}

impl FormatVerdict {
    /// Archivable only when the format is eligible and no issue is an error.
    pub fn new(detected_format: impl Into<String>, eligible: bool, issues: Vec<FormatIssue>) -> Self {
        let has_error = issues.iter().any(|i| i.severity == Severity::Error);
        FormatVerdict {
            format_class: if eligible && !has_error {
                FormatClass::Archivable
            } else {
                FormatClass::DepositOnly
            },
            detected_format: detected_format.into(),
            issues,
        }
    }

    pub fn has_error(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn has_issue(&self, code: &str) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }
}

/// Formats eligible for long-term archiving.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct ArchivableWhitelist {
    formats: BTreeSet<String>,
}

pub const DEFAULT_ARCHIVABLE: [&str; 6] = ["ply", "dae", "txt", "pdf", "png", "tiff"];

impl Default for ArchivableWhitelist {
    fn default() -> Self {
        Self::new(DEFAULT_ARCHIVABLE)
    }
}

impl From<Vec<String>> for ArchivableWhitelist {
    fn from(v: Vec<String>) -> Self {
        Self::new(v)
    }
}

impl From<ArchivableWhitelist> for Vec<String> {
    fn from(w: ArchivableWhitelist) -> Self {
        w.formats.into_iter().collect()
    }
}

impl ArchivableWhitelist {
    pub fn new<I, S>(formats: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        ArchivableWhitelist {
            formats: formats
                .into_iter()
                .map(|f| canonical_format_name(f.as_ref()))
                .collect(),
        }
    }

    pub fn contains(&self, format: &str) -> bool {
        self.formats.contains(&canonical_format_name(format))
    }

    /// Whether a file with this name could be archivable, judged by its
    /// extension alone.
    pub fn allows_filename(&self, filename: &str) -> bool {
        extension(filename).is_some_and(|ext| self.contains(&ext))
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.formats.iter().map(String::as_str)
    }
}

/// Lowercased extension with common aliases folded (`tif` to `tiff`).
pub fn extension(filename: &str) -> Option<String> {
    let (stem, ext) = filename.rsplit_once('.')?;
    if stem.is_empty() || ext.is_empty() {
        return None;
    }
    Some(canonical_format_name(ext))
}

fn canonical_format_name(name: &str) -> String {
    let lower = name.trim().trim_start_matches('.').to_ascii_lowercase();
    match lower.as_str() {
        "tif" => "tiff".to_string(),
        "jpeg" => "jpg".to_string(),
        "text" => "txt".to_string(),
        _ => lower,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_never_archivable_with_error() {
        let v = FormatVerdict::new("ply", true, vec![FormatIssue::error("X", "x")]);
        assert_eq!(v.format_class, FormatClass::DepositOnly);
        let v = FormatVerdict::new("ply", true, vec![FormatIssue::warning("X", "x")]);
        assert_eq!(v.format_class, FormatClass::Archivable);
    }

    #[test]
    fn whitelist_folds_aliases() {
        let w = ArchivableWhitelist::default();
        assert!(w.allows_filename("scan.TIF"));
        assert!(w.allows_filename("statue.ply"));
        assert!(!w.allows_filename("scene.fbx"));
        assert!(!w.allows_filename("ply"));
        assert!(!w.allows_filename(".ply"));
    }
}
