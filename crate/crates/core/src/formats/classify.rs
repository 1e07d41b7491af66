use super::collada::validate_collada;
use super::ply::parse_ply_with_issues;
use super::{extension, ArchivableWhitelist, FormatIssue, FormatVerdict};

/// Formats checked by signature only.
const MAGIC_ONLY: [&str; 4] = ["pdf", "png", "tiff", "jpg"];

/// Identifies a format from leading bytes. Plain text has no signature and
/// is never reported here.
pub fn sniff_format(bytes: &[u8]) -> Option<&'static str> {
    const SIGNATURES: [(&[u8], &str); 9] = [
        (b"ply\n", "ply"),
        (b"ply\r\n", "ply"),
        (b"%PDF-", "pdf"),
        (b"\x89PNG\r\n\x1a\n", "png"),
        (b"II*\x00", "tiff"),
        (b"MM\x00*", "tiff"),
        (b"\xFF\xD8\xFF", "jpg"),
        (b"Kaydara FBX Binary", "fbx"),
        (b"glTF", "glb"),
    ];
    if let Some((_, name)) = SIGNATURES.iter().find(|(sig, _)| bytes.starts_with(sig)) {
        return Some(name);
    }
    let head = &bytes[..bytes.len().min(4096)];
    let head = head.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(head);
    let start = head.iter().position(|b| !b.is_ascii_whitespace())?;
    if head[start] == b'<' && head.windows(8).any(|w| w == b"<COLLADA") {
        return Some("dae");
    }
    None
}

/// Classifies a file against the default whitelist.
pub fn classify(filename: &str, bytes: &[u8]) -> FormatVerdict {
    classify_with(filename, bytes, &ArchivableWhitelist::default())
}

pub fn classify_with(filename: &str, bytes: &[u8], whitelist: &ArchivableWhitelist) -> FormatVerdict {
    let ext = extension(filename);
    let sniffed = sniff_format(bytes);
    let mut issues = Vec::new();

    let detected = match (sniffed, ext.as_deref()) {
        (Some(s), Some(e)) if s != e && !same_family(s, e) => {
            issues.push(FormatIssue::warning(
                "EXTENSION_MISMATCH",
                format!("'{filename}' has extension .{e} but the content is {s}"),
            ));
            s.to_string()
        }
        (Some(s), _) => s.to_string(),
        (None, Some(e)) => e.to_string(),
        (None, None) => "unknown".to_string(),
    };

    let checked = match detected.as_str() {
        "ply" => {
            match parse_ply_with_issues(bytes) {
                Ok((_, warnings)) => issues.extend(warnings),
                Err(e) => issues.push(FormatIssue::error(e.code(), e.to_string())),
            }
            true
        }
        "dae" => {
            issues.extend(validate_collada(bytes).issues);
            true
        }
        "txt" => {
            match std::str::from_utf8(bytes) {
                Ok(t) if !t.contains('\0') => {}
                _ => issues.push(FormatIssue::error("TXT_NOT_TEXT", "content is not NUL-free UTF-8 text")),
            }
            true
        }
        f if MAGIC_ONLY.contains(&f) => {
            if sniffed != Some(f) {
                issues.push(FormatIssue::error(
                    "MAGIC_MISMATCH",
                    format!("content does not carry the {f} signature"),
                ));
            }
            true
        }
        _ => false,
    };

    if !checked {
        issues.push(FormatIssue::warning(
            "DETECTED_NONSTANDARD",
            format!("{detected} is not a format accepted for long-term archiving"),
        ));
        return FormatVerdict::new(detected, false, issues);
    }
    let eligible = whitelist.contains(&detected);
    if !eligible {
        issues.push(FormatIssue::warning(
            "NOT_WHITELISTED",
            format!("{detected} is not in the archivable whitelist"),
        ));
    }
    FormatVerdict::new(detected, eligible, issues)
}

fn same_family(sniffed: &str, ext: &str) -> bool {
    matches!((sniffed, ext), ("glb", "gltf"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::FormatClass;

    const CUBE: &[u8] = include_bytes!("../../fixtures/ply/cube_ascii.ply");
    const DAE: &[u8] = include_bytes!("../../fixtures/dae/minimal.dae");

    #[test]
    fn standard_3d_formats_are_archivable() {
        assert_eq!(classify("statue.ply", CUBE).format_class, FormatClass::Archivable);
        assert_eq!(classify("statue.dae", DAE).format_class, FormatClass::Archivable);
    }

    #[test]
    fn nonstandard_formats_are_deposit_only() {
        for name in ["scene.fbx", "scene.gltf", "mesh.obj", "model.3ds", "README"] {
            let v = classify(name, b"anything at all");
            assert_eq!(v.format_class, FormatClass::DepositOnly, "{name}");
            assert!(v.has_issue("DETECTED_NONSTANDARD"), "{name}");
        }
        let v = classify("scene.fbx", b"Kaydara FBX Binary  \x00\x1a\x00");
        assert_eq!(v.detected_format, "fbx");
        assert_eq!(v.format_class, FormatClass::DepositOnly);
    }

    #[test]
    fn content_overrides_extension() {
        let v = classify("mesh.ply", DAE);
        assert!(v.has_issue("EXTENSION_MISMATCH"));
        assert_eq!(v.detected_format, "dae");
        assert_eq!(v.format_class, FormatClass::Archivable);

        let v = classify("photo.png", CUBE);
        assert_eq!(v.detected_format, "ply");
        assert!(v.has_issue("EXTENSION_MISMATCH"));
    }

    #[test]
    fn broken_claims_are_errors() {
        let v = classify("statue.ply", b"not a ply");
        assert!(v.has_issue("PLY_BAD_MAGIC"));
        assert_eq!(v.format_class, FormatClass::DepositOnly);
        assert!(classify("report.pdf", b"hello").has_issue("MAGIC_MISMATCH"));
        assert!(classify("notes.txt", b"a\0b").has_issue("TXT_NOT_TEXT"));
        assert_eq!(classify("notes.txt", "fouilles de 2014".as_bytes()).format_class, FormatClass::Archivable);
        assert_eq!(classify("report.pdf", b"%PDF-1.4\n").format_class, FormatClass::Archivable);
        assert_eq!(classify("scan.tif", b"II*\x00rest").format_class, FormatClass::Archivable);
    }

    #[test]
    fn whitelist_is_configurable() {
        let only_ply = ArchivableWhitelist::new(["ply"]);
        let v = classify_with("report.pdf", b"%PDF-1.7", &only_ply);
        assert_eq!(v.format_class, FormatClass::DepositOnly);
        assert!(v.has_issue("NOT_WHITELISTED"));
        let with_jpg = ArchivableWhitelist::new(["jpeg"]);
        assert_eq!(classify_with("a.jpg", b"\xFF\xD8\xFF\xE0", &with_jpg).format_class, FormatClass::Archivable);
    }
}
