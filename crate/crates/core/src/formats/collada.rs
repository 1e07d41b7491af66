//! Structural COLLADA 1.4.1 checks. This is not XSD validation: it checks
//! well-formedness, the root element and version, the mandatory `asset`
//! block and that `#id` references resolve inside the document.

use std::collections::{BTreeSet, HashSet};

use roxmltree::{Document, Node, ParsingOptions};

use super::{FormatIssue, FormatVerdict};

pub const COLLADA_NS: &str = "http://www.collada.org/2005/11/COLLADASchema";
pub const COLLADA_VERSION: &str = "1.4.1";

/// Attributes whose value may be a URI fragment pointing at an element id.
const REF_ATTRIBUTES: [&str; 4] = ["url", "source", "target", "instance_effect"];

pub fn validate_collada(bytes: &[u8]) -> FormatVerdict {
    let issues = collada_issues(bytes);
    FormatVerdict::new("dae", true, issues)
}

fn collada_issues(bytes: &[u8]) -> Vec<FormatIssue> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let Ok(text) = std::str::from_utf8(bytes) else {
        return vec![FormatIssue::error("DAE_NOT_XML", "document is not UTF-8 text")];
    };
    let opts = ParsingOptions {
        allow_dtd: false,
        ..ParsingOptions::default()
    };
    let doc = match Document::parse_with_options(text, opts) {
        Ok(d) => d,
        Err(e) => return vec![FormatIssue::error("DAE_NOT_XML", e.to_string())],
    };

    let mut issues = Vec::new();
    let root = doc.root_element();
    if root.tag_name().name() != "COLLADA" {
        issues.push(FormatIssue::error(
            "DAE_NOT_COLLADA",
            format!("root element is <{}>", root.tag_name().name()),
        ));
        return issues;
    }
    if root.tag_name().namespace() != Some(COLLADA_NS) {
        issues.push(FormatIssue::warning(
            "DAE_NAMESPACE",
            format!("root namespace is {:?}", root.tag_name().namespace().unwrap_or("")),
        ));
    }
    match root.attribute("version") {
        Some(COLLADA_VERSION) => {}
        Some(v) => issues.push(FormatIssue::error(
            "DAE_VERSION",
            format!("version {v}, expected {COLLADA_VERSION}"),
        )),
        None => issues.push(FormatIssue::error("DAE_VERSION", "version attribute is missing")),
    }

    match child(root, "asset") {
        None => issues.push(FormatIssue::error("DAE_NO_ASSET", "COLLADA has no <asset> child")),
        Some(asset) => {
            for required in ["created", "modified"] {
                let present = child(asset, required)
                    .and_then(|n| n.text())
                    .is_some_and(|t| !t.trim().is_empty());
                if !present {
                    issues.push(FormatIssue::error(
                        "DAE_NO_ASSET",
                        format!("<asset> lacks a non-empty <{required}>"),
                    ));
                }
            }
        }
    }

    let mut ids = HashSet::new();
    let mut duplicates = BTreeSet::new();
    for node in root.descendants().filter(Node::is_element) {
        if let Some(id) = node.attribute("id") {
            if !ids.insert(id) {
                duplicates.insert(id);
            }
        }
    }
    for id in duplicates {
        issues.push(FormatIssue::error("DAE_DUPLICATE_ID", format!("id '{id}' is declared more than once")));
    }

    let mut dangling = BTreeSet::new();
    let mut external = BTreeSet::new();
    for node in root.descendants().filter(Node::is_element) {
        let mut refs: Vec<&str> = REF_ATTRIBUTES.iter().filter_map(|a| node.attribute(*a)).collect();
        if matches!(node.tag_name().name(), "skeleton" | "instance_child") {
            refs.extend(node.text().map(str::trim));
        }
        for r in refs {
            if let Some(frag) = r.strip_prefix('#') {
                if !ids.contains(frag) {
                    dangling.insert(r.to_string());
                }
            } else if r.contains('#') && node.tag_name().name().starts_with("instance_") {
                external.insert(r.to_string());
            }
        }
    }
    for r in dangling {
        issues.push(FormatIssue::error("DAE_DANGLING_REF", format!("reference {r} does not resolve")));
    }
    for r in external {
        issues.push(FormatIssue::warning(
            "DAE_EXTERNAL_REF",
            format!("reference {r} points outside the document"),
        ));
    }
    issues
}

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|n| n.is_element() && n.tag_name().name() == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::FormatClass;

    const SKELETON: &[u8] = include_bytes!("../../fixtures/dae/minimal.dae");

    fn codes(v: &FormatVerdict) -> Vec<&str> {
        v.issues.iter().map(|i| i.code.as_str()).collect()
    }

    #[test]
    fn minimal_skeleton_is_archivable() {
        let v = validate_collada(SKELETON);
        assert_eq!(v.format_class, FormatClass::Archivable, "{:?}", v.issues);
        assert!(v.issues.is_empty());
    }

    #[test]
    fn missing_asset() {
        let doc = br#"<COLLADA xmlns="http://www.collada.org/2005/11/COLLADASchema" version="1.4.1"><scene/></COLLADA>"#;
        let v = validate_collada(doc);
        assert_eq!(v.format_class, FormatClass::DepositOnly);
        assert_eq!(codes(&v), ["DAE_NO_ASSET"]);
    }

    #[test]
    fn not_xml() {
        let v = validate_collada(b"\x00\x01binary junk");
        assert_eq!(v.format_class, FormatClass::DepositOnly);
        assert_eq!(codes(&v), ["DAE_NOT_XML"]);
        assert_eq!(codes(&validate_collada(b"<COLLADA><asset>")), ["DAE_NOT_XML"]);
    }

    #[test]
    fn version_root_and_references() {
        let text = std::str::from_utf8(SKELETON).unwrap();
        let v = validate_collada(text.replace("1.4.1", "1.5.0").as_bytes());
        assert_eq!(codes(&v), ["DAE_VERSION"]);

        let v = validate_collada(b"<root/>");
        assert_eq!(codes(&v), ["DAE_NOT_COLLADA"]);

        let broken = text.replace("url=\"#Scene\"", "url=\"#Nowhere\"");
        assert_ne!(broken, text);
        let v = validate_collada(broken.as_bytes());
        assert_eq!(codes(&v), ["DAE_DANGLING_REF"]);
        assert_eq!(v.format_class, FormatClass::DepositOnly);
    }

    #[test]
    fn doctype_is_refused() {
        let v = validate_collada(b"<!DOCTYPE x [<!ENTITY a \"aaaa\">]><COLLADA version=\"1.4.1\"/>");
        assert_eq!(codes(&v), ["DAE_NOT_XML"]);
    }
}
