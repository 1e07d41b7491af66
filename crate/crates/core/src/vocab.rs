//! Offline controlled vocabularies: PeriodO periods, Geonames places and
//! PACTOLS subject terms, loaded from line-oriented JSON fixtures.
//!
//! Fixture format, one object per line:
//!
//! ```text
//! {"scheme":"PeriodO","uri":"http://n2t.net/ark:/99152/p0...","preferred_label":"Gallo-Roman",
//!  "alt_labels":["Gallo-romain"],"bounds":[-50,476],"coords":null}
//! ```
//!
//! Labels are matched after [`normalize_label`]: case-folded, diacritics
//! stripped, whitespace collapsed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::catalog::Deposit;
use crate::report::ValidationReport;

pub const PERIODO_SAMPLE: &str = include_str!("../fixtures/vocab/periodo.jsonl");
pub const GEONAMES_SAMPLE: &str = include_str!("../fixtures/vocab/geonames.jsonl");
pub const PACTOLS_SAMPLE: &str = include_str!("../fixtures/vocab/pactols.jsonl");

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    PeriodO,
    Geonames,
    Pactols,
    /// A repository-local referential.
    Custom(String),
}

impl Scheme {
    pub fn as_str(&self) -> &str {
        match self {
            Scheme::PeriodO => "PeriodO",
            Scheme::Geonames => "Geonames",
            Scheme::Pactols => "PACTOLS",
            Scheme::Custom(name) => name,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = VocabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PeriodO" | "periodo" => Ok(Scheme::PeriodO),
            "Geonames" | "geonames" => Ok(Scheme::Geonames),
            "PACTOLS" | "pactols" => Ok(Scheme::Pactols),
            "" => Err(VocabError::UnknownScheme(String::new())),
            other if other.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_') => {
                Ok(Scheme::Custom(other.to_string()))
            }
            other => Err(VocabError::UnknownScheme(other.to_string())),
        }
    }
}

impl Serialize for Scheme {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyEntry {
    pub scheme: Scheme,
    pub uri: String,
    pub preferred_label: String,
    #[serde(default)]
    pub alt_labels: Vec<String>,
    /// `[min_year, max_year]`, PeriodO only.
    #[serde(default)]
    pub bounds: Option<(i32, i32)>,
    /// `[lat, lon]`, Geonames only.
    #[serde(default)]
    pub coords: Option<(f64, f64)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VocabError {
    #[error("FIXTURE_PARSE: line {line}: {reason}")]
    FixtureParse { line: usize, reason: String },
    #[error("UNKNOWN_SCHEME: {0}")]
    UnknownScheme(String),
    #[error("NOT_FOUND: {0}")]
    NotFound(String),
}

impl VocabError {
    pub fn code(&self) -> &'static str {
        match self {
            VocabError::FixtureParse { .. } => "FIXTURE_PARSE",
            VocabError::UnknownScheme(_) => "UNKNOWN_SCHEME",
            VocabError::NotFound(_) => "NOT_FOUND",
        }
    }
}

/// Case-folds, strips diacritics and collapses whitespace.
pub fn normalize_label(s: &str) -> String {
    let folded: String = s
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect();
    // lowercasing can reintroduce decomposable characters (e.g. U+0130)
    let stripped: String = folded.nfkd().filter(|c| !is_combining_mark(*c)).collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Default, Clone)]
struct SchemeIndex {
    entries: Vec<VocabularyEntry>,
    by_uri: HashMap<String, usize>,
    by_label: BTreeMap<String, Vec<usize>>,
}

impl SchemeIndex {
    fn insert(&mut self, entry: VocabularyEntry) {
        let idx = self.entries.len();
        self.by_uri.insert(entry.uri.clone(), idx);
        for label in std::iter::once(&entry.preferred_label).chain(&entry.alt_labels) {
            let slot = self.by_label.entry(normalize_label(label)).or_default();
            if !slot.contains(&idx) {
                slot.push(idx);
            }
        }
        self.entries.push(entry);
    }
}

/// Loaded vocabularies, indexed by uri and by normalized label.
///
/// Loading happens once at startup; afterwards the index is only read.
#[derive(Debug, Default, Clone)]
pub struct VocabIndex {
    schemes: BTreeMap<Scheme, SchemeIndex>,
}

impl VocabIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index preloaded with the bundled sample fixtures.
    pub fn with_bundled() -> Self {
        let mut idx = VocabIndex::new();
        idx.load_fixture(Scheme::PeriodO, PERIODO_SAMPLE.as_bytes())
            .expect("bundled PeriodO fixture");
        idx.load_fixture(Scheme::Geonames, GEONAMES_SAMPLE.as_bytes())
            .expect("bundled Geonames fixture");
        idx.load_fixture(Scheme::Pactols, PACTOLS_SAMPLE.as_bytes())
            .expect("bundled PACTOLS fixture");
        idx
    }

    pub fn is_loaded(&self, scheme: &Scheme) -> bool {
        self.schemes.contains_key(scheme)
    }

    pub fn len(&self, scheme: &Scheme) -> usize {
        self.schemes.get(scheme).map_or(0, |s| s.entries.len())
    }

    pub fn entries(&self, scheme: &Scheme) -> &[VocabularyEntry] {
        self.schemes.get(scheme).map_or(&[], |s| &s.entries)
    }

    /// Loads one fixture for `scheme`. Either every line loads or nothing
    /// does. Returns the number of entries added.
    pub fn load_fixture(&mut self, scheme: Scheme, bytes: &[u8]) -> Result<usize, VocabError> {
        let text = std::str::from_utf8(bytes).map_err(|e| VocabError::FixtureParse {
            line: 0,
            reason: format!("not UTF-8: {e}"),
        })?;
        let existing = self.schemes.get(&scheme);
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut parsed = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let fail = |reason: String| VocabError::FixtureParse { line: line_no, reason };
            let entry: VocabularyEntry = serde_json::from_str(trimmed).map_err(|e| fail(e.to_string()))?;
            if entry.scheme != scheme {
                return Err(fail(format!("scheme {} in a {} fixture", entry.scheme, scheme)));
            }
            if !is_absolute_uri(&entry.uri) {
                return Err(fail(format!("uri '{}' is not absolute", entry.uri)));
            }
            if entry.preferred_label.trim().is_empty() {
                return Err(fail("empty preferred_label".into()));
            }
            if let Some((min, max)) = entry.bounds {
                if min > max {
                    return Err(fail(format!("bounds {min} > {max}")));
                }
            }
            if let Some((lat, lon)) = entry.coords {
                if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                    return Err(fail(format!("coordinates ({lat}, {lon}) out of range")));
                }
            }
            if let Some(first) = seen.insert(entry.uri.clone(), line_no) {
                return Err(fail(format!("duplicate uri {} (first on line {first})", entry.uri)));
            }
            if existing.is_some_and(|s| s.by_uri.contains_key(&entry.uri)) {
                return Err(fail(format!("uri {} already loaded", entry.uri)));
            }
            parsed.push(entry);
        }
        let count = parsed.len();
        let index = self.schemes.entry(scheme).or_default();
        for entry in parsed {
            index.insert(entry);
        }
        Ok(count)
    }

    /// Exact normalized-label matches first, then prefix matches, then
    /// substring matches; ties broken by uri.
    pub fn search(&self, scheme: &Scheme, query: &str, limit: usize) -> Result<Vec<&VocabularyEntry>, VocabError> {
        let index = self
            .schemes
            .get(scheme)
            .ok_or_else(|| VocabError::UnknownScheme(scheme.to_string()))?;
        let q = normalize_label(query);

        // best (lowest) match class per entry: 0 exact, 1 prefix, 2 substring
        let mut best: HashMap<usize, u8> = HashMap::new();
        let mut note = |ids: &[usize], class: u8| {
            for &id in ids {
                best.entry(id).and_modify(|c| *c = (*c).min(class)).or_insert(class);
            }
        };
        if let Some(ids) = index.by_label.get(&q) {
            note(ids, 0);
        }
        for (label, ids) in index.by_label.range(q.clone()..) {
            if !label.starts_with(&q) {
                break;
            }
            note(ids, 1);
        }
        if !q.is_empty() {
            for (label, ids) in &index.by_label {
                if label.contains(&q) {
                    note(ids, 2);
                }
            }
        }

        let mut ranked: Vec<(u8, &VocabularyEntry)> =
            best.into_iter().map(|(id, class)| (class, &index.entries[id])).collect();
        ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.uri.cmp(&b.1.uri)));
        Ok(ranked.into_iter().take(limit).map(|(_, e)| e).collect())
    }

    pub fn resolve(&self, scheme: &Scheme, uri: &str) -> Result<&VocabularyEntry, VocabError> {
        let index = self
            .schemes
            .get(scheme)
            .ok_or_else(|| VocabError::UnknownScheme(scheme.to_string()))?;
        index
            .by_uri
            .get(uri)
            .map(|&i| &index.entries[i])
            .ok_or_else(|| VocabError::NotFound(uri.to_string()))
    }

    /// Checks every vocabulary reference of a deposit. Unresolvable uris are
    /// errors; references into a scheme with no loaded fixture are warnings.
    pub fn check_deposit_terms(&self, deposit: &Deposit) -> ValidationReport {
        let mut report = ValidationReport::new();
        let lists = [
            ("period_terms", &deposit.period_terms),
            ("place_terms", &deposit.place_terms),
            ("subject_terms", &deposit.subject_terms),
        ];
        for (key, refs) in lists {
            for (i, r) in refs.iter().enumerate() {
                let path = format!("{key}[{i}].uri");
                match self.resolve(&r.scheme, &r.uri) {
                    Ok(_) => {}
                    Err(VocabError::UnknownScheme(s)) => {
                        report.warning(path, "VOCAB_SCHEME_ABSENT", format!("no fixture loaded for {s}"))
                    }
                    Err(_) => report.error(
                        path,
                        "VOCAB_UNRESOLVED",
                        format!("{} is not a known {} term", r.uri, r.scheme),
                    ),
                }
            }
        }
        report
    }
}

/// An absolute URI: a scheme followed by ':' and a non-empty remainder.
pub fn is_absolute_uri(s: &str) -> bool {
    s.trim() == s && !s.is_empty() && url::Url::parse(s).is_ok_and(|u| !u.cannot_be_a_base() || !u.path().is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(scheme: &str, uri: &str, label: &str) -> String {
        format!(r#"{{"scheme":"{scheme}","uri":"{uri}","preferred_label":"{label}","alt_labels":[]}}"#)
    }

    #[test]
    fn empty_fixture_loads_nothing() {
        let mut idx = VocabIndex::new();
        assert_eq!(idx.load_fixture(Scheme::Pactols, b"").unwrap(), 0);
        assert!(idx.is_loaded(&Scheme::Pactols));
    }

    #[test]
    fn bundled_periodo_sample_has_fifty_entries() {
        let mut idx = VocabIndex::new();
        assert_eq!(idx.load_fixture(Scheme::PeriodO, PERIODO_SAMPLE.as_bytes()).unwrap(), 50);
    }

    #[test]
    fn duplicate_uri_names_line() {
        let text = [
            line("PACTOLS", "https://ark.frantiq.fr/ark:/26678/pcrt1", "thermes"),
            line("PACTOLS", "https://ark.frantiq.fr/ark:/26678/pcrt2", "villa"),
            line("PACTOLS", "https://ark.frantiq.fr/ark:/26678/pcrt1", "bains"),
        ]
        .join("\n");
        let mut idx = VocabIndex::new();
        let err = idx.load_fixture(Scheme::Pactols, text.as_bytes()).unwrap_err();
        assert_eq!(err, VocabError::FixtureParse { line: 3, reason: err_reason(&err) });
        assert_eq!(idx.len(&Scheme::Pactols), 0, "failed load must not be partial");
    }

    fn err_reason(e: &VocabError) -> String {
        match e {
            VocabError::FixtureParse { reason, .. } => reason.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_bad_bounds_and_wrong_scheme() {
        let mut idx = VocabIndex::new();
        let bad = r#"{"scheme":"PeriodO","uri":"http://n2t.net/ark:/99152/p0x","preferred_label":"x","bounds":[10,-10]}"#;
        assert_eq!(idx.load_fixture(Scheme::PeriodO, bad.as_bytes()).unwrap_err().code(), "FIXTURE_PARSE");
        let other = line("Geonames", "https://sws.geonames.org/1/", "x");
        assert!(idx.load_fixture(Scheme::PeriodO, other.as_bytes()).is_err());
    }

    #[test]
    fn exact_match_ranks_first() {
        let idx = VocabIndex::with_bundled();
        let hits = idx.search(&Scheme::PeriodO, "Gallo-Roman", 10).unwrap();
        assert_eq!(hits[0].preferred_label, "Gallo-Roman");
    }

    #[test]
    fn accent_insensitive() {
        let idx = VocabIndex::with_bundled();
        let hits = idx.search(&Scheme::Pactols, "ETABLISSEMENT THERMAL", 5).unwrap();
        assert_eq!(hits[0].preferred_label, "établissement thermal");
    }

    #[test]
    fn no_match_is_empty() {
        let idx = VocabIndex::with_bundled();
        assert!(idx.search(&Scheme::PeriodO, "zzz-no-such-term", 10).unwrap().is_empty());
    }

    #[test]
    fn unknown_scheme_and_missing_uri() {
        let idx = VocabIndex::with_bundled();
        let custom = Scheme::Custom("local".into());
        assert_eq!(idx.search(&custom, "x", 1).unwrap_err().code(), "UNKNOWN_SCHEME");
        assert_eq!(idx.resolve(&Scheme::PeriodO, "http://example.org/none").unwrap_err().code(), "NOT_FOUND");
    }

    #[test]
    fn resolve_after_search() {
        let idx = VocabIndex::with_bundled();
        let first = idx.search(&Scheme::Geonames, "Chassenon", 1).unwrap()[0];
        assert_eq!(idx.resolve(&Scheme::Geonames, &first.uri).unwrap(), first);
    }

    #[test]
    fn limit_caps_results() {
        let idx = VocabIndex::with_bundled();
        assert_eq!(idx.search(&Scheme::PeriodO, "", 7).unwrap().len(), 7);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in "\\PC{0,30}") {
            let once = normalize_label(&s);
            prop_assert_eq!(normalize_label(&once), once);
        }

        #[test]
        fn search_results_come_from_loaded_entries(q in "[a-zé ]{0,6}", limit in 0usize..20) {
            let idx = VocabIndex::with_bundled();
            let hits = idx.search(&Scheme::PeriodO, &q, limit).unwrap();
            prop_assert!(hits.len() <= limit);
            for h in hits {
                prop_assert!(idx.entries(&Scheme::PeriodO).contains(h));
            }
        }
    }
}
