use std::collections::{HashMap, HashSet};

use super::model::*;
use crate::digest::is_sha256_hex;
use crate::formats::{ArchivableWhitelist, FormatClass};
use crate::identifiers::PidKind;
use crate::report::ValidationReport;
use crate::vocab::{is_absolute_uri, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Check the deposit as it is.
    AsIs,
    /// Check that the deposit could be published now (pids still unminted).
    Publishing,
}

/// Validates a deposit at every level. Never fails: every problem becomes a
/// report entry, sorted by path.
pub fn validate_deposit(d: &Deposit) -> ValidationReport {
    validate_deposit_with(d, &ArchivableWhitelist::default())
}

pub fn validate_deposit_with(d: &Deposit, whitelist: &ArchivableWhitelist) -> ValidationReport {
    Checker::new(whitelist, Mode::AsIs).run(d)
}

/// Validation applied before minting identifiers: as for a published
/// deposit, except that the deposit and object pids may still be absent.
pub fn validate_for_publication(d: &Deposit, whitelist: &ArchivableWhitelist) -> ValidationReport {
    Checker::new(whitelist, Mode::Publishing).run(d)
}

struct Checker<'a> {
    whitelist: &'a ArchivableWhitelist,
    mode: Mode,
    report: ValidationReport,
}

fn blank(s: &str) -> bool {
    s.trim().is_empty()
}

impl<'a> Checker<'a> {
    fn new(whitelist: &'a ArchivableWhitelist, mode: Mode) -> Self {
        Checker {
            whitelist,
            mode,
            report: ValidationReport::new(),
        }
    }

    fn missing(&mut self, path: impl Into<String>) {
        let path = path.into();
        let msg = format!("required field {path} is missing");
        self.report.error(path, "MISSING", msg);
    }

    fn run(mut self, d: &Deposit) -> ValidationReport {
        let publishing = self.mode == Mode::Publishing || d.is_published();

        if d.local_id == 0 {
            self.missing("local_id");
        }
        match &d.pid {
            Some(pid) if pid.kind != PidKind::Deposit => self.report.error(
                "pid",
                "WRONG_PID_KIND",
                format!("{pid} is not a deposit identifier"),
            ),
            None if d.is_published() && self.mode == Mode::AsIs => {
                self.report
                    .error("pid", "UNMINTED_PID", "published deposit has no identifier")
            }
            _ => {}
        }
        if blank(&d.title) {
            self.missing("title");
        }
        match &d.deposit_creator {
            None => self.missing("deposit_creator"),
            Some(agent) => self.agent("deposit_creator", agent),
        }
        for (i, agent) in d.silent_partners.iter().enumerate() {
            self.agent(&format!("silent_partners[{i}]"), agent);
        }
        if blank(&d.nature_of_resource) {
            self.missing("nature_of_resource");
        } else if !KNOWN_NATURES_OF_RESOURCE.contains(&d.nature_of_resource.as_str()) {
            self.report.warning(
                "nature_of_resource",
                "UNKNOWN_VALUE",
                format!("'{}' is not a known nature of resource", d.nature_of_resource),
            );
        }
        if d.nature_of_deposit.is_none() {
            self.missing("nature_of_deposit");
        }
        if blank(&d.scientific_objectives) {
            self.missing("scientific_objectives");
        }
        if d.deposit_date.is_none() {
            self.missing("deposit_date");
        }
        self.range("project_date_range", d.project_date_range.as_ref());
        self.range("archaeological_date_range", d.archaeological_date_range.as_ref());
        self.vocab_refs("period_terms", &d.period_terms, Scheme::PeriodO);
        self.vocab_refs("place_terms", &d.place_terms, Scheme::Geonames);
        self.vocab_refs("subject_terms", &d.subject_terms, Scheme::Pactols);
        if blank(&d.citation) {
            self.missing("citation");
        }
        for (i, p) in d.related_publications.iter().enumerate() {
            if blank(p) {
                self.report.error(
                    format!("related_publications[{i}]"),
                    "INVALID_VALUE",
                    "empty publication identifier",
                );
            }
        }

        if d.objects.is_empty() {
            let msg = "a deposit must contain at least one virtual object";
            if publishing {
                self.report.error("objects", "EMPTY_DEPOSIT", msg);
            } else {
                self.report.warning("objects", "EMPTY_DEPOSIT", msg);
            }
        }
        let mut seen_ids = HashMap::new();
        for (i, obj) in d.objects.iter().enumerate() {
            let base = format!("objects[{i}]");
            if obj.local_id != 0 {
                if let Some(first) = seen_ids.insert(obj.local_id, i) {
                    self.report.error(
                        format!("{base}.local_id"),
                        "DUPLICATE_ID",
                        format!("object id {} already used by objects[{first}]", obj.local_id),
                    );
                }
            }
            self.object(&base, obj, d.is_published() && self.mode == Mode::AsIs);
        }
        self.report
    }

    fn agent(&mut self, path: &str, agent: &Agent) {
        if blank(&agent.name) {
            self.report
                .error(format!("{path}.name"), "EMPTY_NAME", "agent name is empty");
        }
    }

    fn range(&mut self, path: &str, range: Option<&YearRange>) {
        match range {
            None => self.missing(path),
            Some(r) if !r.is_ordered() => self.report.error(
                path,
                "RANGE_INVERTED",
                format!("min {} is after max {}", r.min, r.max),
            ),
            Some(_) => {}
        }
    }

    fn vocab_refs(&mut self, key: &str, refs: &[VocabularyRef], expected: Scheme) {
        for (i, r) in refs.iter().enumerate() {
            let path = format!("{key}[{i}]");
            if r.scheme != expected {
                self.report.error(
                    format!("{path}.scheme"),
                    "WRONG_SCHEME",
                    format!("expected a {expected} term, found {}", r.scheme),
                );
            }
            if !is_absolute_uri(&r.uri) {
                self.report.error(
                    format!("{path}.uri"),
                    "BAD_URI",
                    format!("'{}' is not an absolute URI", r.uri),
                );
            }
            if blank(&r.label) {
                self.report
                    .warning(format!("{path}.label"), "MISSING_LABEL", "term has no label");
            }
        }
    }

    fn object(&mut self, base: &str, obj: &VirtualObject, needs_pid: bool) {
        if obj.local_id == 0 {
            self.missing(format!("{base}.local_id"));
        }
        match &obj.pid {
            Some(pid) if pid.kind != PidKind::Object => self.report.error(
                format!("{base}.pid"),
                "WRONG_PID_KIND",
                format!("{pid} is not an object identifier"),
            ),
            None if needs_pid => self.report.error(
                format!("{base}.pid"),
                "UNMINTED_PID",
                "object of a published deposit has no identifier",
            ),
            _ => {}
        }
        if blank(&obj.title) {
            self.missing(format!("{base}.title"));
        }
        if obj.creators.is_empty() {
            self.missing(format!("{base}.creators"));
        }
        for (i, a) in obj.creators.iter().enumerate() {
            self.agent(&format!("{base}.creators[{i}]"), a);
        }
        for (i, a) in obj.contributors.iter().enumerate() {
            self.agent(&format!("{base}.contributors[{i}]"), a);
        }
        if obj.creation_3d_date.is_none() {
            self.missing(format!("{base}.creation_3d_date"));
        }
        self.range(&format!("{base}.archaeological_date"), obj.archaeological_date.as_ref());
        if blank(&obj.version) {
            self.missing(format!("{base}.version"));
        }
        if blank(&obj.category) {
            self.missing(format!("{base}.category"));
        } else if !KNOWN_CATEGORIES.contains(&obj.category.as_str()) {
            self.report.warning(
                format!("{base}.category"),
                "UNKNOWN_VALUE",
                format!("'{}' is not a known category", obj.category),
            );
        }

        let names: HashSet<&str> = obj.documents.iter().map(|d| d.filename.as_str()).collect();
        let mut seen = HashSet::new();
        for (i, doc) in obj.documents.iter().enumerate() {
            let path = format!("{base}.documents[{i}]");
            if !doc.filename.is_empty() && !seen.insert(doc.filename.as_str()) {
                self.report.error(
                    format!("{path}.filename"),
                    "DUPLICATE_FILENAME",
                    format!("'{}' appears twice in this object", doc.filename),
                );
            }
            self.document(&path, doc, &names);
        }

        if let Some(name) = &obj.final_model {
            let path = format!("{base}.final_model");
            match obj.document(name) {
                None => self.report.error(
                    path,
                    "BAD_FINAL_MODEL",
                    format!("no document named '{name}' in this object"),
                ),
                Some(doc) if doc.media_role != Some(MediaRole::FinalModel) => self.report.error(
                    path,
                    "BAD_FINAL_MODEL",
                    format!("'{name}' does not have the final-model role"),
                ),
                Some(_) => {}
            }
        }
    }

    fn document(&mut self, base: &str, doc: &DocumentRecord, siblings: &HashSet<&str>) {
        if blank(&doc.filename) {
            self.missing(format!("{base}.filename"));
        } else if !is_plain_filename(&doc.filename) {
            self.report.error(
                format!("{base}.filename"),
                "BAD_FILENAME",
                format!("'{}' must be a single path component", doc.filename),
            );
        }
        if doc.media_role.is_none() {
            self.missing(format!("{base}.media_role"));
        }
        if doc.byte_size.is_none() {
            self.missing(format!("{base}.byte_size"));
        }
        if doc.checksum.is_empty() {
            self.missing(format!("{base}.checksum"));
        } else if !is_sha256_hex(&doc.checksum) {
            self.report.error(
                format!("{base}.checksum"),
                "BAD_CHECKSUM",
                "checksum must be 64 lowercase hex characters",
            );
        }
        match doc.format_class {
            None => self.missing(format!("{base}.format_class")),
            Some(FormatClass::Archivable) if !self.whitelist.allows_filename(&doc.filename) => {
                self.report.error(
                    format!("{base}.format_class"),
                    "NOT_ARCHIVABLE",
                    format!("'{}' is not an archivable format", doc.filename),
                )
            }
            Some(_) => {}
        }
        match &doc.storage {
            None => self.missing(format!("{base}.storage")),
            Some(StorageRef::Internal { key }) if blank(key) => self.report.error(
                format!("{base}.storage.key"),
                "INVALID_VALUE",
                "internal storage key is empty",
            ),
            Some(StorageRef::External { url }) if !is_http_url(url) => self.report.error(
                format!("{base}.storage.url"),
                "BAD_URL",
                format!("'{url}' is not an absolute http(s) URL"),
            ),
            Some(_) => {}
        }
        for (i, rel) in doc.relations.iter().enumerate() {
            if !siblings.contains(rel.target.as_str()) {
                self.report.error(
                    format!("{base}.relations[{i}].target"),
                    "DANGLING_RELATION",
                    format!("no document named '{}' in this object", rel.target),
                );
            }
        }
    }
}

/// A filename usable as one path component on every platform.
pub fn is_plain_filename(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\', '\0'])
        && !name.chars().any(char::is_control)
}

pub fn is_http_url(s: &str) -> bool {
    url::Url::parse(s).is_ok_and(|u| matches!(u.scheme(), "http" | "https") && u.host().is_some())
}
