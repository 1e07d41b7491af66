//! The catalog store: deposits, pid registry, blobs, search index and OAI
//! records behind a single writer.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Datelike, SubsecRound, Utc};
use depot3d_core::catalog::{
    is_http_url, is_plain_filename, to_dublin_core, validate_deposit_with, validate_for_publication, Deposit,
    DepositStatus, DocumentRecord, MediaRole, StorageRef,
};
use depot3d_core::digest::is_sha256_hex;
use depot3d_core::formats::{classify_with, make_preview, parse_ply, FormatClass, FormatVerdict};
use depot3d_core::identifiers::{PidKind, PidRegistry};
use depot3d_core::package::{build_package_with, PackageError};
use depot3d_core::report::ValidationReport;
use depot3d_core::vocab::{Scheme, VocabIndex, GEONAMES_SAMPLE, PACTOLS_SAMPLE, PERIODO_SAMPLE};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::auth::{Caller, Role, TokenTable};
use crate::blob::{BlobStore, ScrubReport};
use crate::clock::Clock;
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::links::{check_links, Fetcher};
use crate::oai::{oai_handle, oai_identifier, OaiProvider, OaiRecord};
use crate::search::{SearchHit, SearchIndex, SearchPage, SearchQuery};

pub const CATALOG_FILE: &str = "catalog.json";
pub const BLOB_DIR: &str = "blobs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDeposit {
    pub deposit: Deposit,
    pub owner: String,
    /// Bumped on every change; drafts are updated against it.
    pub revision: u64,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
    /// OAI datestamp; set when first published, never decreases.
    pub datestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogState {
    pub deposits: BTreeMap<u64, StoredDeposit>,
    pub registry: PidRegistry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPid {
    pub local_id: u64,
    pub pid: String,
    pub pid_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositView {
    pub local_id: u64,
    pub owner: String,
    pub revision: u64,
    pub status: DepositStatus,
    pub pid: Option<String>,
    pub pid_url: Option<String>,
    pub object_pids: Vec<ObjectPid>,
    pub datestamp: Option<DateTime<Utc>>,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
    pub editable: bool,
    pub deposit: Deposit,
    /// Present for callers who may edit the deposit.
    pub report: Option<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositSummary {
    pub local_id: u64,
    pub title: String,
    pub owner: String,
    pub status: DepositStatus,
    pub revision: u64,
    pub pid: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishOutcome {
    pub pid: String,
    pub pid_url: String,
    pub object_pids: Vec<ObjectPid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadOutcome {
    pub document: DocumentRecord,
    pub verdict: FormatVerdict,
    pub revision: u64,
}

/// Reference to bytes held elsewhere.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalDocument {
    pub url: String,
    pub sha256: String,
    /// Defaults to the last path segment of the URL.
    pub filename: Option<String>,
    pub byte_size: Option<u64>,
    pub media_role: Option<MediaRole>,
}

pub enum DocumentContent {
    Bytes(Vec<u8>),
    External(String),
}

struct Inner {
    state: CatalogState,
    index: SearchIndex,
    oai: BTreeMap<u64, OaiRecord>,
}

pub struct Repository {
    config: ServiceConfig,
    tokens: TokenTable,
    blobs: BlobStore,
    vocab: VocabIndex,
    clock: Arc<dyn Clock>,
    inner: RwLock<Inner>,
    catalog_path: PathBuf,
}

fn load_vocab(config: &ServiceConfig) -> Result<VocabIndex, ServiceError> {
    let mut idx = VocabIndex::new();
    let schemes = [
        (Scheme::PeriodO, &config.vocab.periodo, PERIODO_SAMPLE),
        (Scheme::Geonames, &config.vocab.geonames, GEONAMES_SAMPLE),
        (Scheme::Pactols, &config.vocab.pactols, PACTOLS_SAMPLE),
    ];
    for (scheme, path, bundled) in schemes {
        let bytes = match path {
            Some(p) => fs::read(p).map_err(|e| ServiceError::Io(format!("{}: {e}", p.display())))?,
            None => bundled.as_bytes().to_vec(),
        };
        idx.load_fixture(scheme.clone(), &bytes)
            .map_err(|e| ServiceError::Io(format!("{scheme} vocabulary: {e}")))?;
    }
    Ok(idx)
}

fn is_editor(c: &Caller, sd: &StoredDeposit) -> bool {
    c.role >= Role::Depositor && (c.is_curator() || c.owns(&sd.owner))
}

fn can_view(c: &Caller, sd: &StoredDeposit) -> bool {
    (sd.deposit.is_published() && sd.deposit.access_policy == depot3d_core::catalog::AccessPolicy::Public)
        || is_editor(c, sd)
}

fn require_depositor(c: &Caller) -> Result<(), ServiceError> {
    if c.role >= Role::Depositor {
        Ok(())
    } else {
        Err(ServiceError::Unauthorized("a depositor or curator token is required".into()))
    }
}

fn check_view(c: &Caller, id: u64, sd: Option<&StoredDeposit>) -> Result<(), ServiceError> {
    match sd {
        Some(sd) if can_view(c, sd) => Ok(()),
        Some(sd) if sd.deposit.is_published() => Err(ServiceError::Forbidden(format!("deposit {id} is restricted"))),
        _ => Err(ServiceError::NotFound(format!("deposit {id}"))),
    }
}

/// Viewing rights, then editing rights.
fn check_edit(c: &Caller, id: u64, sd: Option<&StoredDeposit>) -> Result<(), ServiceError> {
    require_depositor(c)?;
    check_view(c, id, sd)?;
    let sd = sd.expect("checked by check_view");
    if !is_editor(c, sd) {
        return Err(ServiceError::Unauthorized(format!("deposit {id} belongs to another depositor")));
    }
    Ok(())
}

fn check_draft(id: u64, sd: &StoredDeposit) -> Result<(), ServiceError> {
    if sd.deposit.is_published() {
        Err(ServiceError::Frozen(id))
    } else {
        Ok(())
    }
}

fn now_secs(clock: &dyn Clock) -> DateTime<Utc> {
    clock.now().trunc_subsecs(0)
}

fn strip_pids(d: &mut Deposit) {
    d.pid = None;
    d.status = DepositStatus::Draft;
    for o in &mut d.objects {
        o.pid = None;
    }
}

fn pid_view(d: &Deposit) -> Vec<ObjectPid> {
    d.objects
        .iter()
        .filter_map(|o| {
            o.pid.as_ref().map(|p| ObjectPid {
                local_id: o.local_id,
                pid: p.to_string(),
                pid_url: p.resolve_url(),
            })
        })
        .collect()
}

fn map_package_error(e: PackageError) -> ServiceError {
    match e {
        PackageError::ValidationFailed(r) => ServiceError::ValidationFailed(r),
        PackageError::MissingFile { .. } | PackageError::SourceMismatch { .. } => ServiceError::MissingBlob(e.to_string()),
        other => ServiceError::Io(other.to_string()),
    }
}

impl Repository {
    pub fn open(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        fs::create_dir_all(&config.data_dir)?;
        let blobs = BlobStore::open(config.data_dir.join(BLOB_DIR))?;
        let catalog_path = config.data_dir.join(CATALOG_FILE);
        let state = match fs::read(&catalog_path) {
            Ok(bytes) => {
                let state: CatalogState = serde_json::from_slice(&bytes)
                    .map_err(|e| ServiceError::Io(format!("{}: {e}", catalog_path.display())))?;
                if state.registry.config != config.pid {
                    return Err(ServiceError::Io(format!(
                        "catalog was created with pid prefix {}/{}, configuration says {}/{}",
                        state.registry.config.prefix,
                        state.registry.config.namespace,
                        config.pid.prefix,
                        config.pid.namespace
                    )));
                }
                state
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => CatalogState {
                deposits: BTreeMap::new(),
                registry: PidRegistry::new(config.pid.clone()),
            },
            Err(e) => return Err(e.into()),
        };
        let vocab = load_vocab(&config)?;
        let repo = Repository {
            tokens: TokenTable::new(config.tokens.clone()),
            config,
            blobs,
            vocab,
            clock,
            inner: RwLock::new(Inner {
                state,
                index: SearchIndex::new(),
                oai: BTreeMap::new(),
            }),
            catalog_path,
        };
        {
            let mut inner = repo.inner.write();
            let ids: Vec<u64> = inner.state.deposits.keys().copied().collect();
            for id in ids {
                repo.refresh(&mut inner, id);
            }
        }
        Ok(repo)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn vocab(&self) -> &VocabIndex {
        &self.vocab
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }

    pub fn caller(&self, token: Option<&str>) -> Result<Caller, ServiceError> {
        self.tokens
            .resolve(token)
            .ok_or_else(|| ServiceError::Unauthorized("unknown token".into()))
    }

    pub fn snapshot(&self) -> CatalogState {
        self.inner.read().state.clone()
    }

    /// Rebuilds the derived search and OAI entries of one deposit.
    fn refresh(&self, inner: &mut Inner, id: u64) {
        inner.index.remove(id);
        inner.oai.remove(&id);
        let Some(sd) = inner.state.deposits.get(&id) else {
            return;
        };
        let d = &sd.deposit;
        if !d.is_published() {
            return;
        }
        inner.index.index(d, &self.vocab);
        if d.access_policy != depot3d_core::catalog::AccessPolicy::Public {
            return;
        }
        let (Some(pid), Some(datestamp)) = (&d.pid, sd.datestamp) else {
            return;
        };
        match to_dublin_core(d) {
            Ok(dc) => {
                inner.oai.insert(
                    id,
                    OaiRecord {
                        identifier: oai_identifier(&self.config.repo_id, &pid.to_string()),
                        datestamp,
                        local_id: id,
                        dc,
                        deleted: false,
                    },
                );
            }
            Err(e) => log::warn!("deposit {id} has no Dublin Core export: {e}"),
        }
    }

    fn persist(&self, state: &CatalogState) -> Result<(), ServiceError> {
        let bytes = serde_json::to_vec(state).map_err(|e| ServiceError::Io(e.to_string()))?;
        let dir = self.catalog_path.parent().unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&self.catalog_path).map_err(|e| ServiceError::Io(e.error.to_string()))?;
        Ok(())
    }

    /// Runs one transaction. `f` works on a copy of the catalog; the copy
    /// replaces the live state only once it has been written to disk, so a
    /// failed transaction changes nothing.
    fn commit<T>(
        &self,
        f: impl FnOnce(&mut CatalogState, DateTime<Utc>) -> Result<(T, Vec<u64>), ServiceError>,
    ) -> Result<T, ServiceError> {
        let mut inner = self.inner.write();
        let mut next = inner.state.clone();
        let now = now_secs(self.clock.as_ref());
        let (out, touched) = f(&mut next, now)?;
        self.persist(&next)?;
        inner.state = next;
        for id in touched {
            self.refresh(&mut inner, id);
        }
        Ok(out)
    }

    /// Internal storage keys must name stored blobs holding the recorded
    /// checksum.
    fn check_blobs(&self, d: &Deposit) -> Result<(), ServiceError> {
        for (o, doc) in d.documents() {
            if let Some(StorageRef::Internal { key }) = &doc.storage {
                if key != &doc.checksum || !self.blobs.contains(key) {
                    return Err(ServiceError::MissingBlob(format!(
                        "object {} document '{}': no stored blob {key}",
                        o.local_id, doc.filename
                    )));
                }
            }
        }
        Ok(())
    }

    /// Everything publication requires: the catalog rules, resolvable
    /// vocabulary terms and present blobs.
    pub fn publication_report(&self, d: &Deposit) -> ValidationReport {
        let mut report = if d.is_published() {
            validate_deposit_with(d, &self.config.whitelist)
        } else {
            validate_for_publication(d, &self.config.whitelist)
        };
        report.merge(self.vocab.check_deposit_terms(d));
        for (i, o) in d.objects.iter().enumerate() {
            for (j, doc) in o.documents.iter().enumerate() {
                if let Some(StorageRef::Internal { key }) = &doc.storage {
                    if !self.blobs.contains(key) {
                        report.error(
                            format!("objects[{i}].documents[{j}].storage.key"),
                            "MISSING_BLOB",
                            format!("no stored blob {key}"),
                        );
                    }
                }
            }
        }
        report
    }

    pub fn create_deposit(&self, caller: &Caller, mut d: Deposit) -> Result<u64, ServiceError> {
        require_depositor(caller)?;
        let owner = caller.user.clone().unwrap_or_default();
        strip_pids(&mut d);
        self.check_blobs(&d)?;
        self.commit(|st, now| {
            let id = if d.local_id == 0 {
                st.deposits.keys().next_back().map_or(1, |m| m + 1)
            } else {
                d.local_id
            };
            if st.deposits.contains_key(&id) {
                return Err(ServiceError::DuplicateId(format!("deposit {id} exists")));
            }
            d.local_id = id;
            st.deposits.insert(
                id,
                StoredDeposit {
                    deposit: d,
                    owner,
                    revision: 1,
                    created: now,
                    updated: now,
                    datestamp: None,
                },
            );
            Ok((id, vec![id]))
        })
    }

    pub fn get_deposit(&self, caller: &Caller, id: u64) -> Result<DepositView, ServiceError> {
        let sd = {
            let inner = self.inner.read();
            let sd = inner.state.deposits.get(&id);
            check_view(caller, id, sd)?;
            sd.expect("checked").clone()
        };
        let editable = is_editor(caller, &sd);
        Ok(DepositView {
            local_id: id,
            owner: sd.owner.clone(),
            revision: sd.revision,
            status: sd.deposit.status,
            pid: sd.deposit.pid.as_ref().map(|p| p.to_string()),
            pid_url: sd.deposit.pid.as_ref().map(|p| p.resolve_url()),
            object_pids: pid_view(&sd.deposit),
            datestamp: sd.datestamp,
            created: sd.created,
            updated: sd.updated,
            editable,
            report: editable.then(|| self.publication_report(&sd.deposit)),
            deposit: sd.deposit,
        })
    }

    /// Deposits the caller may edit (all of them for a curator).
    pub fn list_editable(&self, caller: &Caller) -> Result<Vec<DepositSummary>, ServiceError> {
        require_depositor(caller)?;
        let inner = self.inner.read();
        Ok(inner
            .state
            .deposits
            .values()
            .filter(|sd| is_editor(caller, sd))
            .map(|sd| DepositSummary {
                local_id: sd.deposit.local_id,
                title: sd.deposit.title.clone(),
                owner: sd.owner.clone(),
                status: sd.deposit.status,
                revision: sd.revision,
                pid: sd.deposit.pid.as_ref().map(|p| p.to_string()),
            })
            .collect())
    }

    pub fn validation(&self, caller: &Caller, id: u64) -> Result<ValidationReport, ServiceError> {
        let d = {
            let inner = self.inner.read();
            let sd = inner.state.deposits.get(&id);
            check_view(caller, id, sd)?;
            sd.expect("checked").deposit.clone()
        };
        Ok(self.publication_report(&d))
    }

    /// Replaces a draft. `revision` must be the one last read.
    pub fn update_draft(&self, caller: &Caller, id: u64, revision: u64, mut d: Deposit) -> Result<u64, ServiceError> {
        strip_pids(&mut d);
        d.local_id = id;
        self.check_blobs(&d)?;
        self.commit(|st, now| {
            let sd = st.deposits.get_mut(&id);
            check_edit(caller, id, sd.as_deref())?;
            let sd = sd.expect("checked");
            check_draft(id, sd)?;
            if sd.revision != revision {
                return Err(ServiceError::Conflict(format!(
                    "deposit {id} is at revision {}, not {revision}",
                    sd.revision
                )));
            }
            sd.deposit = d;
            sd.revision += 1;
            sd.updated = now;
            Ok((sd.revision, vec![id]))
        })
    }

    fn precheck_draft_edit(&self, caller: &Caller, id: u64, object_id: u64) -> Result<(), ServiceError> {
        let inner = self.inner.read();
        let sd = inner.state.deposits.get(&id);
        check_edit(caller, id, sd)?;
        let sd = sd.expect("checked");
        check_draft(id, sd)?;
        if sd.deposit.object(object_id).is_none() {
            return Err(ServiceError::NotFound(format!("object {object_id} of deposit {id}")));
        }
        Ok(())
    }

    fn attach(
        &self,
        caller: &Caller,
        id: u64,
        object_id: u64,
        mut record: DocumentRecord,
    ) -> Result<(DocumentRecord, u64), ServiceError> {
        self.commit(|st, now| {
            let sd = st.deposits.get_mut(&id);
            check_edit(caller, id, sd.as_deref())?;
            let sd = sd.expect("checked");
            check_draft(id, sd)?;
            let obj = sd
                .deposit
                .object_mut(object_id)
                .ok_or_else(|| ServiceError::NotFound(format!("object {object_id} of deposit {id}")))?;
            match obj.document_mut(&record.filename) {
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
                obj.final_model = Some(record.filename.clone());
            }
            sd.revision += 1;
            sd.updated = now;
            Ok(((record, sd.revision), vec![id]))
        })
    }

    /// Stores the bytes content-addressed and records the format verdict.
    /// A document of the same name is replaced, keeping its relations.
    pub fn upload_document(
        &self,
        caller: &Caller,
        id: u64,
        object_id: u64,
        filename: &str,
        media_role: Option<MediaRole>,
        bytes: &[u8],
    ) -> Result<UploadOutcome, ServiceError> {
        if !is_plain_filename(filename) {
            return Err(ServiceError::BadRequest(format!("'{filename}' is not a plain file name")));
        }
        self.precheck_draft_edit(caller, id, object_id)?;
        let key = self.blobs.put(bytes)?;
        let verdict = classify_with(filename, bytes, &self.config.whitelist);
        let record = DocumentRecord {
            filename: filename.to_string(),
            media_role,
            byte_size: Some(bytes.len() as u64),
            checksum: key.clone(),
            format_class: Some(verdict.format_class),
            storage: Some(StorageRef::Internal { key }),
            relations: Vec::new(),
        };
        let (document, revision) = self.attach(caller, id, object_id, record)?;
        Ok(UploadOutcome {
            document,
            verdict,
            revision,
        })
    }

    pub fn add_external_document(
        &self,
        caller: &Caller,
        id: u64,
        object_id: u64,
        ext: ExternalDocument,
    ) -> Result<(DocumentRecord, u64), ServiceError> {
        if !is_http_url(&ext.url) {
            return Err(ServiceError::BadUrl(format!("'{}' is not an absolute http(s) URL", ext.url)));
        }
        let sha = ext.sha256.trim().to_ascii_lowercase();
        if !is_sha256_hex(&sha) {
            return Err(ServiceError::BadChecksum("expected sha256 must be 64 hex characters".into()));
        }
        let filename = match ext.filename {
            Some(f) => f,
            None => url::Url::parse(&ext.url)
                .ok()
                .and_then(|u| u.path_segments().and_then(|mut s| s.next_back().map(str::to_string)))
                .filter(|s| !s.is_empty())
                .ok_or_else(|| ServiceError::BadRequest("cannot derive a file name from the URL".into()))?,
        };
        if !is_plain_filename(&filename) {
            return Err(ServiceError::BadRequest(format!("'{filename}' is not a plain file name")));
        }
        self.precheck_draft_edit(caller, id, object_id)?;
        let record = DocumentRecord {
            filename,
            media_role: ext.media_role,
            byte_size: ext.byte_size,
            checksum: sha,
            format_class: Some(FormatClass::DepositOnly),
            storage: Some(StorageRef::External { url: ext.url }),
            relations: Vec::new(),
        };
        self.attach(caller, id, object_id, record)
    }

    fn visible_document(
        &self,
        caller: &Caller,
        id: u64,
        object_id: u64,
        filename: Option<&str>,
    ) -> Result<DocumentRecord, ServiceError> {
        let inner = self.inner.read();
        let sd = inner.state.deposits.get(&id);
        check_view(caller, id, sd)?;
        let obj = sd
            .expect("checked")
            .deposit
            .object(object_id)
            .ok_or_else(|| ServiceError::NotFound(format!("object {object_id} of deposit {id}")))?;
        let name = match filename {
            Some(f) => f.to_string(),
            None => obj
                .final_model
                .clone()
                .ok_or_else(|| ServiceError::NotFound(format!("object {object_id} has no final model")))?,
        };
        obj.document(&name)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("document '{name}'")))
    }

    pub fn document_content(
        &self,
        caller: &Caller,
        id: u64,
        object_id: u64,
        filename: &str,
    ) -> Result<DocumentContent, ServiceError> {
        let doc = self.visible_document(caller, id, object_id, Some(filename))?;
        match doc.storage {
            Some(StorageRef::Internal { key }) => self
                .blobs
                .get(&key)?
                .map(DocumentContent::Bytes)
                .ok_or(ServiceError::MissingBlob(key)),
            Some(StorageRef::External { url }) => Ok(DocumentContent::External(url)),
            None => Err(ServiceError::NotFound(format!("document '{filename}' has no content"))),
        }
    }

    /// Decimated binary PLY of the object's final model.
    pub fn preview(&self, caller: &Caller, id: u64, object_id: u64) -> Result<(String, Vec<u8>), ServiceError> {
        let doc = self.visible_document(caller, id, object_id, None)?;
        let Some(StorageRef::Internal { key }) = &doc.storage else {
            return Err(ServiceError::NotFound("final model is not stored here".into()));
        };
        let bytes = self.blobs.get(key)?.ok_or_else(|| ServiceError::MissingBlob(key.clone()))?;
        let model = parse_ply(&bytes).map_err(|e| ServiceError::BadRequest(format!("final model is not PLY: {e}")))?;
        make_preview(&model, object_id, self.config.preview_target, object_id)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))
    }

    /// Mints the deposit pid and one pid per object. Nothing is minted or
    /// changed when any check fails.
    pub fn publish(&self, caller: &Caller, id: u64) -> Result<PublishOutcome, ServiceError> {
        self.commit(|st, now| {
            let sd = st.deposits.get(&id);
            check_edit(caller, id, sd)?;
            let sd = sd.expect("checked");
            if sd.deposit.is_published() {
                return Err(ServiceError::AlreadyPublished(id));
            }
            let report = self.publication_report(&sd.deposit);
            if !report.is_error_free() {
                return Err(ServiceError::ValidationFailed(report));
            }
            let year = sd.deposit.deposit_date.expect("validated").year();
            let year = u16::try_from(year).map_err(|_| ServiceError::BadRequest(format!("deposit year {year}")))?;
            let pid = st
                .registry
                .mint(PidKind::Deposit, id, year)
                .map_err(|e| ServiceError::DuplicateId(e.to_string()))?;
            let mut object_pids = Vec::new();
            let sd = st.deposits.get_mut(&id).expect("present");
            for o in &mut sd.deposit.objects {
                let p = st
                    .registry
                    .mint_next(PidKind::Object, year)
                    .map_err(|e| ServiceError::DuplicateId(e.to_string()))?;
                object_pids.push(ObjectPid {
                    local_id: o.local_id,
                    pid: p.to_string(),
                    pid_url: p.resolve_url(),
                });
                o.pid = Some(p);
            }
            sd.deposit.pid = Some(pid.clone());
            sd.deposit.status = DepositStatus::Published;
            sd.revision += 1;
            sd.updated = now;
            sd.datestamp = Some(sd.datestamp.map_or(now, |prev| prev.max(now)));
            Ok((
                PublishOutcome {
                    pid: pid.to_string(),
                    pid_url: pid.resolve_url(),
                    object_pids,
                },
                vec![id],
            ))
        })
    }

    /// Starts a new draft from a published deposit. The draft cites the
    /// original by its resolver URL.
    pub fn new_version(&self, caller: &Caller, id: u64) -> Result<u64, ServiceError> {
        self.commit(|st, now| {
            let sd = st.deposits.get(&id);
            check_edit(caller, id, sd)?;
            let sd = sd.expect("checked");
            let Some(pid) = sd.deposit.pid.clone().filter(|_| sd.deposit.is_published()) else {
                return Err(ServiceError::BadRequest(format!("deposit {id} is a draft; edit it directly")));
            };
            let mut d = sd.deposit.clone();
            let owner = sd.owner.clone();
            strip_pids(&mut d);
            let new_id = st.deposits.keys().next_back().map_or(1, |m| m + 1);
            d.local_id = new_id;
            d.deposit_date = None;
            let url = pid.resolve_url();
            if !d.related_publications.contains(&url) {
                d.related_publications.push(url);
            }
            st.deposits.insert(
                new_id,
                StoredDeposit {
                    deposit: d,
                    owner,
                    revision: 1,
                    created: now,
                    updated: now,
                    datestamp: None,
                },
            );
            Ok((new_id, vec![new_id]))
        })
    }

    /// Adds a related publication. Allowed on published deposits too: the
    /// link is metadata about the deposit, not a change to its content.
    pub fn link_publication(&self, caller: &Caller, id: u64, pub_id: &str) -> Result<u64, ServiceError> {
        self.commit(|st, now| {
            let sd = st.deposits.get_mut(&id);
            check_edit(caller, id, sd.as_deref())?;
            let sd = sd.expect("checked");
            let before = sd.deposit.related_publications.len();
            let d = depot3d_core::catalog::link_publication(sd.deposit.clone(), pub_id)
                .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            if d.related_publications.len() != before {
                sd.deposit = d;
                sd.revision += 1;
                sd.updated = now;
                if let Some(prev) = sd.datestamp {
                    sd.datestamp = Some(prev.max(now));
                }
            }
            Ok((sd.revision, vec![id]))
        })
    }

    /// Probes the external documents without holding the catalog lock.
    pub fn check_links(&self, caller: &Caller, id: u64, fetcher: &dyn Fetcher) -> Result<ValidationReport, ServiceError> {
        let d = {
            let inner = self.inner.read();
            let sd = inner.state.deposits.get(&id);
            check_view(caller, id, sd)?;
            sd.expect("checked").deposit.clone()
        };
        Ok(check_links(&d, fetcher))
    }

    /// Published deposits visible to the caller, by relevance then pid.
    pub fn search(&self, caller: &Caller, q: &SearchQuery) -> SearchPage {
        let per_page = q.per_page.unwrap_or(self.config.search_page_size).clamp(1, 1000);
        let page = q.page.unwrap_or(1).max(1);
        let inner = self.inner.read();
        let mut hits: Vec<SearchHit> = inner
            .index
            .matches(q)
            .into_iter()
            .filter_map(|(id, score)| {
                let sd = inner.state.deposits.get(&id)?;
                if !can_view(caller, sd) {
                    return None;
                }
                let pid = sd.deposit.pid.as_ref()?;
                Some(SearchHit {
                    local_id: id,
                    pid: pid.to_string(),
                    pid_url: pid.resolve_url(),
                    title: sd.deposit.title.clone(),
                    score,
                    restricted: sd.deposit.access_policy != depot3d_core::catalog::AccessPolicy::Public,
                })
            })
            .collect();
        hits.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.pid.cmp(&b.pid)));
        let total = hits.len();
        let hits = hits.into_iter().skip((page - 1).saturating_mul(per_page)).take(per_page).collect();
        SearchPage {
            total,
            page,
            per_page,
            hits,
        }
    }

    pub fn oai_records(&self) -> Vec<OaiRecord> {
        let inner = self.inner.read();
        let mut records: Vec<OaiRecord> = inner.oai.values().cloned().collect();
        records.sort_by_key(|r| (r.datestamp, r.local_id));
        records
    }

    pub fn oai(&self, args: &[(String, String)]) -> String {
        let records = self.oai_records();
        let base_url = self.config.oai_base_url();
        let provider = OaiProvider {
            repo_name: &self.config.repo_name,
            base_url: &base_url,
            admin_email: &self.config.admin_email,
            page_size: self.config.oai_page_size,
            records: &records,
        };
        oai_handle(&provider, args, self.clock.now())
    }

    /// Builds the archive package of a deposit and returns it as a tar
    /// stream rooted at `deposit-<id>/`.
    pub fn package_tar(&self, caller: &Caller, id: u64) -> Result<Vec<u8>, ServiceError> {
        let d = {
            let inner = self.inner.read();
            let sd = inner.state.deposits.get(&id);
            check_view(caller, id, sd)?;
            sd.expect("checked").deposit.clone()
        };
        let tmp = tempfile::tempdir()?;
        let out = tmp.path().join("pkg");
        build_package_with(&d, &self.blobs, &out, now_secs(self.clock.as_ref()), &self.config.whitelist)
            .map_err(map_package_error)?;
        let mut builder = tar::Builder::new(Vec::new());
        builder.mode(tar::HeaderMode::Deterministic);
        builder.append_dir_all(format!("deposit-{id}"), &out)?;
        Ok(builder.into_inner()?)
    }

    pub fn scrub(&self) -> Result<ScrubReport, ServiceError> {
        Ok(self.blobs.scrub()?)
    }
}
