//! Talking to a running repository: push a local draft, harvest OAI-PMH.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use depot3d_core::catalog::{Deposit, StorageRef};
use depot3d_core::digest::sha256_hex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::Failure;

const OAI_NS: &str = "http://www.openarchives.org/OAI/2.0/";
const STATE_FILE: &str = ".harvest-state.json";

pub struct Client {
    agent: ureq::Agent,
    base: String,
    token: Option<String>,
}

impl Client {
    pub fn new(base: &str, token: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Client {
            agent,
            base: base.trim_end_matches('/').to_string(),
            token,
        }
    }

    fn auth(&self) -> Option<String> {
        self.token.as_ref().map(|t| format!("Bearer {t}"))
    }

    fn finish(&self, what: &str, resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Vec<u8>, Failure> {
        let mut resp = resp.map_err(|e| Failure::io(format!("{what}: {e}")))?;
        let status = resp.status().as_u16();
        let mut body = Vec::new();
        resp.body_mut()
            .as_reader()
            .read_to_end(&mut body)
            .map_err(|e| Failure::io(format!("{what}: {e}")))?;
        if status < 400 {
            return Ok(body);
        }
        let parsed: Option<Value> = serde_json::from_slice(&body).ok();
        let err = parsed.as_ref().and_then(|v| v.get("error"));
        let code = err
            .and_then(|e| e.get("code"))
            .and_then(Value::as_str)
            .unwrap_or("HTTP_ERROR")
            .to_string();
        let message = err
            .and_then(|e| e.get("message"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("HTTP {status}"));
        let report = err.and_then(|e| e.get("report")).filter(|r| !r.is_null()).cloned();
        let mut f = if status >= 500 {
            Failure::io(format!("{what}: {message}"))
        } else {
            Failure::user(&code, format!("{what}: {message}"))
        };
        f.code = code;
        f.report = report;
        Err(f)
    }

    pub fn get(&self, path: &str) -> Result<Vec<u8>, Failure> {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        self.finish(&format!("GET {path}"), req.call())
    }

    pub fn send(&self, method: &str, path: &str, content_type: &str, body: &[u8]) -> Result<Value, Failure> {
        let url = format!("{}{path}", self.base);
        let mut req = match method {
            "PUT" => self.agent.put(url),
            _ => self.agent.post(url),
        };
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        let resp = req.header("Content-Type", content_type).send(body);
        let bytes = self.finish(&format!("{method} {path}"), resp)?;
        if bytes.is_empty() {
            return Ok(Value::Null);
        }
        serde_json::from_slice(&bytes).map_err(|e| Failure::io(format!("{method} {path}: bad response: {e}")))
    }

    pub fn send_json(&self, method: &str, path: &str, body: &Value) -> Result<Value, Failure> {
        self.send(method, path, "application/json", body.to_string().as_bytes())
    }
}

fn enc(s: &str) -> String {
    url::form_urlencoded::byte_serialize(s.as_bytes()).collect()
}

/// Creates the deposit without its internal documents, uploads each local
/// file, then stores the full draft so relations and ordering survive.
pub fn push(client: &Client, draft: &Deposit, base_dir: &Path, publish: bool) -> Result<Value, Failure> {
    let mut files = Vec::new();
    let mut remote = draft.clone();
    for o in &mut remote.objects {
        for doc in &mut o.documents {
            if let Some(StorageRef::Internal { key }) = &doc.storage {
                let path = base_dir.join(key);
                let bytes = fs::read(&path).map_err(|e| {
                    Failure::user("MISSING_FILE", format!("{} (document {}): {e}", path.display(), doc.filename))
                })?;
                let digest = sha256_hex(&bytes);
                if digest != doc.checksum {
                    return Err(Failure::user(
                        "CHECKSUM_MISMATCH",
                        format!("{} changed since it was attached; run attach again", path.display()),
                    ));
                }
                files.push((o.local_id, doc.filename.clone(), doc.media_role, bytes));
                doc.storage = Some(StorageRef::Internal { key: digest });
            }
        }
    }
    let mut skeleton = draft.clone();
    for o in &mut skeleton.objects {
        o.documents.retain(|d| !matches!(d.storage, Some(StorageRef::Internal { .. })));
    }
    let created = client.send_json("POST", "/api/deposits", &serde_json::to_value(&skeleton).expect("serializes"))?;
    let id = created["local_id"]
        .as_u64()
        .ok_or_else(|| Failure::io("server did not return a local_id".to_string()))?;
    let mut revision = created["revision"].as_u64().unwrap_or(1);
    for (oid, filename, role, bytes) in &files {
        let mut path = format!("/api/deposits/{id}/objects/{oid}/documents?filename={}", enc(filename));
        if let Some(r) = role {
            path.push_str(&format!("&role={}", r.as_str()));
        }
        let out = client.send("POST", &path, "application/octet-stream", bytes)?;
        revision = out["revision"].as_u64().unwrap_or(revision);
    }
    remote.local_id = id;
    let put = client.send_json(
        "PUT",
        &format!("/api/deposits/{id}"),
        &json!({ "revision": revision, "deposit": remote }),
    )?;
    let mut result = json!({
        "local_id": id,
        "revision": put["revision"],
        "uploaded": files.len(),
    });
    if publish {
        let outcome = client.send("POST", &format!("/api/deposits/{id}/publish"), "application/json", b"")?;
        result["published"] = outcome;
    }
    Ok(result)
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct HarvestState {
    base_url: String,
    /// Latest datestamp seen; the next run asks for records `from` it.
    last_datestamp: Option<String>,
}

#[derive(Debug, Default, Serialize)]
pub struct HarvestSummary {
    pub requests: usize,
    pub records: usize,
    pub new: usize,
    pub updated: usize,
    pub unchanged: usize,
    pub deleted: usize,
    pub last_datestamp: Option<String>,
}

fn record_file_name(identifier: &str) -> String {
    let mut s: String = identifier
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    s.push_str(".xml");
    s
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn child<'a, 'i>(n: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    n.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn text_of(n: Option<roxmltree::Node>) -> String {
    n.and_then(|n| n.text()).unwrap_or_default().trim().to_string()
}

/// Walks `ListRecords` (following resumption tokens) and writes one XML
/// file per record into `out`. Only records changed since the previous run
/// are requested; rewriting an identical record does not count as new.
pub fn harvest(base_url: &str, out: &Path, full: bool) -> Result<HarvestSummary, Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    let state_path: PathBuf = out.join(STATE_FILE);
    let mut state: HarvestState = match fs::read(&state_path) {
        Ok(b) => serde_json::from_slice(&b)
            .map_err(|e| Failure::user("BAD_STATE", format!("{}: {e}", state_path.display())))?,
        Err(_) => HarvestState::default(),
    };
    if state.base_url != base_url {
        state = HarvestState {
            base_url: base_url.to_string(),
            last_datestamp: None,
        };
    }
    let client = Client::new("", None);
    let sep = if base_url.contains('?') { '&' } else { '?' };
    let mut query = String::from("verb=ListRecords&metadataPrefix=oai_dc");
    if let (false, Some(from)) = (full, &state.last_datestamp) {
        query.push_str(&format!("&from={}", enc(from)));
    }
    let mut summary = HarvestSummary::default();
    let mut latest = state.last_datestamp.clone();
    loop {
        let body = client.get(&format!("{base_url}{sep}{query}"))?;
        summary.requests += 1;
        let text = String::from_utf8(body).map_err(|_| Failure::io("OAI response is not UTF-8".to_string()))?;
        let doc = roxmltree::Document::parse(&text).map_err(|e| Failure::io(format!("OAI response: {e}")))?;
        let root = doc.root_element();
        if root.tag_name().namespace() != Some(OAI_NS) {
            return Err(Failure::io("response is not an OAI-PMH document".to_string()));
        }
        if let Some(err) = child(root, "error") {
            let code = err.attribute("code").unwrap_or("unknown");
            if code == "noRecordsMatch" {
                break;
            }
            return Err(Failure::io(format!("OAI error {code}: {}", text_of(Some(err)))));
        }
        let list = child(root, "ListRecords").ok_or_else(|| Failure::io("missing ListRecords".to_string()))?;
        for rec in list.children().filter(|c| c.is_element() && c.tag_name().name() == "record") {
            let header = child(rec, "header").ok_or_else(|| Failure::io("record without header".to_string()))?;
            let identifier = text_of(child(header, "identifier"));
            let datestamp = text_of(child(header, "datestamp"));
            if identifier.is_empty() {
                return Err(Failure::io("record without identifier".to_string()));
            }
            summary.records += 1;
            if latest.as_deref().is_none_or(|l| datestamp.as_str() > l) {
                latest = Some(datestamp.clone());
            }
            let path = out.join(record_file_name(&identifier));
            if header.attribute("status") == Some("deleted") {
                if path.exists() {
                    fs::remove_file(&path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
                    summary.deleted += 1;
                }
                continue;
            }
            let Some(meta) = child(rec, "metadata").and_then(|m| m.children().find(|c| c.is_element())) else {
                continue;
            };
            let xml = format!("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n{}\n", &text[meta.range()]);
            match fs::read(&path) {
                Ok(old) if old == xml.as_bytes() => summary.unchanged += 1,
                old => {
                    write_atomic(&path, xml.as_bytes()).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
                    if old.is_ok() {
                        summary.updated += 1;
                    } else {
                        summary.new += 1;
                    }
                }
            }
        }
        let token = text_of(child(list, "resumptionToken"));
        if token.is_empty() {
            break;
        }
        query = format!("verb=ListRecords&resumptionToken={}", enc(&token));
    }
    state.last_datestamp = latest.clone();
    summary.last_datestamp = latest;
    let bytes = serde_json::to_vec_pretty(&state).expect("serializes");
    write_atomic(&state_path, &bytes).map_err(|e| Failure::io(format!("{}: {e}", state_path.display())))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_names_are_flat() {
        assert_eq!(
            record_file_name("oai:depot3d.test:10.34969/CND3D/1.d.2015"),
            "oai_depot3d.test_10.34969_CND3D_1.d.2015.xml"
        );
    }

    #[test]
    fn encoding() {
        assert_eq!(enc("a b/c+d"), "a+b%2Fc%2Bd");
    }
}
