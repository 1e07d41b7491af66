use std::collections::BTreeSet;
use std::sync::Arc;

use depot3d_core::sample;
use depot3d_service::fixtures::{self, ALICE_TOKEN, BOB_TOKEN};
use depot3d_service::{AppState, BackgroundServer, Repository};
use serde_json::{json, Value};

struct Client {
    agent: ureq::Agent,
    base: String,
}

impl Client {
    fn new(server: &BackgroundServer) -> Self {
        Client {
            agent: ureq::Agent::config_builder().http_status_as_error(false).build().into(),
            base: server.url(),
        }
    }

    fn get(&self, path: &str, token: Option<&str>) -> (u16, String) {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.call().unwrap();
        (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
    }

    fn get_json(&self, path: &str, token: Option<&str>) -> (u16, Value) {
        let (s, body) = self.get(path, token);
        (s, serde_json::from_str(&body).unwrap())
    }

    fn post_json(&self, path: &str, token: &str, body: &Value) -> (u16, Value) {
        let mut resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("Authorization", format!("Bearer {token}"))
            .send_json(body)
            .unwrap();
        (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
    }

    fn post_bytes(&self, path: &str, token: &str, body: &[u8]) -> (u16, Value) {
        let mut resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("Authorization", format!("Bearer {token}"))
            .header("Content-Type", "application/octet-stream")
            .send(body)
            .unwrap();
        (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
    }
}

fn start(repo: Repository) -> BackgroundServer {
    BackgroundServer::start(AppState::new(Arc::new(repo)), "127.0.0.1:0".parse().unwrap()).unwrap()
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[test]
fn deposit_lifecycle_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(fixtures::open(dir.path()).unwrap());
    let c = Client::new(&server);

    let (s, schema) = c.get_json("/api/schema", None);
    assert_eq!(s, 200);
    assert_eq!(schema["levels"].as_array().unwrap().len(), 3);

    let (s, v) = c.get_json("/api/vocab/PeriodO?q=gallo&limit=3", None);
    assert_eq!(s, 200);
    assert!(!v.as_array().unwrap().is_empty());

    let mut draft = sample::chassenon();
    for o in &mut draft.objects {
        o.documents.clear();
        o.final_model = None;
    }
    let (s, v) = c.post_json("/api/deposits", "nope-nope-nope", &json!(draft));
    assert_eq!((s, error_code(&v)), (401, "UNAUTHORIZED"));
    let (s, v) = c.post_json("/api/deposits", ALICE_TOKEN, &json!(draft));
    assert_eq!(s, 201);
    let id = v["local_id"].as_u64().unwrap();

    let (s, v) = c.post_bytes(
        &format!("/api/deposits/{id}/objects/1/documents?filename=cube.ply&role=final-model"),
        ALICE_TOKEN,
        sample::CUBE_PLY,
    );
    assert_eq!(s, 201, "{v}");
    assert_eq!(v["document"]["format_class"], "Archivable");
    assert_eq!(v["verdict"]["detected_format"], "ply");
    let (s, _) = c.post_bytes(
        &format!("/api/deposits/{id}/objects/1/documents?filename=report.pdf&role=report"),
        ALICE_TOKEN,
        sample::REPORT_PDF,
    );
    assert_eq!(s, 201);
    let (s, v) = c.post_json(
        &format!("/api/deposits/{id}/objects/1/documents"),
        ALICE_TOKEN,
        &json!({"url": "ftp://x.org/a.e57", "sha256": "0".repeat(64)}),
    );
    assert_eq!((s, error_code(&v)), (400, "BAD_URL"));

    let (s, v) = c.get_json(&format!("/api/deposits/{id}"), Some(ALICE_TOKEN));
    assert_eq!(s, 200);
    assert_eq!(v["status"], "draft");
    assert_eq!(v["report"]["errors"].as_array().unwrap().len(), 0);
    let (s, v) = c.get_json(&format!("/api/deposits/{id}"), Some(BOB_TOKEN));
    assert_eq!((s, error_code(&v)), (404, "NOT_FOUND"));

    let (s, v) = c.post_json(&format!("/api/deposits/{id}/publish"), BOB_TOKEN, &json!({}));
    assert_eq!(s, 404, "{v}");
    let (s, v) = c.post_json(&format!("/api/deposits/{id}/publish"), ALICE_TOKEN, &json!({}));
    assert_eq!(s, 200, "{v}");
    assert_eq!(v["pid"], "10.34969/CND3D/257350.d.2015");
    let (s, v) = c.post_json(&format!("/api/deposits/{id}/publish"), ALICE_TOKEN, &json!({}));
    assert_eq!((s, error_code(&v)), (409, "ALREADY_PUBLISHED"));

    let (s, v) = c.get_json(&format!("/api/deposits/{id}"), None);
    assert_eq!(s, 200);
    assert_eq!(v["pid_url"], "https://doi.org/10.34969/CND3D/257350.d.2015");

    let (s, v) = c.get_json("/api/search?q=thermes", None);
    assert_eq!(s, 200);
    assert_eq!(v["total"], 1);
    assert_eq!(v["hits"][0]["title"], "Les thermes de Chassenon");

    let (s, body) = c.get(&format!("/api/deposits/{id}/objects/1/documents/cube.ply"), None);
    assert_eq!(s, 200);
    assert_eq!(body.as_bytes(), sample::CUBE_PLY);

    let mut resp = c
        .agent
        .get(format!("{}/api/deposits/{id}/package", c.base))
        .call()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let tar_bytes = resp.body_mut().read_to_vec().unwrap();
    let out = tempfile::tempdir().unwrap();
    tar::Archive::new(tar_bytes.as_slice()).unpack(out.path()).unwrap();
    let report = depot3d_core::package::verify_package(&out.path().join(format!("deposit-{id}"))).unwrap();
    assert!(report.is_error_free());
}

#[test]
fn malformed_requests_get_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(fixtures::open(dir.path()).unwrap());
    let c = Client::new(&server);
    let mut resp = c
        .agent
        .post(format!("{}/api/deposits", c.base))
        .header("Authorization", format!("Bearer {ALICE_TOKEN}"))
        .send("{ not json")
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let v: Value = resp.body_mut().read_json().unwrap();
    assert_eq!(error_code(&v), "BAD_REQUEST");
    let (s, v) = c.get_json("/api/deposits/99", Some(ALICE_TOKEN));
    assert_eq!((s, error_code(&v)), (404, "NOT_FOUND"));
    let (s, v) = c.get_json("/api/vocab/Nope?q=x", None);
    assert_eq!((s, error_code(&v)), (404, "NOT_FOUND"));
}

fn parse(xml: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(xml).unwrap_or_else(|e| panic!("not well-formed: {e}\n{xml}"))
}

fn oai_error(xml: &str) -> Option<String> {
    parse(xml)
        .descendants()
        .find(|n| n.has_tag_name("error"))
        .and_then(|n| n.attribute("code").map(str::to_string))
}

/// Follows resumption tokens from `first`; returns identifiers page by page
/// and the number of resumptionToken elements seen.
fn harvest(c: &Client, first: &str) -> (Vec<Vec<String>>, usize) {
    let verb = first.split('&').next().unwrap();
    let mut pages = Vec::new();
    let mut tokens = 0;
    let mut query = first.to_string();
    loop {
        let (s, xml) = c.get(&format!("/oai?{query}"), None);
        assert_eq!(s, 200);
        let doc = parse(&xml);
        let ids: Vec<String> = doc
            .descendants()
            .filter(|n| n.has_tag_name("header"))
            .map(|h| h.children().find(|n| n.has_tag_name("identifier")).unwrap().text().unwrap().to_string())
            .collect();
        pages.push(ids);
        let token = doc.descendants().find(|n| n.has_tag_name("resumptionToken"));
        match token {
            Some(t) => {
                tokens += 1;
                match t.text() {
                    Some(text) if !text.is_empty() => query = format!("{verb}&resumptionToken={text}"),
                    _ => break,
                }
            }
            None => break,
        }
    }
    (pages, tokens)
}

#[test]
fn oai_pmh_conformance() {
    let dir = tempfile::tempdir().unwrap();
    let repo = fixtures::open(dir.path()).unwrap();
    let mut n = 0;
    let mut ids = Vec::new();
    while fixtures::public_ids(&repo, &ids).len() < 25 {
        let (d, files) = sample::generated(n);
        let owner = if n % 2 == 0 { fixtures::alice() } else { fixtures::bob() };
        ids.push(fixtures::publish_deposit(&repo, &owner, &d, &files).unwrap());
        n += 1;
    }
    // one draft that must never show up
    let (draft, files) = sample::generated(99);
    let draft = fixtures::store_files(&repo, &draft, &files).unwrap();
    repo.create_deposit(&fixtures::alice(), draft).unwrap();
    let last_datestamp = repo.oai_records().last().unwrap().datestamp;
    let expected: BTreeSet<String> = fixtures::public_ids(&repo, &ids)
        .iter()
        .map(|id| {
            let pid = repo.snapshot().deposits[id].deposit.pid.clone().unwrap();
            format!("oai:depot3d.test:{pid}")
        })
        .collect();
    assert_eq!(expected.len(), 25);
    assert!(ids.len() > 25);

    let server = start(repo);
    let c = Client::new(&server);

    for q in [
        "verb=Identify",
        "verb=ListMetadataFormats",
        "verb=ListIdentifiers&metadataPrefix=oai_dc",
        "verb=ListRecords&metadataPrefix=oai_dc",
    ] {
        let (s, xml) = c.get(&format!("/oai?{q}"), None);
        assert_eq!(s, 200);
        assert_eq!(oai_error(&xml), None, "{q}");
    }
    let any = expected.iter().next().unwrap();
    let (_, xml) = c.get(&format!("/oai?verb=GetRecord&metadataPrefix=oai_dc&identifier={any}"), None);
    assert_eq!(oai_error(&xml), None);
    assert!(parse(&xml).descendants().any(|n| n.tag_name().name() == "title"));

    let (pages, tokens) = harvest(&c, "verb=ListRecords&metadataPrefix=oai_dc");
    assert_eq!(pages.iter().map(Vec::len).collect::<Vec<_>>(), [10, 10, 5]);
    assert_eq!(tokens, 3);
    let all: Vec<String> = pages.concat();
    let unique: BTreeSet<String> = all.iter().cloned().collect();
    assert_eq!(unique.len(), all.len(), "duplicates in harvest");
    assert_eq!(unique, expected);

    let (_, xml) = c.get("/oai?verb=GetRecord&metadataPrefix=oai_dc&identifier=oai:depot3d.test:nope", None);
    assert_eq!(oai_error(&xml).as_deref(), Some("idDoesNotExist"));
    let (_, xml) = c.get(&format!("/oai?verb=GetRecord&metadataPrefix=marc21&identifier={any}"), None);
    assert_eq!(oai_error(&xml).as_deref(), Some("cannotDisseminateFormat"));
    let (_, xml) = c.get("/oai?verb=Harvest", None);
    assert_eq!(oai_error(&xml).as_deref(), Some("badVerb"));
    let (_, xml) = c.get("/oai?verb=ListRecords&metadataPrefix=oai_dc&until=1990-01-01", None);
    assert_eq!(oai_error(&xml).as_deref(), Some("noRecordsMatch"));

    let (pages, _) = harvest(&c, "verb=ListIdentifiers&metadataPrefix=oai_dc");
    assert_eq!(pages.concat().into_iter().collect::<BTreeSet<_>>(), expected);

    let from = depot3d_service::oai::format_datestamp(last_datestamp);
    let (pages, tokens) = harvest(&c, &format!("verb=ListRecords&metadataPrefix=oai_dc&from={from}"));
    assert_eq!((pages.concat().len(), tokens), (1, 0));
}
