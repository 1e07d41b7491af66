use std::collections::BTreeSet;

use depot3d_core::catalog::{to_dublin_core, AccessPolicy, Deposit, DepositStatus, MediaRole, VirtualObject};
use depot3d_core::formats::FormatClass;
use depot3d_core::package::verify_package;
use depot3d_core::sample;
use depot3d_service::fixtures::{self, alice, bob, curator};
use depot3d_service::repo::ExternalDocument;
use depot3d_service::{Caller, Probe, Repository, SearchQuery, ServiceError};

fn repo() -> (tempfile::TempDir, Repository) {
    let dir = tempfile::tempdir().unwrap();
    let repo = fixtures::open(dir.path()).unwrap();
    (dir, repo)
}

/// Chassenon with its documents removed, plus a second object, so that
/// everything has to be uploaded.
fn bare_chassenon() -> Deposit {
    let mut d = sample::chassenon();
    let mut second = d.objects[0].clone();
    second.local_id = 2;
    second.title = "Caldarium".into();
    d.objects.push(second);
    for o in &mut d.objects {
        o.documents.clear();
        o.final_model = None;
    }
    d
}

fn query(q: &str) -> SearchQuery {
    SearchQuery {
        q: q.into(),
        ..SearchQuery::default()
    }
}

#[test]
fn scripted_end_to_end_lifecycle() {
    let (_dir, repo) = repo();
    let a = alice();
    let id = repo.create_deposit(&a, bare_chassenon()).unwrap();
    assert_eq!(id, 257350);

    let cube = repo
        .upload_document(&a, id, 1, "cube.ply", Some(MediaRole::FinalModel), sample::CUBE_PLY)
        .unwrap();
    assert_eq!(cube.document.format_class, Some(FormatClass::Archivable));
    repo.upload_document(&a, id, 1, "report.pdf", Some(MediaRole::Report), sample::REPORT_PDF)
        .unwrap();
    let cloud = sample::point_cloud_ply(5_000, 9);
    repo.upload_document(&a, id, 2, "caldarium.ply", Some(MediaRole::FinalModel), &cloud)
        .unwrap();
    let bytes = b"remote scan".to_vec();
    let (ext, _) = repo
        .add_external_document(
            &a,
            id,
            2,
            ExternalDocument {
                url: "https://data.example.org/scans/caldarium.e57".into(),
                sha256: depot3d_core::digest::sha256_hex(&bytes),
                byte_size: Some(bytes.len() as u64),
                media_role: Some(MediaRole::SourceScan),
                ..ExternalDocument::default()
            },
        )
        .unwrap();
    assert_eq!(ext.filename, "caldarium.e57");
    assert_eq!(ext.format_class, Some(FormatClass::DepositOnly));

    assert!(repo.validation(&a, id).unwrap().is_error_free());
    assert!(repo.search(&Caller::anonymous(), &query("thermes")).hits.is_empty());

    let out = repo.publish(&a, id).unwrap();
    assert_eq!(out.pid, "10.34969/CND3D/257350.d.2015");
    assert_eq!(out.pid_url, "https://doi.org/10.34969/CND3D/257350.d.2015");
    assert_eq!(out.object_pids.len(), 2);
    assert_eq!(repo.snapshot().registry.len(), 3);

    let view = repo.get_deposit(&Caller::anonymous(), id).unwrap();
    assert_eq!(view.status, DepositStatus::Published);
    assert_eq!(view.pid_url.as_deref(), Some(out.pid_url.as_str()));
    assert!(view.report.is_none());

    let err = repo
        .upload_document(&a, id, 1, "late.txt", None, b"too late")
        .unwrap_err();
    assert_eq!(err.code(), "FROZEN");
    assert_eq!(repo.publish(&a, id).unwrap_err().code(), "ALREADY_PUBLISHED");
    assert_eq!(
        repo.update_draft(&a, id, view.revision, view.deposit.clone()).unwrap_err().code(),
        "FROZEN"
    );

    let hits = repo.search(&Caller::anonymous(), &query("thermes")).hits;
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].title, "Les thermes de Chassenon");
    assert_eq!(hits[0].pid, out.pid);

    let (name, preview) = repo.preview(&Caller::anonymous(), id, 2).unwrap();
    assert_eq!(name, "2.preview.ply");
    let p = depot3d_core::formats::parse_ply(&preview).unwrap();
    assert_eq!(p.element_count("vertex"), 1_000);

    let report = repo
        .check_links(&Caller::anonymous(), id, &|_: &str| Probe::with_body(200, bytes.clone()))
        .unwrap();
    assert_eq!(report, Default::default());
    let report = repo
        .check_links(&Caller::anonymous(), id, &|_: &str| Probe::status(404))
        .unwrap();
    assert!(report.has_warning("LINK_DEAD"));
}

#[test]
fn creation_rules() {
    let (_dir, repo) = repo();
    assert_eq!(repo.create_deposit(&alice(), Deposit::default()).unwrap(), 1);
    assert_eq!(repo.create_deposit(&alice(), Deposit::default()).unwrap(), 2);
    assert_eq!(
        repo.create_deposit(&Caller::anonymous(), Deposit::default()).unwrap_err().code(),
        "UNAUTHORIZED"
    );
    let mut d = Deposit {
        title: "Draft".into(),
        objects: vec![VirtualObject {
            local_id: 1,
            ..VirtualObject::default()
        }],
        ..Deposit::default()
    };
    d.local_id = 2;
    assert_eq!(repo.create_deposit(&alice(), d.clone()).unwrap_err().code(), "DUPLICATE_ID");
    d.local_id = 7;
    assert_eq!(repo.create_deposit(&alice(), d.clone()).unwrap(), 7);
    assert_eq!(repo.get_deposit(&alice(), 7).unwrap().deposit, d);

    let mut with_ghost_blob = sample::chassenon();
    with_ghost_blob.local_id = 0;
    assert_eq!(repo.create_deposit(&alice(), with_ghost_blob).unwrap_err().code(), "MISSING_BLOB");
}

#[test]
fn drafts_are_private_to_owner_and_curators() {
    let (_dir, repo) = repo();
    let id = repo.create_deposit(&alice(), bare_chassenon()).unwrap();
    assert!(repo.get_deposit(&alice(), id).unwrap().editable);
    assert!(repo.get_deposit(&curator(), id).unwrap().editable);
    assert_eq!(repo.get_deposit(&bob(), id).unwrap_err().code(), "NOT_FOUND");
    assert_eq!(repo.get_deposit(&Caller::anonymous(), id).unwrap_err().code(), "NOT_FOUND");
    assert_eq!(
        repo.upload_document(&bob(), id, 1, "x.txt", None, b"x").unwrap_err().code(),
        "NOT_FOUND"
    );
    assert_eq!(
        repo.upload_document(&Caller::anonymous(), id, 1, "x.txt", None, b"x")
            .unwrap_err()
            .code(),
        "UNAUTHORIZED"
    );
    assert_eq!(
        repo.upload_document(&alice(), id, 9, "x.txt", None, b"x").unwrap_err().code(),
        "NOT_FOUND"
    );
    repo.upload_document(&curator(), id, 1, "x.txt", None, b"x").unwrap();
}

#[test]
fn upload_classification_and_content_addressing() {
    let (_dir, repo) = repo();
    let a = alice();
    let id = repo.create_deposit(&a, bare_chassenon()).unwrap();
    let fbx = repo
        .upload_document(&a, id, 1, "scene.fbx", None, b"Kaydara FBX Binary  \x00\x1a\x00rest")
        .unwrap();
    assert_eq!(fbx.document.format_class, Some(FormatClass::DepositOnly));
    assert_eq!(fbx.document.media_role, Some(MediaRole::Other));

    let first = repo.upload_document(&a, id, 1, "a.ply", None, sample::CUBE_PLY).unwrap();
    let second = repo.upload_document(&a, id, 2, "b.ply", None, sample::CUBE_PLY).unwrap();
    assert_eq!(first.document.storage, second.document.storage);
    let scrub = repo.scrub().unwrap();
    assert!(scrub.is_clean());
    assert_eq!(scrub.checked, 2);

    let err = repo
        .add_external_document(
            &a,
            id,
            1,
            ExternalDocument {
                url: "ftp://example.org/scan.e57".into(),
                sha256: "0".repeat(64),
                ..ExternalDocument::default()
            },
        )
        .unwrap_err();
    assert_eq!(err.code(), "BAD_URL");
    let err = repo
        .add_external_document(
            &a,
            id,
            1,
            ExternalDocument {
                url: "https://example.org/scan.e57".into(),
                sha256: "abc".into(),
                ..ExternalDocument::default()
            },
        )
        .unwrap_err();
    assert_eq!(err.code(), "BAD_CHECKSUM");
    assert_eq!(
        repo.upload_document(&a, id, 1, "../etc/passwd", None, b"x").unwrap_err().code(),
        "BAD_REQUEST"
    );
}

#[test]
fn failed_publish_changes_nothing() {
    let (_dir, repo) = repo();
    let mut d = bare_chassenon();
    d.title.clear();
    let id = repo.create_deposit(&alice(), d).unwrap();
    let before = repo.snapshot();
    let err = repo.publish(&alice(), id).unwrap_err();
    assert_eq!(err.code(), "VALIDATION_FAILED");
    let ServiceError::ValidationFailed(report) = err else {
        unreachable!()
    };
    assert!(report.has_error("MISSING"));
    assert_eq!(repo.snapshot(), before);
    assert!(repo.snapshot().registry.is_empty());

    let (d, files) = sample::generated(3);
    let stored = fixtures::store_files(&repo, &d, &files).unwrap();
    let id = repo.create_deposit(&alice(), stored).unwrap();
    assert_eq!(repo.publish(&bob(), id).unwrap_err().code(), "NOT_FOUND");
    assert_eq!(repo.publish(&Caller::anonymous(), id).unwrap_err().code(), "UNAUTHORIZED");
    assert!(repo.snapshot().registry.is_empty());
    repo.publish(&curator(), id).unwrap();
}

#[test]
fn update_draft_detects_conflicts() {
    let (_dir, repo) = repo();
    let id = repo.create_deposit(&alice(), bare_chassenon()).unwrap();
    let v = repo.get_deposit(&alice(), id).unwrap();
    let mut d = v.deposit.clone();
    d.title = "Edited".into();
    let rev = repo.update_draft(&alice(), id, v.revision, d.clone()).unwrap();
    assert_eq!(rev, v.revision + 1);
    assert_eq!(repo.update_draft(&alice(), id, v.revision, d).unwrap_err().code(), "CONFLICT");
    assert_eq!(repo.get_deposit(&alice(), id).unwrap().deposit.title, "Edited");
}

/// Every query's public result set is contained in a depositor's, which is
/// contained in the curator's.
#[test]
fn rights_are_monotone_over_thirty_deposits() {
    let (_dir, repo) = repo();
    let ids = fixtures::seed_generated(&repo, 30).unwrap();
    let public = fixtures::public_ids(&repo, &ids);
    assert!(public.len() < ids.len());

    let mut queries = vec![query(""), query("fixture"), query("object"), query("team 1"), query("zzz")];
    for word in ["amphora", "basilica", "forum", "thermes"] {
        queries.push(query(word));
    }
    queries.push(SearchQuery {
        category: Some("mesh".into()),
        ..SearchQuery::default()
    });
    queries.push(SearchQuery {
        period: Some("http://n2t.net/ark:/99152/p0fr3d0001".into()),
        ..SearchQuery::default()
    });
    let all = |c: &Caller, q: &SearchQuery| -> BTreeSet<u64> {
        let q = SearchQuery {
            per_page: Some(1000),
            ..q.clone()
        };
        repo.search(c, &q).hits.into_iter().map(|h| h.local_id).collect()
    };
    let snap = repo.snapshot();
    for q in &queries {
        let p = all(&Caller::anonymous(), q);
        let a = all(&alice(), q);
        let b = all(&bob(), q);
        let c = all(&curator(), q);
        assert!(p.is_subset(&a) && p.is_subset(&b), "{q:?}");
        assert!(a.is_subset(&c) && b.is_subset(&c), "{q:?}");
        for id in &p {
            assert_eq!(snap.deposits[id].deposit.access_policy, AccessPolicy::Public);
        }
        for id in a.difference(&p) {
            assert_eq!(snap.deposits[id].owner, "alice");
        }
    }
    assert_eq!(all(&Caller::anonymous(), &query("")).into_iter().collect::<Vec<_>>(), public);
    assert_eq!(all(&curator(), &query("")).len(), 30);

    let restricted = ids.iter().find(|id| !public.contains(id)).unwrap();
    assert_eq!(
        repo.get_deposit(&Caller::anonymous(), *restricted).unwrap_err().code(),
        "FORBIDDEN"
    );
}

#[test]
fn search_paging_and_ordering() {
    let (_dir, repo) = repo();
    fixtures::seed_generated(&repo, 12).unwrap();
    let q = SearchQuery {
        q: "fixture".into(),
        per_page: Some(4),
        ..SearchQuery::default()
    };
    let mut seen = Vec::new();
    for page in 1..=3 {
        let r = repo.search(&fixtures::curator(), &SearchQuery { page: Some(page), ..q.clone() });
        assert_eq!(r.total, 12);
        seen.extend(r.hits);
    }
    assert_eq!(seen.len(), 12);
    for w in seen.windows(2) {
        assert!((w[0].score, &w[1].pid) >= (w[1].score, &w[0].pid));
    }
}

#[test]
fn catalog_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let snap = {
        let repo = fixtures::open(dir.path()).unwrap();
        fixtures::seed_generated(&repo, 6).unwrap();
        repo.snapshot()
    };
    let repo = fixtures::open(dir.path()).unwrap();
    assert_eq!(repo.snapshot(), snap);
    assert_eq!(repo.search(&curator(), &query("")).total, 6);
    assert!(!repo.oai_records().is_empty());
}

#[test]
fn versions_and_publication_links() {
    let (_dir, repo) = repo();
    let (d, files) = sample::generated(1);
    let id = fixtures::publish_deposit(&repo, &alice(), &d, &files).unwrap();
    let before = repo.get_deposit(&alice(), id).unwrap();

    repo.link_publication(&alice(), id, "hal-02195914").unwrap();
    let after = repo.get_deposit(&alice(), id).unwrap();
    assert!(after.datestamp > before.datestamp);
    let dc = to_dublin_core(&after.deposit).unwrap();
    assert!(dc.values("dc:relation").contains(&"hal-02195914"));
    assert_eq!(
        repo.link_publication(&bob(), id, "hal-1").unwrap_err().code(),
        "UNAUTHORIZED"
    );

    let v2 = repo.new_version(&alice(), id).unwrap();
    let draft = repo.get_deposit(&alice(), v2).unwrap();
    assert_eq!(draft.status, DepositStatus::Draft);
    assert!(draft.deposit.pid.is_none());
    assert!(draft
        .deposit
        .related_publications
        .contains(before.pid_url.as_ref().unwrap()));
    assert_eq!(repo.new_version(&alice(), v2).unwrap_err().code(), "BAD_REQUEST");
}

#[test]
fn package_download_verifies() {
    let (_dir, repo) = repo();
    let (d, files) = sample::generated(4);
    let id = fixtures::publish_deposit(&repo, &alice(), &d, &files).unwrap();
    let tar_bytes = repo.package_tar(&Caller::anonymous(), id).unwrap();
    let out = tempfile::tempdir().unwrap();
    tar::Archive::new(tar_bytes.as_slice()).unpack(out.path()).unwrap();
    let root = out.path().join(format!("deposit-{id}"));
    assert!(verify_package(&root).unwrap().is_error_free());
    let (loaded, _) = depot3d_core::package::load_package(&root).unwrap();
    assert_eq!(loaded.pid, repo.get_deposit(&alice(), id).unwrap().deposit.pid);
}
