use std::collections::BTreeSet;

use depot3d_core::catalog::{
    schema_descriptor, to_dublin_core, validate_deposit, Agent, DcRecord, Deposit, DocumentRecord, Level,
    VirtualObject,
};
use depot3d_core::identifiers::{PersistentIdentifier, PidKind};
use depot3d_core::sample;
use serde_json::Value;

fn missing_paths(d: &Deposit) -> BTreeSet<String> {
    validate_deposit(d)
        .errors_with_code("MISSING")
        .map(|i| i.path.clone())
        .collect()
}

#[test]
fn empty_draft_misses_exactly_the_required_fields() {
    let schema = schema_descriptor();
    let d = Deposit {
        objects: vec![VirtualObject {
            documents: vec![DocumentRecord::default()],
            ..VirtualObject::default()
        }],
        ..Deposit::default()
    };
    let mut expected = BTreeSet::new();
    for k in schema.required_keys(Level::Deposit) {
        expected.insert(k.to_string());
    }
    for k in schema.required_keys(Level::Object) {
        expected.insert(format!("objects[0].{k}"));
    }
    for k in schema.required_keys(Level::Document) {
        expected.insert(format!("objects[0].documents[0].{k}"));
    }
    assert_eq!(missing_paths(&d), expected);
}

#[test]
fn deleting_each_required_field_yields_one_missing_error() {
    let schema = schema_descriptor();
    let base: Value = serde_json::from_str(sample::CHASSENON_DRAFT_JSON).unwrap();
    assert!(missing_paths(&sample::chassenon()).is_empty());

    let cases = [
        (Level::Deposit, "", vec![]),
        (Level::Object, "objects[0].", vec!["objects", "0"]),
        (Level::Document, "objects[0].documents[1].", vec!["objects", "0", "documents", "1"]),
    ];
    let mut swept = 0;
    for (level, prefix, pointer) in cases {
        for key in schema.required_keys(level) {
            let mut v = base.clone();
            let mut slot = &mut v;
            for step in &pointer {
                slot = match step.parse::<usize>() {
                    Ok(i) => &mut slot[i],
                    Err(_) => &mut slot[*step],
                };
            }
            assert!(slot.as_object_mut().unwrap().remove(key).is_some(), "{prefix}{key} absent from fixture");
            let d: Deposit = serde_json::from_value(v).unwrap();
            let expected = BTreeSet::from([format!("{prefix}{key}")]);
            assert_eq!(missing_paths(&d), expected, "deleting {prefix}{key}");
            swept += 1;
        }
    }
    assert_eq!(
        swept,
        [Level::Deposit, Level::Object, Level::Document]
            .iter()
            .map(|l| schema.required_keys(*l).len())
            .sum::<usize>()
    );
}

#[test]
fn chassenon_crosswalk_matches_hand_written_record() {
    let expected: DcRecord = serde_json::from_str(sample::CHASSENON_DC_JSON).unwrap();
    let actual = to_dublin_core(&sample::chassenon_published()).unwrap();
    assert_eq!(actual, expected);
}

#[test]
fn published_doi_becomes_the_identifier() {
    let d = sample::chassenon_published();
    let dc = to_dublin_core(&d).unwrap();
    assert_eq!(dc.values("dc:identifier"), ["https://doi.org/10.34969/CND3D/257350.d.2015"]);
}

#[test]
fn creator_order_is_preserved() {
    let mut d = sample::chassenon_published();
    d.deposit_creator = Some(Agent::named("A"));
    d.objects[0].creators = vec![Agent::named("B"), Agent::named("A")];
    let dc = to_dublin_core(&d).unwrap();
    assert_eq!(dc.values("dc:creator"), ["A", "B"]);
}

#[test]
fn drafts_and_invalid_deposits_are_not_exported() {
    assert_eq!(to_dublin_core(&sample::chassenon()).unwrap_err().code(), "UNPUBLISHED");
    let mut d = sample::chassenon_published();
    d.title.clear();
    assert_eq!(to_dublin_core(&d).unwrap_err().code(), "VALIDATION_FAILED");
}

#[test]
fn every_published_fixture_has_title_creator_and_one_identifier() {
    for i in 0..40 {
        let (mut d, _) = sample::generated(i);
        d.pid = Some(PersistentIdentifier::new("10.34969", "CND3D", PidKind::Deposit, d.local_id, 2021).unwrap());
        for o in &mut d.objects {
            o.pid = Some(PersistentIdentifier::new("10.34969", "CND3D", PidKind::Object, 100 * i + o.local_id, 2021).unwrap());
        }
        d.status = depot3d_core::catalog::DepositStatus::Published;
        let dc = to_dublin_core(&d).unwrap();
        assert!(dc.count("dc:title") >= 1);
        assert!(dc.count("dc:creator") >= 1);
        assert_eq!(dc.count("dc:identifier"), 1);
        assert!(dc.entries.iter().all(|(_, v)| !v.trim().is_empty()));
        let xml = dc.to_oai_dc_xml();
        roxmltree::Document::parse(&xml).unwrap();
    }
}

#[test]
fn linked_publication_is_exported_as_relation() {
    let d = depot3d_core::catalog::link_publication(sample::chassenon_published(), "hal-02195914").unwrap();
    let dc = to_dublin_core(&d).unwrap();
    assert!(dc.values("dc:relation").contains(&"hal-02195914"));
}
