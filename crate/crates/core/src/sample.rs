//! Fixture deposits shared by tests, benchmarks and the demo server.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{
    AccessPolicy, Agent, Deposit, DocumentRecord, MediaRole, NatureOfDeposit, Relation, RelationKind, StorageRef,
    VirtualObject, VocabularyRef, YearRange,
};
use crate::digest::sha256_hex;
use crate::formats::{
    write_ply, FormatClass, PlyElement, PlyEncoding, PlyModel, PlyProperty, PlyValue, PropertyType, Scalar, ScalarType,
};
use crate::vocab::Scheme;

pub const CHASSENON_DRAFT_JSON: &str = include_str!("../fixtures/deposits/chassenon.json");
pub const CHASSENON_PUBLISHED_JSON: &str = include_str!("../fixtures/deposits/chassenon_published.json");
pub const CHASSENON_DC_JSON: &str = include_str!("../fixtures/deposits/chassenon_dc.json");
pub const CUBE_PLY: &[u8] = include_bytes!("../fixtures/ply/cube_ascii.ply");
pub const CUBE_BINARY_LE_PLY: &[u8] = include_bytes!("../fixtures/ply/cube_binary_le.ply");
pub const REPORT_PDF: &[u8] = include_bytes!("../fixtures/docs/report.pdf");
pub const MINIMAL_DAE: &[u8] = include_bytes!("../fixtures/dae/minimal.dae");

pub type FileMap = BTreeMap<String, Vec<u8>>;

/// "Les thermes de Chassenon" as a complete draft: one object with a
/// final-model `cube.ply` and a `report.pdf`.
pub fn chassenon() -> Deposit {
    Deposit::from_json(CHASSENON_DRAFT_JSON).expect("fixture parses")
}

/// The same deposit after publication.
pub fn chassenon_published() -> Deposit {
    Deposit::from_json(CHASSENON_PUBLISHED_JSON).expect("fixture parses")
}

pub fn chassenon_files() -> FileMap {
    FileMap::from([
        ("cube.ply".to_string(), CUBE_PLY.to_vec()),
        ("report.pdf".to_string(), REPORT_PDF.to_vec()),
    ])
}

/// A document record describing `bytes`, stored internally under `key`.
pub fn internal_document(filename: &str, role: MediaRole, bytes: &[u8], key: &str) -> DocumentRecord {
    DocumentRecord {
        filename: filename.to_string(),
        media_role: Some(role),
        byte_size: Some(bytes.len() as u64),
        checksum: sha256_hex(bytes),
        format_class: Some(FormatClass::Archivable),
        storage: Some(StorageRef::Internal { key: key.to_string() }),
        relations: Vec::new(),
    }
}

/// Small binary point cloud whose coordinates depend on `salt`.
pub fn point_cloud_ply(points: usize, salt: u64) -> Vec<u8> {
    let mut m = PlyModel::new(PlyEncoding::BinaryLittleEndian);
    m.comments.push(format!("fixture cloud {salt}"));
    let mut v = PlyElement::new(
        "vertex",
        ["x", "y", "z"]
            .map(|p| PlyProperty::scalar(p, ScalarType::Float32))
            .to_vec(),
    );
    for i in 0..points {
        let t = (i as f32) * 0.37 + salt as f32;
        v.rows.push(vec![
            PlyValue::Scalar(Scalar::F32(t.sin())),
            PlyValue::Scalar(Scalar::F32(t.cos())),
            PlyValue::Scalar(Scalar::F32(i as f32 / points.max(1) as f32)),
        ]);
    }
    m.elements.push(v);
    write_ply(&m, PlyEncoding::BinaryLittleEndian)
}

/// Deterministic, valid draft number `i`, with the files its internal
/// documents refer to. Filenames are unique across the whole deposit.
///
/// Object count cycles through 1..=3; every fourth deposit carries an
/// external reference and every fifth is restricted.
pub fn generated(i: u64) -> (Deposit, FileMap) {
    let mut files = FileMap::new();
    let year = 2015 + (i % 7) as i32;
    let n_objects = 1 + (i % 3);
    let mut objects = Vec::new();
    for o in 1..=n_objects {
        let model_name = format!("d{i}_o{o}_model.ply");
        let model = point_cloud_ply(16 + (i as usize % 5) * 8, i * 10 + o);
        let mut docs = vec![internal_document(
            &model_name,
            MediaRole::FinalModel,
            &model,
            &format!("files/{model_name}"),
        )];
        files.insert(model_name.clone(), model);
        if (i + o).is_multiple_of(2) {
            let note_name = format!("d{i}_o{o}_notes.txt");
            let note = format!("Acquisition notes for deposit {i}, object {o}.\n").into_bytes();
            let mut note_doc = internal_document(&note_name, MediaRole::Report, &note, &format!("files/{note_name}"));
            note_doc.relations.push(Relation {
                relation_kind: RelationKind::Documents,
                target: model_name.clone(),
            });
            docs.push(note_doc);
            files.insert(note_name, note);
        }
        if i.is_multiple_of(4) && o == 1 {
            docs.push(DocumentRecord {
                filename: format!("d{i}_survey.e57"),
                media_role: Some(MediaRole::SourceScan),
                byte_size: Some(1_000_000 + i),
                checksum: sha256_hex(format!("external {i}").as_bytes()),
                format_class: Some(FormatClass::DepositOnly),
                storage: Some(StorageRef::External {
                    url: format!("https://data.example.org/scans/{i}.e57"),
                }),
                relations: Vec::new(),
            });
        }
        objects.push(VirtualObject {
            local_id: o,
            pid: None,
            title: format!("Object {o} of fixture deposit {i}"),
            creators: vec![Agent::named(format!("Team {}", i % 4))],
            contributors: vec![],
            creation_3d_date: NaiveDate::from_ymd_opt(year, 1 + (o % 12) as u32, 1),
            archaeological_date: Some(YearRange::new(-50, 300)),
            version: "1".to_string(),
            category: if o % 2 == 0 { "mesh" } else { "point-cloud" }.to_string(),
            documents: docs,
            final_model: Some(model_name),
        });
    }

    let deposit = Deposit {
        local_id: 1000 + i,
        pid: None,
        title: format!("Fixture deposit {i} {}", WORDS[i as usize % WORDS.len()]),
        deposit_creator: Some(Agent::named(format!("Team {}", i % 4))),
        silent_partners: vec![],
        nature_of_resource: if n_objects > 1 { "collection" } else { "3d-model" }.to_string(),
        nature_of_deposit: Some(match i % 3 {
            0 => NatureOfDeposit::Digitisation,
            1 => NatureOfDeposit::Restitution,
            _ => NatureOfDeposit::Mixed,
        }),
        scientific_objectives: format!("Documenting site {i} for study and archiving."),
        deposit_date: NaiveDate::from_ymd_opt(year, 6, 1),
        project_date_range: Some(YearRange::new(year - 2, year)),
        archaeological_date_range: Some(YearRange::new(-50, 300)),
        period_terms: vec![VocabularyRef {
            scheme: Scheme::PeriodO,
            uri: format!("http://n2t.net/ark:/99152/p0fr3d{:04}", 1 + i % 50),
            label: String::new(),
        }],
        place_terms: vec![VocabularyRef {
            scheme: Scheme::Geonames,
            uri: format!("https://sws.geonames.org/{}/", 9_000_001 + i % 20),
            label: String::new(),
        }],
        subject_terms: vec![],
        citation: format!("Fixture deposit {i}, {year}."),
        related_publications: vec![],
        objects,
        access_policy: if i.is_multiple_of(5) {
            AccessPolicy::Restricted
        } else {
            AccessPolicy::Public
        },
        status: Default::default(),
    };
    (deposit, files)
}

const WORDS: [&str; 8] = ["thermes", "villa", "temple", "amphitheatre", "forum", "necropole", "aqueduc", "oppidum"];

fn random_scalar(rng: &mut impl Rng, ty: ScalarType) -> Scalar {
    match ty {
        ScalarType::Int8 => Scalar::I8(rng.random()),
        ScalarType::Uint8 => Scalar::U8(rng.random()),
        ScalarType::Int16 => Scalar::I16(rng.random()),
        ScalarType::Uint16 => Scalar::U16(rng.random()),
        ScalarType::Int32 => Scalar::I32(rng.random()),
        ScalarType::Uint32 => Scalar::U32(rng.random()),
        // any bit pattern except NaN payloads, which ASCII cannot carry
        ScalarType::Float32 => {
            let f = f32::from_bits(rng.random());
            Scalar::F32(if f.is_nan() { f32::NAN } else { f })
        }
        ScalarType::Float64 => {
            let f = f64::from_bits(rng.random());
            Scalar::F64(if f.is_nan() { f64::NAN } else { f })
        }
    }
}

/// A random model satisfying [`PlyModel::check`]: up to 3 elements of up
/// to 4 properties and 12 rows, every scalar type and list layout.
pub fn random_ply_model(rng: &mut impl Rng) -> PlyModel {
    let mut m = PlyModel::new(PlyEncoding::ALL[rng.random_range(0..3)]);
    for c in 0..rng.random_range(0..3) {
        m.comments.push(format!("comment {c} {}", rng.random::<u16>()));
    }
    if rng.random_bool(0.3) {
        m.obj_info.push("scanner test".to_string());
    }
    let ints = [
        ScalarType::Int8,
        ScalarType::Uint8,
        ScalarType::Int16,
        ScalarType::Uint16,
        ScalarType::Int32,
        ScalarType::Uint32,
    ];
    for e in 0..rng.random_range(0..4) {
        let mut props = Vec::new();
        for p in 0..rng.random_range(1..5) {
            let item = ScalarType::ALL[rng.random_range(0..8)];
            props.push(if rng.random_bool(0.25) {
                PlyProperty::list(format!("p{p}"), ints[rng.random_range(0..6)], item)
            } else {
                PlyProperty::scalar(format!("p{p}"), item)
            });
        }
        let mut el = PlyElement::new(format!("e{e}"), props);
        for _ in 0..rng.random_range(0..13) {
            let row = el
                .properties
                .iter()
                .map(|p| match p.ty {
                    PropertyType::Scalar(t) => PlyValue::Scalar(random_scalar(rng, t)),
                    PropertyType::List { item, .. } => {
                        PlyValue::List((0..rng.random_range(0..6)).map(|_| random_scalar(rng, item)).collect())
                    }
                })
                .collect();
            el.rows.push(row);
        }
        m.elements.push(el);
    }
    m
}

/// Deterministic hostile inputs for the PLY parser and the classifier:
/// random bytes, mutated and truncated valid files, and headers with
/// absurd declared counts.
pub fn fuzz_corpus(n: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut valid: Vec<Vec<u8>> = vec![CUBE_PLY.to_vec(), CUBE_BINARY_LE_PLY.to_vec(), MINIMAL_DAE.to_vec()];
    for _ in 0..8 {
        let m = random_ply_model(&mut rng);
        valid.push(write_ply(&m, m.encoding));
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let sample = match out.len() % 5 {
            0 => {
                let len = rng.random_range(0..300);
                let mut b: Vec<u8> = (0..len).map(|_| rng.random()).collect();
                if rng.random_bool(0.5) {
                    b.splice(0..0, b"ply\n".iter().copied());
                }
                b
            }
            1 => {
                let mut b = valid[rng.random_range(0..valid.len())].clone();
                for _ in 0..rng.random_range(1..5) {
                    if !b.is_empty() {
                        let at = rng.random_range(0..b.len());
                        b[at] = rng.random();
                    }
                }
                b
            }
            2 => {
                let b = &valid[rng.random_range(0..valid.len())];
                b[..rng.random_range(0..=b.len())].to_vec()
            }
            3 => {
                let count: u64 = match rng.random_range(0..3) {
                    0 => u64::MAX,
                    1 => rng.random(),
                    _ => rng.random_range(0..100),
                };
                let enc = PlyEncoding::ALL[rng.random_range(0..3)];
                let mut b = format!(
                    "ply\nformat {enc} 1.0\nelement vertex {count}\nproperty list uint32 float64 v\nproperty float x\nend_header\n"
                )
                .into_bytes();
                b.extend((0..rng.random_range(0..64)).map(|_| rng.random::<u8>()));
                b
            }
            _ => {
                let words = [
                    "ply", "format", "ascii", "binary_big_endian", "1.0", "element", "property", "list", "uchar",
                    "float", "int", "vertex", "face", "end_header", "comment", "\n", "\n", "-1", "99999999999",
                ];
                let mut s = String::from("ply\n");
                for _ in 0..rng.random_range(0..40) {
                    s.push_str(words[rng.random_range(0..words.len())]);
                    s.push(' ');
                }
                s.into_bytes()
            }
        };
        out.push(sample);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::validate_deposit;

    #[test]
    fn fixtures_validate() {
        let r = validate_deposit(&chassenon());
        assert!(r.is_error_free(), "{r:?}");
        let r = validate_deposit(&chassenon_published());
        assert!(r.is_error_free(), "{r:?}");
        for i in 0..30 {
            let (d, files) = generated(i);
            let r = validate_deposit(&d);
            assert!(r.is_error_free(), "{i}: {r:?}");
            for (_, doc) in d.documents().filter(|(_, doc)| !doc.is_external()) {
                assert_eq!(sha256_hex(&files[&doc.filename]), doc.checksum);
            }
        }
    }
}
