use std::collections::HashSet;

use depot3d_core::formats::{
    classify, decimate, make_preview, parse_ply, parse_ply_with_issues, validate_collada, write_ply, FormatClass,
    PlyEncoding, PlyValue, Severity,
};
use depot3d_core::sample;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(serde::Deserialize)]
struct CubeOracle {
    vertex: Vec<[f64; 3]>,
    face: Vec<Vec<i64>>,
}

/// Values decoded by plyfile from the binary fixture it wrote.
#[test]
fn cube_matches_independent_decoder() {
    let oracle: CubeOracle = serde_json::from_str(include_str!("../fixtures/ply/cube_expected.json")).unwrap();
    for bytes in [sample::CUBE_PLY, sample::CUBE_BINARY_LE_PLY] {
        let m = parse_ply(bytes).unwrap();
        assert_eq!(m.positions().unwrap(), oracle.vertex);
        let faces: Vec<Vec<i64>> = m
            .element("face")
            .unwrap()
            .rows
            .iter()
            .map(|r| r[0].as_list().unwrap().iter().map(|s| s.as_i64()).collect())
            .collect();
        assert_eq!(faces, oracle.face);
    }
}

#[test]
fn cube_round_trips_through_big_endian() {
    let cube = parse_ply(sample::CUBE_PLY).unwrap();
    let bytes = write_ply(&cube, PlyEncoding::BinaryBigEndian);
    assert!(bytes.starts_with(b"ply\nformat binary_big_endian 1.0\n"));
    assert!(parse_ply(&bytes).unwrap().same_content(&cube));
}

fn seeds() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn random_models_round_trip_in_every_encoding(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = sample::random_ply_model(&mut rng);
        prop_assert!(m.check().is_ok());
        for enc in PlyEncoding::ALL {
            let bytes = write_ply(&m, enc);
            let back = parse_ply(&bytes).unwrap();
            prop_assert_eq!(back.encoding, enc);
            prop_assert!(back.same_content(&m), "{:?}", enc);
            prop_assert_eq!(write_ply(&back, enc), bytes);
        }
    }

    #[test]
    fn parser_is_total_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = parse_ply(&bytes);
        let mut prefixed = b"ply\nformat binary_little_endian 1.0\nelement v 4000000000\nproperty double x\nend_header\n".to_vec();
        prefixed.extend_from_slice(&bytes);
        prop_assert!(parse_ply(&prefixed).is_err());
    }

    #[test]
    fn decimation_count_law(n in 0usize..400, target in 1usize..500, seed in any::<u64>()) {
        let mut m = parse_ply(&sample::point_cloud_ply(n, seed % 97)).unwrap();
        m.elements.push(parse_ply(sample::CUBE_PLY).unwrap().elements[1].clone());
        let d = decimate(&m, target, seed).unwrap();
        prop_assert_eq!(d.elements.len(), 1);
        let out = &d.element("vertex").unwrap().rows;
        prop_assert_eq!(out.len(), target.min(n));
        let input: HashSet<&Vec<PlyValue>> = m.element("vertex").unwrap().rows.iter().collect();
        prop_assert!(out.iter().all(|r| input.contains(r)));
    }
}

#[test]
fn fuzz_corpus_yields_structured_results_only() {
    let corpus = sample::fuzz_corpus(1000, 0x5eed);
    assert_eq!(corpus.len(), 1000);
    let mut errors = 0;
    for bytes in &corpus {
        match parse_ply_with_issues(bytes) {
            Ok((m, _)) => assert!(m.check().is_ok()),
            Err(e) => {
                errors += 1;
                assert!(e.code().starts_with("PLY_"));
            }
        }
        for name in ["x.ply", "x.dae", "x.txt", "x.pdf", "x.fbx", "x"] {
            let v = classify(name, bytes);
            let has_error = v.issues.iter().any(|i| i.severity == Severity::Error);
            assert!(!(v.format_class == FormatClass::Archivable && has_error));
        }
        let v = validate_collada(bytes);
        assert!(!(v.format_class == FormatClass::Archivable && v.has_error()));
    }
    assert!(errors > 500, "corpus is mostly hostile, got {errors} errors");
}

#[test]
fn ten_thousand_point_preview() {
    let cloud = parse_ply(&sample::point_cloud_ply(10_000, 3)).unwrap();
    let (name, bytes) = make_preview(&cloud, 42, 1_000, 7).unwrap();
    assert_eq!(name, "42.preview.ply");
    let preview = parse_ply(&bytes).unwrap();
    assert_eq!(preview.encoding, PlyEncoding::BinaryLittleEndian);
    let input: HashSet<&Vec<PlyValue>> = cloud.element("vertex").unwrap().rows.iter().collect();
    let rows = &preview.element("vertex").unwrap().rows;
    assert_eq!(rows.len(), 1_000);
    assert!(rows.iter().all(|r| input.contains(r)));
    assert_eq!(make_preview(&cloud, 42, 1_000, 7).unwrap().1, bytes);
}
