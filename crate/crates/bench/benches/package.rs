use chrono::{TimeZone, Utc};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use depot3d_core::package::{build_package, verify_package};
use depot3d_core::sample;

fn package(c: &mut Criterion) {
    let created = Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap();
    let (mut d, mut files) = sample::generated(2);
    // one large payload so hashing dominates
    let big = sample::point_cloud_ply(200_000, 9);
    let doc = &mut d.objects[0].documents[0];
    doc.checksum = depot3d_core::digest::sha256_hex(&big);
    doc.byte_size = Some(big.len() as u64);
    files.insert(doc.filename.clone(), big);

    let mut g = c.benchmark_group("package");
    g.sample_size(20);
    g.bench_function("build", |b| {
        b.iter_batched(
            || tempfile::tempdir().unwrap(),
            |tmp| build_package(&d, &files, &tmp.path().join("pkg"), created).unwrap(),
            BatchSize::PerIteration,
        )
    });
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("pkg");
    build_package(&d, &files, &root, created).unwrap();
    g.bench_function("verify", |b| b.iter(|| assert!(verify_package(&root).unwrap().is_error_free())));
    g.finish();
}

criterion_group!(benches, package);
criterion_main!(benches);
