//! Artifact files round-trip byte for byte and reject corruption.

use std::path::Path;

use xaibench::benchmark::{explain_samples, select_samples, BenchmarkConfig};
use xaibench::datagen::{generate, Dataset, DatasetConfig, Roi};
use xaibench::explain::{ExplanationBatch, Method, XaiConfig};
use xaibench::models::{train, Arch, ModelSpec, TrainConfig, TrainedModel};

fn small() -> DatasetConfig {
    DatasetConfig {
        grid: (8, 6),
        members: 3,
        years: 40,
        classes: 4,
        roi: Roi {
            row_start: 1,
            row_end: 4,
            col_start: 2,
            col_end: 5,
        },
        ..DatasetConfig::default()
    }
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn write_read_write_is_identical_for_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ds = generate(&small()).unwrap();
    ds.write(&d.join("a.bin"), "h").unwrap();
    let (back, manifest) = Dataset::read(&d.join("a.bin")).unwrap();
    assert_eq!(back, ds);
    assert_eq!(manifest.config_hash, "h");
    back.write(&d.join("b.bin"), "h").unwrap();
    assert_eq!(bytes(&d.join("a.bin")), bytes(&d.join("b.bin")));

    for arch in [Arch::Mlp, Arch::Cnn] {
        let spec = ModelSpec {
            hidden: vec![6],
            conv_channels: 2,
            kernel: 3,
            dense_width: 5,
            ..ModelSpec::for_dataset(arch, &ds)
        };
        let model = train(&spec, &ds, &TrainConfig { epochs: 2, ..TrainConfig::default() }).unwrap();
        let (p, q) = (d.join(format!("{}1.bin", arch.name())), d.join(format!("{}2.bin", arch.name())));
        model.write(&p, "h").unwrap();
        let (back, _) = TrainedModel::read(&p).unwrap();
        assert_eq!(back.network, model.network);
        back.write(&q, "h").unwrap();
        assert_eq!(bytes(&p), bytes(&q));
        assert_eq!(bytes(&p.with_extension("json")), bytes(&q.with_extension("json")));

        let bench = BenchmarkConfig { samples: 2, tolerance_years: 40, ..BenchmarkConfig::default() };
        let ids = select_samples(&model, &ds, &bench, 1).unwrap();
        let xai = XaiConfig::default();
        let batch = explain_samples(&model, &ds, &[Method::InputGradient], &xai, &ids, 1).unwrap().remove(0);
        let (p, q) = (d.join("e1.bin"), d.join("e2.bin"));
        batch.write(&p, &xai, 1, "h").unwrap();
        let (back, sidecar) = ExplanationBatch::read(&p).unwrap();
        assert_eq!(back, batch);
        assert_eq!(sidecar.seed, 1);
        back.write(&q, &xai, 1, "h").unwrap();
        assert_eq!(bytes(&p), bytes(&q));
    }
}

#[test]
fn corrupt_files_are_rejected_as_artifact_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    generate(&small()).unwrap().write(&path, "h").unwrap();
    let good = bytes(&path);

    let mut bad_magic = good.clone();
    bad_magic[0] ^= 0xff;
    std::fs::write(&path, &bad_magic).unwrap();
    assert_eq!(Dataset::read(&path).unwrap_err().kind(), "artifact");

    let mut bad_version = good.clone();
    bad_version[8] = 99;
    std::fs::write(&path, &bad_version).unwrap();
    assert_eq!(Dataset::read(&path).unwrap_err().kind(), "artifact");

    std::fs::write(&path, &good[..good.len() - 3]).unwrap();
    assert_eq!(Dataset::read(&path).unwrap_err().kind(), "artifact");

    let mut trailing = good;
    trailing.push(0);
    std::fs::write(&path, &trailing).unwrap();
    assert_eq!(Dataset::read(&path).unwrap_err().kind(), "artifact");
}
