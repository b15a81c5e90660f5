//! Writes the rank tables, spyder chart and summary for a small benchmark.
//!
//! `cargo run --release --example spyder_report -- [out-dir]`

use std::path::PathBuf;

use xaibench::benchmark::{run_benchmark, BenchmarkConfig};
use xaibench::datagen::{generate, DatasetConfig};
use xaibench::explain::{Method, XaiConfig};
use xaibench::metrics::MetricConfig;
use xaibench::models::{evaluate_performance, train, Arch, ModelSpec, TrainConfig};
use xaibench::report::{ranks_table, spyder_csv, write_report, Summary};

fn main() -> xaibench::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("xaibench-spyder"));
    let ds = generate(&DatasetConfig::default())?;
    let model = train(&ModelSpec::for_dataset(Arch::Mlp, &ds), &ds, &TrainConfig::default())?;
    let perf = evaluate_performance(&model, &ds)?;

    // The selected metric of every property, and only those, keeps this quick.
    let bench = BenchmarkConfig {
        samples: 20,
        metrics: xaibench::benchmark::default_selection(),
        ..BenchmarkConfig::default()
    };
    let methods = [Method::Gradient, Method::InputGradient, Method::SmoothGrad, Method::LrpAlphaBeta];
    let b = run_benchmark(&model, &ds, &methods, &bench, &XaiConfig::default(), &MetricConfig::default(), 0)?;

    let summary = Summary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: "example".into(),
        seed: 0,
        arch: Arch::Mlp.name().into(),
        test_accuracy: perf.test.accuracy,
        test_rmse: perf.test.rmse,
        sample_ids: b.evaluation.sample_ids.clone(),
        methods: methods.to_vec(),
        baseline_in_normalization: true,
        properties: Summary::properties_of(&b.reports),
    };
    write_report(&dir, &b.evaluation, &b.reports, &summary)?;
    print!("{}", ranks_table(&b.reports));
    println!();
    print!("{}", spyder_csv(&b.reports));
    println!("\nwrote {}", dir.display());
    Ok(())
}
