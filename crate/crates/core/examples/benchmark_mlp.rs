//! Full benchmark of the default MLP: every default method against the
//! random baseline, one table row per metric.
//!
//! `cargo run --release --example benchmark_mlp -- [seed]`

use std::time::Instant;

use xaibench::benchmark::{property_report, run_benchmark, BenchmarkConfig};
use xaibench::datagen::{generate, DatasetConfig};
use xaibench::explain::{Method, XaiConfig};
use xaibench::metrics::{MetricConfig, MetricId};
use xaibench::models::{evaluate_performance, train, Arch, ModelSpec, TrainConfig};

fn main() -> xaibench::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let t = Instant::now();
    let dataset = generate(&DatasetConfig { seed, ..DatasetConfig::default() })?;
    let spec = ModelSpec::for_dataset(Arch::Mlp, &dataset);
    let model = train(&spec, &dataset, &TrainConfig { seed, ..TrainConfig::default() })?;
    let perf = evaluate_performance(&model, &dataset)?;
    println!("trained in {:.1?}: test accuracy {:.3}", t.elapsed(), perf.test.accuracy);

    let bench = BenchmarkConfig {
        metrics: MetricId::ALL.into_iter().filter(|&m| m != MetricId::RandomLogit).collect(),
        ..BenchmarkConfig::default()
    };
    let methods = Method::defaults_for(Arch::Mlp);
    let t = Instant::now();
    let b = run_benchmark(&model, &dataset, &methods, &bench, &XaiConfig::default(), &MetricConfig::default(), seed)?;
    println!("benchmarked in {:.1?}", t.elapsed());

    print!("{:<26}", "metric");
    for m in &b.evaluation.methods {
        print!("{:>22}", m.id());
    }
    println!();
    for metric in b.evaluation.metrics() {
        let r = property_report(&b.evaluation, metric)?;
        print!("{:<26}", metric.id());
        for s in &r.methods {
            print!("{:>14.3}±{:.3} ({})", s.mean, s.sem, s.rank);
        }
        println!("{:>14.3}±{:.3} {}", r.baseline.mean, r.baseline.sem, if r.baseline_passed { "pass" } else { "FAIL" });
    }
    Ok(())
}
