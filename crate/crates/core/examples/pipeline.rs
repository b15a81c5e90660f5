//! The file-backed pipeline, stage by stage, on a reduced configuration.
//! Each stage reads what the previous one wrote; `run_all` chains them.
//!
//! `cargo run --release --example pipeline -- [out-dir]`

use std::path::PathBuf;

use xaibench::config::PipelineConfig;
use xaibench::explain::Method;
use xaibench::pipeline;

fn main() -> xaibench::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("xaibench-pipeline"));
    let mut cfg = PipelineConfig::default();
    cfg.paths.out = out.clone();
    cfg.methods = Some(vec![Method::Gradient, Method::InputGradient, Method::IntegratedGradients, Method::LrpZ]);
    cfg.benchmark.samples = 20;
    cfg.benchmark.metrics = xaibench::benchmark::default_selection();
    println!("config hash {}", cfg.hash());

    // Running a stage before its inputs exist is an error, not a silent default.
    if let Err(e) = pipeline::evaluate(&cfg) {
        println!("evaluate before train: {} ({})", e, e.kind());
    }

    pipeline::generate(&cfg)?;
    let (_, perf) = pipeline::train_model(&cfg)?;
    println!("test accuracy {:.3}", perf.test.accuracy);
    pipeline::explain(&cfg)?;
    pipeline::evaluate(&cfg)?;
    let reports = pipeline::rank(&cfg)?;
    print!("{}", xaibench::report::ranks_table(&reports));
    let summary = pipeline::report(&cfg)?;
    println!("report for seed {} in {}", summary.seed, cfg.paths.report().display());
    Ok(())
}
