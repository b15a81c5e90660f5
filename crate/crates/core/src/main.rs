use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use xaibench::config::PipelineConfig;
use xaibench::explain::Method;
use xaibench::metrics::MetricId;
use xaibench::models::Arch;
use xaibench::{pipeline, report, Error, Result};

#[derive(Parser)]
#[command(name = "xaibench", version, about = "Generate, train, explain, evaluate and rank attribution methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (0 = one per core). Does not change any result.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Network architecture.
    #[arg(long, global = true, value_parser = ["mlp", "cnn"])]
    arch: Option<String>,
    /// Comma-separated explanation methods.
    #[arg(long, global = true, value_name = "LIST")]
    methods: Option<String>,
    /// Comma-separated metrics to evaluate.
    #[arg(long, global = true, value_name = "LIST")]
    metrics: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the synthetic dataset.
    Generate,
    /// Train the network on the dataset.
    Train,
    /// Explain the benchmark samples with every method.
    Explain,
    /// Score the explanations under every metric.
    Evaluate,
    /// Rank methods per property.
    Rank,
    /// Write rank tables, scores, spyder plot and summary.
    Report,
    /// All stages in order.
    RunAll,
}

fn list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
}

fn load(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out = out.clone();
    }
    if let Some(arch) = &cli.arch {
        cfg.model.spec.arch = arch.parse::<Arch>()?;
    }
    if let Some(m) = &cli.methods {
        cfg.methods = Some(list::<Method>(m)?);
    }
    if let Some(m) = &cli.metrics {
        let metrics: Vec<MetricId> = list(m)?;
        cfg.benchmark.selection.retain(|s| metrics.contains(s));
        for &m in &metrics {
            if !cfg.benchmark.selection.iter().any(|s| s.property() == m.property()) {
                cfg.benchmark.selection.push(m);
            }
        }
        cfg.benchmark.metrics = metrics;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<serde_json::Value> {
    let cfg = load(cli)?;
    let (hash, seed) = (cfg.hash(), cfg.seed);
    let command = cli.command;
    let detail = pipeline::with_workers(cli.workers, move || -> Result<serde_json::Value> {
        Ok(match command {
            Command::Generate => {
                let d = pipeline::generate(&cfg)?;
                json!({"stage": "generate", "maps": d.len(), "path": cfg.paths.dataset()})
            }
            Command::Train => {
                let (_, perf) = pipeline::train_model(&cfg)?;
                json!({"stage": "train", "performance": perf, "path": cfg.paths.model()})
            }
            Command::Explain => {
                let b = pipeline::explain(&cfg)?;
                json!({"stage": "explain", "methods": b.iter().map(|b| b.method).collect::<Vec<_>>(), "path": cfg.paths.explanations()})
            }
            Command::Evaluate => {
                let e = pipeline::evaluate(&cfg)?;
                json!({"stage": "evaluate", "metrics": e.metrics(), "path": cfg.paths.evaluation()})
            }
            Command::Rank => {
                let r = pipeline::rank(&cfg)?;
                json!({"stage": "rank", "table": report::ranks_table(&r), "path": cfg.paths.report()})
            }
            Command::Report => json!({"stage": "report", "summary": pipeline::report(&cfg)?, "path": cfg.paths.report()}),
            Command::RunAll => json!({"stage": "run-all", "summary": pipeline::run_all(&cfg)?, "path": cfg.paths.report()}),
        })
    })??;
    let mut out = json!({"config_hash": hash, "seed": seed});
    out.as_object_mut().unwrap().extend(detail.as_object().cloned().unwrap_or_default());
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
            ExitCode::from(if e.kind() == "config" { 2 } else { 1 })
        }
    }
}
