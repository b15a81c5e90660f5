//! File-backed pipeline stages. Each stage reads the artifacts of the stages
//! before it, checks they were made under the same settings, and writes its own
//! artifact stamped with the configuration hash and master seed.

use std::path::Path;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::benchmark::{self, explain_samples, select_samples, Evaluation, PropertyReport, BASELINE};
use crate::config::PipelineConfig;
use crate::datagen::{self, Dataset};
use crate::error::{Error, Result};
use crate::explain::ExplanationBatch;
use crate::io::{read_json, write_atomic, write_json};
use crate::models::{evaluate_performance, train, Performance, TrainedModel};
use crate::report::{self, Summary, RANKS_CSV, RANKS_TXT};

const EVALUATION_VERSION: u32 = 1;

/// `evaluation.json`: the scores plus the run they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationFile {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub evaluation: Evaluation,
}

/// Runs `f` on a rayon pool of `workers` threads (0 picks the default).
/// Results never depend on the pool size.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// One structured log line per finished stage.
fn done(stage: &str, cfg: &PipelineConfig, start: Instant, detail: std::fmt::Arguments) {
    info!("stage={stage} seed={} wall_s={:.3} {detail}", cfg.seed, start.elapsed().as_secs_f64());
}

fn require(stage: &'static str, path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::StageOrder {
            stage,
            missing: format!("{what} at {}", path.display()),
        })
    }
}

fn stale(path: &Path, what: &str) -> Error {
    Error::artifact(path, format!("{what} disagrees with the configuration; rerun the stage that writes it"))
}

fn load_dataset(cfg: &PipelineConfig, stage: &'static str) -> Result<Dataset> {
    let path = cfg.paths.dataset();
    require(stage, &path, "a dataset (run `generate`)")?;
    let (dataset, manifest) = Dataset::read(&path)?;
    if manifest.config != cfg.dataset_config() {
        return Err(stale(&path, "dataset config"));
    }
    Ok(dataset)
}

fn load_model(cfg: &PipelineConfig, stage: &'static str) -> Result<TrainedModel> {
    let path = cfg.paths.model();
    require(stage, &path, "a trained model (run `train`)")?;
    let (model, sidecar) = TrainedModel::read(&path)?;
    if sidecar.spec != cfg.model_spec() {
        return Err(stale(&path, "model spec"));
    }
    Ok(model)
}

fn load_explanations(cfg: &PipelineConfig, stage: &'static str) -> Result<Vec<ExplanationBatch>> {
    let mut methods = cfg.methods();
    methods.push(BASELINE);
    methods
        .into_iter()
        .map(|m| {
            let path = cfg.paths.explanation(m);
            require(stage, &path, &format!("explanations of `{m}` (run `explain`)"))?;
            let (batch, sidecar) = ExplanationBatch::read(&path)?;
            if sidecar.hyperparameters != cfg.xai || sidecar.seed != cfg.seed {
                return Err(stale(&path, "explanation settings"));
            }
            Ok(batch)
        })
        .collect()
}

fn load_evaluation(cfg: &PipelineConfig, stage: &'static str) -> Result<Evaluation> {
    let path = cfg.paths.evaluation();
    require(stage, &path, "an evaluation (run `evaluate`)")?;
    let file: EvaluationFile = read_json(&path)?;
    if file.config_hash != cfg.hash() || file.seed != cfg.seed {
        return Err(stale(&path, "evaluation hash"));
    }
    Ok(file.evaluation)
}

pub fn generate(cfg: &PipelineConfig) -> Result<Dataset> {
    let start = Instant::now();
    cfg.validate()?;
    let dataset = datagen::generate(&cfg.dataset_config())?;
    let path = cfg.paths.dataset();
    dataset.write(&path, &cfg.hash())?;
    done("generate", cfg, start, format_args!("maps={} path={}", dataset.len(), path.display()));
    Ok(dataset)
}

pub fn train_model(cfg: &PipelineConfig) -> Result<(TrainedModel, Performance)> {
    let start = Instant::now();
    cfg.validate()?;
    let dataset = load_dataset(cfg, "train")?;
    let model = train(&cfg.model_spec(), &dataset, &cfg.train_config())?;
    let perf = evaluate_performance(&model, &dataset)?;
    model.write(&cfg.paths.model(), &cfg.hash())?;
    done(
        "train",
        cfg,
        start,
        format_args!(
            "arch={} epochs={} test_accuracy={:.3} test_rmse={:.2}",
            cfg.arch().name(),
            model.train_log.len(),
            perf.test.accuracy,
            perf.test.rmse
        ),
    );
    Ok((model, perf))
}

/// Picks the benchmark samples and writes one batch per method, baseline included.
pub fn explain(cfg: &PipelineConfig) -> Result<Vec<ExplanationBatch>> {
    let start = Instant::now();
    cfg.validate()?;
    let model = load_model(cfg, "explain")?;
    let dataset = load_dataset(cfg, "explain")?;
    let ids = select_samples(&model, &dataset, &cfg.benchmark, cfg.seed)?;
    let mut methods = cfg.methods();
    methods.push(BASELINE);
    let batches = explain_samples(&model, &dataset, &methods, &cfg.xai, &ids, cfg.seed)?;
    let hash = cfg.hash();
    for b in &batches {
        b.write(&cfg.paths.explanation(b.method), &cfg.xai, cfg.seed, &hash)?;
    }
    done("explain", cfg, start, format_args!("samples={} methods={}", ids.len(), batches.len()));
    Ok(batches)
}

pub fn evaluate(cfg: &PipelineConfig) -> Result<Evaluation> {
    let start = Instant::now();
    cfg.validate()?;
    let model = load_model(cfg, "evaluate")?;
    let dataset = load_dataset(cfg, "evaluate")?;
    let batches = load_explanations(cfg, "evaluate")?;
    let evaluation = benchmark::evaluate(&model, &dataset, &batches, &cfg.benchmark.metrics, &cfg.xai, &cfg.metrics, cfg.seed)?;
    let file = EvaluationFile {
        format_version: EVALUATION_VERSION,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        evaluation,
    };
    write_json(&cfg.paths.evaluation(), &file)?;
    done("evaluate", cfg, start, format_args!("metrics={}", file.evaluation.metrics().len()));
    Ok(file.evaluation)
}

/// Ranks the selected metrics and writes the rank tables.
pub fn rank(cfg: &PipelineConfig) -> Result<Vec<PropertyReport>> {
    let start = Instant::now();
    cfg.validate()?;
    let evaluation = load_evaluation(cfg, "rank")?;
    let reports = benchmark::rank(&evaluation, &cfg.benchmark.selection)?;
    let dir = cfg.paths.report();
    write_atomic(&dir.join(RANKS_CSV), report::ranks_csv(&reports, &cfg.hash(), cfg.seed).as_bytes())?;
    write_atomic(&dir.join(RANKS_TXT), report::ranks_table(&reports).as_bytes())?;
    done("rank", cfg, start, format_args!("properties={}", reports.len()));
    Ok(reports)
}

/// Writes every report file and returns the summary.
pub fn report(cfg: &PipelineConfig) -> Result<Summary> {
    let start = Instant::now();
    cfg.validate()?;
    let evaluation = load_evaluation(cfg, "report")?;
    let model = load_model(cfg, "report")?;
    let dataset = load_dataset(cfg, "report")?;
    let perf = evaluate_performance(&model, &dataset)?;
    let reports = benchmark::rank(&evaluation, &cfg.benchmark.selection)?;
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        arch: cfg.arch().name().to_string(),
        test_accuracy: perf.test.accuracy,
        test_rmse: perf.test.rmse,
        sample_ids: evaluation.sample_ids.clone(),
        methods: cfg.methods(),
        baseline_in_normalization: true,
        properties: Summary::properties_of(&reports),
    };
    let dir = cfg.paths.report();
    report::write_report(&dir, &evaluation, &reports, &summary)?;
    done("report", cfg, start, format_args!("dir={}", dir.display()));
    Ok(summary)
}

pub fn run_all(cfg: &PipelineConfig) -> Result<Summary> {
    generate(cfg)?;
    train_model(cfg)?;
    explain(cfg)?;
    evaluate(cfg)?;
    report(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Roi;
    use crate::explain::Method;
    use crate::metrics::MetricId;

    fn tiny(out: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.paths.out = out.to_path_buf();
        cfg.dataset.grid = (6, 8);
        cfg.dataset.members = 4;
        cfg.dataset.years = 40;
        cfg.dataset.classes = 4;
        cfg.dataset.roi = Roi {
            row_start: 1,
            row_end: 3,
            col_start: 2,
            col_end: 5,
        };
        cfg.model.spec.hidden = vec![8];
        cfg.model.train.epochs = 5;
        cfg.methods = Some(vec![Method::Gradient, Method::InputGradient]);
        cfg.benchmark.samples = 2;
        cfg.benchmark.tolerance_years = 40;
        cfg.benchmark.metrics = vec![MetricId::Sparseness, MetricId::Complexity, MetricId::TopK, MetricId::Rra];
        cfg.benchmark.selection = vec![MetricId::Sparseness, MetricId::Rra];
        cfg
    }

    #[test]
    fn stages_refuse_to_run_out_of_order() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        for (err, stage) in [
            (train_model(&cfg).unwrap_err(), "train"),
            (explain(&cfg).unwrap_err(), "explain"),
            (evaluate(&cfg).unwrap_err(), "evaluate"),
            (rank(&cfg).unwrap_err(), "rank"),
        ] {
            assert_eq!(err.kind(), "stage_order", "{err}");
            assert!(err.to_string().contains(stage));
        }
        generate(&cfg).unwrap();
        let err = evaluate(&cfg).unwrap_err();
        assert!(err.to_string().contains("trained model"), "{err}");
    }

    #[test]
    fn stale_artifacts_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        generate(&cfg).unwrap();
        let mut other = cfg.clone();
        other.seed = 3;
        assert_eq!(train_model(&other).unwrap_err().kind(), "artifact");
    }
}
