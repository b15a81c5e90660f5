//! The pipeline configuration file and its hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::BenchmarkConfig;
use crate::datagen::DatasetConfig;
use crate::error::{Error, Result};
use crate::explain::{Method, XaiConfig};
use crate::metrics::MetricConfig;
use crate::models::{Arch, ModelSpec, TrainConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `classes` and `input_shape` are taken from the dataset.
    pub spec: ModelSpec,
    pub train: TrainConfig,
}

/// Artifact locations. Relative paths resolve against `out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: PathBuf,
    pub dataset: PathBuf,
    pub model: PathBuf,
    pub explanations: PathBuf,
    pub evaluation: PathBuf,
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            dataset: PathBuf::from("dataset.bin"),
            model: PathBuf::from("model.bin"),
            explanations: PathBuf::from("explanations"),
            evaluation: PathBuf::from("evaluation.json"),
            report: PathBuf::from("report"),
        }
    }
}

impl Paths {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out.join(p)
        }
    }

    pub fn dataset(&self) -> PathBuf {
        self.resolve(&self.dataset)
    }

    pub fn model(&self) -> PathBuf {
        self.resolve(&self.model)
    }

    pub fn explanations(&self) -> PathBuf {
        self.resolve(&self.explanations)
    }

    pub fn explanation(&self, method: Method) -> PathBuf {
        self.explanations().join(format!("{}.bin", method.id()))
    }

    pub fn evaluation(&self) -> PathBuf {
        self.resolve(&self.evaluation)
    }

    pub fn report(&self) -> PathBuf {
        self.resolve(&self.report)
    }
}

/// Everything one pipeline run depends on.
///
/// `seed` is the master seed: it replaces the dataset and training seeds and
/// keys sample selection, explanation noise and metric noise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub xai: XaiConfig,
    /// Explained methods; `None` uses the defaults of the architecture.
    pub methods: Option<Vec<Method>>,
    pub metrics: MetricConfig,
    pub benchmark: BenchmarkConfig,
    pub paths: Paths,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn arch(&self) -> Arch {
        self.model.spec.arch
    }

    /// Explained methods, the random baseline excluded.
    pub fn methods(&self) -> Vec<Method> {
        let all = self.methods.clone().unwrap_or_else(|| Method::defaults_for(self.arch()));
        all.into_iter().filter(|&m| m != crate::benchmark::BASELINE).collect()
    }

    /// Dataset config with the master seed applied.
    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            seed: self.seed,
            ..self.dataset.clone()
        }
    }

    /// Model spec sized for the configured dataset.
    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            classes: self.dataset.classes,
            input_shape: self.dataset.grid,
            ..self.model.spec.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.model.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_config().validate()?;
        self.xai.validate()?;
        self.metrics.validate()?;
        self.benchmark.validate()?;
        if self.methods().is_empty() {
            return Err(Error::Config("no methods to explain".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of everything except `paths`, so
    /// the same experiment hashes equally wherever it is written.
    pub fn hash(&self) -> String {
        let canonical = PipelineConfig {
            paths: Paths::default(),
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
