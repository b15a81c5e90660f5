//! Evaluation metrics, two per property, plus score normalization and aggregation.
//!
//! Raw scores follow each metric's own orientation. [`normalize_inverse`] and
//! [`normalize_max`] turn them into scores where higher is better and the best
//! compared method sits at exactly 1.

mod complexity;
mod faithfulness;
mod localization;
mod normalize;
mod randomization;
mod robustness;
mod similarity;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use complexity::{complexity_entropy, sparseness_gini};
pub use faithfulness::{
    faithfulness_correlation, impute_noisy_linear, road, road_auc, road_curve, trapezoid_auc, FcScore,
};
pub use localization::{relevance_rank_accuracy, top_k};
pub use normalize::{aggregate, normalize_inverse, normalize_max, Aggregate, SCORE_FLOOR};
pub use randomization::{model_parameter_test, random_logit};
pub use robustness::{avg_sensitivity, local_lipschitz, robustness_scores, RobustnessScores};
pub use similarity::{pearson, spearman, ssim_global, Similarity};

use crate::error::Result;
use crate::explain::{minmax_normalize, Explainer, Explanation};
use crate::models::Network;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Robustness,
    Faithfulness,
    Randomization,
    Complexity,
    Localization,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::Robustness,
        Property::Faithfulness,
        Property::Randomization,
        Property::Complexity,
        Property::Localization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Robustness => "robustness",
            Property::Faithfulness => "faithfulness",
            Property::Randomization => "randomization",
            Property::Complexity => "complexity",
            Property::Localization => "localization",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How raw scores are mapped onto the comparable scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `q_min / q`, for metrics where lower raw is better.
    Inverse,
    /// `q / q_max`, for metrics where higher raw is better.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    AvgSensitivity,
    LocalLipschitz,
    Road,
    FaithfulnessCorrelation,
    ModelParameterTest,
    RandomLogit,
    Complexity,
    Sparseness,
    TopK,
    Rra,
}

impl MetricId {
    pub const ALL: [MetricId; 10] = [
        MetricId::AvgSensitivity,
        MetricId::LocalLipschitz,
        MetricId::Road,
        MetricId::FaithfulnessCorrelation,
        MetricId::ModelParameterTest,
        MetricId::RandomLogit,
        MetricId::Complexity,
        MetricId::Sparseness,
        MetricId::TopK,
        MetricId::Rra,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MetricId::AvgSensitivity => "avg_sensitivity",
            MetricId::LocalLipschitz => "local_lipschitz",
            MetricId::Road => "road",
            MetricId::FaithfulnessCorrelation => "faithfulness_correlation",
            MetricId::ModelParameterTest => "model_parameter_test",
            MetricId::RandomLogit => "random_logit",
            MetricId::Complexity => "complexity",
            MetricId::Sparseness => "sparseness",
            MetricId::TopK => "top_k",
            MetricId::Rra => "rra",
        }
    }

    pub fn property(self) -> Property {
        match self {
            MetricId::AvgSensitivity | MetricId::LocalLipschitz => Property::Robustness,
            MetricId::Road | MetricId::FaithfulnessCorrelation => Property::Faithfulness,
            MetricId::ModelParameterTest | MetricId::RandomLogit => Property::Randomization,
            MetricId::Complexity | MetricId::Sparseness => Property::Complexity,
            MetricId::TopK | MetricId::Rra => Property::Localization,
        }
    }

    pub fn normalization(self) -> Normalization {
        match self {
            MetricId::AvgSensitivity
            | MetricId::LocalLipschitz
            | MetricId::Road
            | MetricId::ModelParameterTest
            | MetricId::RandomLogit
            | MetricId::Complexity => Normalization::Inverse,
            MetricId::FaithfulnessCorrelation | MetricId::Sparseness | MetricId::TopK | MetricId::Rra => {
                Normalization::Max
            }
        }
    }

    /// Metrics that re-explain with a changed model or class; the random
    /// baseline keeps its original map under these.
    pub fn is_randomization(self) -> bool {
        self.property() == Property::Randomization
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MetricId {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| crate::Error::Config(format!("unknown metric `{s}`")))
    }
}

/// Replacement values for the faithfulness-correlation subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FcBaseline {
    /// Fresh `U(0, 1)` draws per pixel and run.
    Uniform,
    /// A fixed value.
    Constant(f64),
}

/// How the model-parameter test disturbs one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPerturbation {
    /// `w · η`, `η ~ N(1, σ)`.
    Multiplicative,
    /// `w + ε`, `ε ~ N(0, σ)`.
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerOrder {
    /// Input layer first.
    BottomUp,
    /// Output layer first.
    TopDown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// Min-max normalize every explanation before scoring.
    pub normalize_explanations: bool,
    pub robust_sigma: f64,
    pub robust_samples: usize,
    pub fc_runs: usize,
    pub fc_subset: usize,
    pub fc_baseline: FcBaseline,
    /// Masked fractions in `(0, 1]`, strictly increasing.
    pub road_percentages: Vec<f64>,
    pub road_noise_sigma: f64,
    pub road_draws: usize,
    pub mpt_sigma: f64,
    pub mpt_perturbation: WeightPerturbation,
    pub mpt_order: LayerOrder,
    pub mpt_similarity: Similarity,
    pub rl_similarity: Similarity,
    /// Number of non-target classes compared; `None` uses all of them.
    pub rl_classes: Option<usize>,
    /// `K` as a fraction of the number of pixels.
    pub topk_fraction: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            normalize_explanations: true,
            robust_sigma: 0.1,
            robust_samples: 10,
            fc_runs: 50,
            fc_subset: 40,
            fc_baseline: FcBaseline::Uniform,
            road_percentages: (1..=50).map(|p| p as f64 / 100.0).collect(),
            road_noise_sigma: 0.01,
            road_draws: 10,
            mpt_sigma: 0.25,
            mpt_perturbation: WeightPerturbation::Multiplicative,
            mpt_order: LayerOrder::BottomUp,
            mpt_similarity: Similarity::Pearson,
            rl_similarity: Similarity::Pearson,
            rl_classes: None,
            topk_fraction: 0.1,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(crate::Error::Config(m));
        if self.robust_samples == 0 {
            return err("robust_samples must be at least 1".into());
        }
        if !(self.robust_sigma > 0.0) {
            return err(format!("robust_sigma must be > 0, got {}", self.robust_sigma));
        }
        if self.fc_runs < 2 || self.fc_subset == 0 {
            return err("faithfulness correlation needs >= 2 runs and a non-empty subset".into());
        }
        faithfulness::check_percentages(&self.road_percentages)?;
        if self.road_draws == 0 {
            return err("road_draws must be at least 1".into());
        }
        if !(self.topk_fraction > 0.0 && self.topk_fraction <= 1.0) {
            return err(format!("topk_fraction must lie in (0, 1], got {}", self.topk_fraction));
        }
        Ok(())
    }

    /// `K` for a map of `d` pixels, at least 1.
    pub fn top_k_for(&self, d: usize) -> usize {
        ((self.topk_fraction * d as f64).round() as usize).clamp(1, d)
    }
}

/// Seeds for one metric evaluation: `explain` keys the explainer's own draws,
/// `noise` keys the metric's perturbations. Sharing `noise` across methods
/// scores them on identical perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSeeds {
    pub explain: u64,
    pub noise: u64,
}

impl From<u64> for TaskSeeds {
    fn from(seed: u64) -> Self {
        Self {
            explain: seed,
            noise: seed,
        }
    }
}

/// Anything that maps `(network, input, class, seed)` to a relevance map.
pub trait Attribution: Sync {
    fn attribute(&self, net: &Network, x: &Tensor, class: usize, seed: u64) -> Result<Tensor>;
}

impl Attribution for Explainer {
    fn attribute(&self, net: &Network, x: &Tensor, class: usize, seed: u64) -> Result<Tensor> {
        self.relevance(net, x, class, seed)
    }
}

impl<F> Attribution for F
where
    F: Fn(&Network, &Tensor, usize, u64) -> Result<Tensor> + Sync,
{
    fn attribute(&self, net: &Network, x: &Tensor, class: usize, seed: u64) -> Result<Tensor> {
        self(net, x, class, seed)
    }
}

/// Applies the configured explanation normalization to a raw map.
pub fn prepare(map: Tensor, cfg: &MetricConfig) -> Tensor {
    if !cfg.normalize_explanations {
        return map;
    }
    minmax_normalize(&Explanation {
        method: crate::explain::Method::Gradient,
        target_class: 0,
        relevance: map,
        normalized: false,
    })
    .relevance
}

fn explain_prepared(
    a: &impl Attribution,
    net: &Network,
    x: &Tensor,
    class: usize,
    seed: u64,
    cfg: &MetricConfig,
) -> Result<Tensor> {
    Ok(prepare(a.attribute(net, x, class, seed)?, cfg))
}
