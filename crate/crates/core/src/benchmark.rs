//! Scoring every method (plus the uniform-random baseline) on shared samples,
//! per-sample normalization across methods, aggregation, and SEM-aware ranking.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Split};
use crate::error::{Error, Result};
use crate::explain::{explanation_seed, random_map, Explainer, ExplanationBatch, Method, XaiConfig};
use crate::metrics::{
    aggregate, complexity_entropy, faithfulness_correlation, model_parameter_test, normalize_inverse, normalize_max,
    prepare, random_logit, relevance_rank_accuracy, road_auc, robustness_scores, sparseness_gini, top_k, Aggregate,
    MetricConfig, MetricId, Normalization, Property, TaskSeeds,
};
use crate::models::{correct_prediction_mask, TrainedModel};
use crate::rng::{self, stream};
use crate::tensor::Tensor;

/// Baseline method of the sanity test.
pub const BASELINE: Method = Method::Random;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Explained samples per method, drawn from correctly predicted test samples.
    pub samples: usize,
    /// A prediction is correct when its regressed year is this close to the truth.
    pub tolerance_years: u32,
    /// Metrics scored by `evaluate`.
    pub metrics: Vec<MetricId>,
    /// At most one metric per property, used for the final ranking.
    pub selection: Vec<MetricId>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            samples: 50,
            tolerance_years: 2,
            metrics: MetricId::ALL.to_vec(),
            selection: default_selection(),
        }
    }
}

pub fn default_selection() -> Vec<MetricId> {
    vec![
        MetricId::LocalLipschitz,
        MetricId::FaithfulnessCorrelation,
        MetricId::ModelParameterTest,
        MetricId::Sparseness,
        MetricId::Rra,
    ]
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::Config(format!("samples must be at least 2, got {}", self.samples)));
        }
        check_selection(&self.selection, &self.metrics)
    }
}

/// Every selected metric must be evaluated and properties may not repeat.
pub fn check_selection(selection: &[MetricId], evaluated: &[MetricId]) -> Result<()> {
    for (k, m) in selection.iter().enumerate() {
        if !evaluated.contains(m) {
            return Err(Error::Config(format!("selected metric `{m}` is not evaluated")));
        }
        if selection[..k].iter().any(|o| o.property() == m.property()) {
            return Err(Error::Config(format!("two metrics selected for {}", m.property())));
        }
    }
    Ok(())
}

/// `count` of the correctly predicted test samples, drawn without replacement
/// and returned in increasing order.
pub fn select_samples(model: &TrainedModel, dataset: &Dataset, cfg: &BenchmarkConfig, seed: u64) -> Result<Vec<usize>> {
    let mask = correct_prediction_mask(model, dataset, cfg.tolerance_years)?;
    let pool: Vec<usize> = dataset.indices(Split::Test).into_iter().filter(|&i| mask[i]).collect();
    if pool.len() < cfg.samples {
        return Err(Error::InsufficientSamples {
            needed: cfg.samples,
            found: pool.len(),
        });
    }
    let mut r = rng::rng_for(seed, &[stream::SELECT]);
    let mut ids: Vec<usize> = index::sample(&mut r, pool.len(), cfg.samples).into_iter().map(|k| pool[k]).collect();
    ids.sort_unstable();
    Ok(ids)
}

/// `count` i.i.d. `U(0, 1)` maps of `shape`, map `k` keyed by `(seed, k)`.
pub fn random_baseline_explanations(count: usize, shape: &[usize], seed: u64) -> Result<ExplanationBatch> {
    if count == 0 {
        return Err(Error::Config("random baseline needs at least one map".into()));
    }
    let mut data = Vec::with_capacity(count * shape.iter().product::<usize>());
    for k in 0..count {
        data.extend_from_slice(random_map(shape, rng::derive_seed(seed, &[k as u64])).data());
    }
    let mut full = vec![count];
    full.extend_from_slice(shape);
    Ok(ExplanationBatch {
        method: BASELINE,
        sample_ids: (0..count).collect(),
        target_classes: vec![0; count],
        maps: Tensor::new(full, data)?,
    })
}

/// Explains the true class of every listed sample with every method.
/// Map `(method, sample)` uses [`explanation_seed`], so results do not depend
/// on how the work is scheduled.
pub fn explain_samples(
    model: &TrainedModel,
    dataset: &Dataset,
    methods: &[Method],
    xai: &XaiConfig,
    sample_ids: &[usize],
    seed: u64,
) -> Result<Vec<ExplanationBatch>> {
    let range = dataset.value_range();
    let net = &model.network;
    let targets: Vec<usize> = sample_ids.iter().map(|&i| dataset.class_label[i]).collect();
    methods
        .iter()
        .map(|&method| {
            let e = Explainer::new(method, xai.clone(), range)?;
            let maps = sample_ids
                .par_iter()
                .zip(&targets)
                .map(|(&i, &c)| e.relevance(net, &dataset.sample(i), c, explanation_seed(seed, method, i)))
                .collect::<Result<Vec<_>>>()?;
            let [v, h] = dataset.map_shape();
            let data = maps.iter().flat_map(|m| m.data().iter().copied()).collect();
            Ok(ExplanationBatch {
                method,
                sample_ids: sample_ids.to_vec(),
                target_classes: targets.clone(),
                maps: Tensor::new(vec![sample_ids.len(), v, h], data)?,
            })
        })
        .collect()
}

/// Scores of one method under one metric.
///
/// `ids` are sample ids, except for ROAD where they index the resampling
/// draws. `normalized` is comparable across methods of the same evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub metric: MetricId,
    pub method: Method,
    pub ids: Vec<usize>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub aggregate: Aggregate,
    /// Samples whose score fell back to a degenerate value (zero-variance FC,
    /// complexity of an all-zero map).
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub seed: u64,
    pub sample_ids: Vec<usize>,
    /// Compared methods; the baseline is last.
    pub methods: Vec<Method>,
    pub scores: Vec<ScoreSet>,
}

impl Evaluation {
    pub fn score(&self, metric: MetricId, method: Method) -> Option<&ScoreSet> {
        self.scores.iter().find(|s| s.metric == metric && s.method == method)
    }

    pub fn metrics(&self) -> Vec<MetricId> {
        let mut m: Vec<MetricId> = self.scores.iter().map(|s| s.metric).collect();
        m.dedup();
        m
    }
}

const N_METRICS: usize = MetricId::ALL.len();

fn slot(m: MetricId) -> usize {
    MetricId::ALL.iter().position(|&o| o == m).expect("listed metric")
}

#[derive(Debug, Clone, Copy)]
struct Row {
    raw: [f64; N_METRICS],
    degenerate: bool,
}

/// Raw scores of one (method, sample) task for every requested metric.
#[allow(clippy::too_many_arguments)]
fn score_task(
    model: &TrainedModel,
    explainer: &Explainer,
    x: &Tensor,
    class: usize,
    map: Tensor,
    roi: &[bool],
    metrics: &[MetricId],
    cfg: &MetricConfig,
    seeds: TaskSeeds,
) -> Result<Row> {
    let net = &model.network;
    let phi = prepare(map, cfg);
    let mut raw = [f64::NAN; N_METRICS];
    let mut degenerate = false;
    let blank = phi.data().iter().all(|&v| v == 0.0);
    let wants = |m: MetricId| metrics.contains(&m);
    if wants(MetricId::AvgSensitivity) || wants(MetricId::LocalLipschitz) {
        let r = robustness_scores(net, explainer, x, class, cfg, seeds)?;
        raw[slot(MetricId::AvgSensitivity)] = r.avg_sensitivity;
        raw[slot(MetricId::LocalLipschitz)] = r.local_lipschitz;
    }
    for &m in metrics {
        raw[slot(m)] = match m {
            MetricId::AvgSensitivity | MetricId::LocalLipschitz => continue,
            MetricId::Road => road_auc(net, &phi, x, cfg, seeds.noise)?,
            MetricId::FaithfulnessCorrelation => {
                let s = faithfulness_correlation(net, &phi, x, class, cfg, seeds.noise)?;
                degenerate |= s.degenerate;
                s.value
            }
            MetricId::ModelParameterTest => model_parameter_test(net, explainer, x, class, cfg, seeds)?.mean,
            MetricId::RandomLogit => random_logit(net, explainer, x, class, cfg, seeds)?.mean,
            // an all-zero map concentrates nothing: scored as the flattest possible map
            MetricId::Complexity | MetricId::Sparseness if blank => {
                degenerate = true;
                if m == MetricId::Complexity { (phi.len() as f64).ln() } else { 0.0 }
            }
            MetricId::Complexity => complexity_entropy(&phi)?,
            MetricId::Sparseness => sparseness_gini(&phi)?,
            MetricId::TopK => top_k(&phi, roi, cfg.top_k_for(phi.len()))?,
            MetricId::Rra => relevance_rank_accuracy(&phi, roi)?,
        };
    }
    Ok(Row { raw, degenerate })
}

/// Normalizes one row of raw scores (one entry per method). A row whose
/// maximum is zero under `normalize_max` carries no ordering and maps to zeros.
fn normalize_row(metric: MetricId, row: &[f64]) -> Result<Vec<f64>> {
    match metric.normalization() {
        Normalization::Inverse => normalize_inverse(row),
        Normalization::Max => match normalize_max(row) {
            Err(Error::Metric { reason, .. }) if reason.contains("zero") => Ok(vec![0.0; row.len()]),
            other => other,
        },
    }
}

/// Scores every batch (the baseline batch included) under `metrics`.
///
/// All batches must cover the same samples in the same order; they are the
/// maps from [`explain_samples`] under the same `seed`. Metrics that re-explain
/// use the explanation seeds again, so the baseline keeps its map under the
/// randomization metrics and redraws it under the robustness metrics.
pub fn evaluate(
    model: &TrainedModel,
    dataset: &Dataset,
    batches: &[ExplanationBatch],
    metrics: &[MetricId],
    xai: &XaiConfig,
    cfg: &MetricConfig,
    seed: u64,
) -> Result<Evaluation> {
    cfg.validate()?;
    let first = batches.first().ok_or_else(|| Error::Config("no explanations to evaluate".into()))?;
    let ids = first.sample_ids.clone();
    if ids.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: ids.len(),
        });
    }
    for b in batches {
        if b.sample_ids != ids || b.target_classes != first.target_classes {
            return Err(Error::Config(format!("explanations of `{}` cover different samples", b.method)));
        }
    }
    let mut metrics = metrics.to_vec();
    metrics.sort();
    metrics.dedup();
    let range = dataset.value_range();
    let roi = dataset.roi_mask();
    let explainers = batches
        .iter()
        .map(|b| Explainer::new(b.method, xai.clone(), range))
        .collect::<Result<Vec<_>>>()?;
    let n = ids.len();
    let rows: Vec<Row> = (0..batches.len() * n)
        .into_par_iter()
        .map(|t| {
            let (m, k) = (t / n, t % n);
            let b = &batches[m];
            let seeds = TaskSeeds {
                explain: explanation_seed(seed, b.method, ids[k]),
                noise: rng::derive_seed(seed, &[stream::METRIC, ids[k] as u64]),
            };
            let x = dataset.sample(ids[k]);
            score_task(model, &explainers[m], &x, b.target_classes[k], b.map(k), &roi, &metrics, cfg, seeds)
        })
        .collect::<Result<_>>()?;
    let row = |m: usize, k: usize| &rows[m * n + k];

    let mut scores = Vec::new();
    for &metric in &metrics {
        let s = slot(metric);
        let per_method: Vec<Vec<f64>> = (0..batches.len()).map(|m| (0..n).map(|k| row(m, k).raw[s]).collect()).collect();
        let (row_ids, raw) = if metric == MetricId::Road {
            road_draws(&per_method, cfg.road_draws, seed)
        } else {
            (ids.clone(), per_method)
        };
        let mut normalized = vec![vec![0.0; row_ids.len()]; batches.len()];
        for k in 0..row_ids.len() {
            let column: Vec<f64> = raw.iter().map(|r| r[k]).collect();
            for (m, v) in normalize_row(metric, &column)?.into_iter().enumerate() {
                normalized[m][k] = v;
            }
        }
        for (m, b) in batches.iter().enumerate() {
            let degenerate = if metric == MetricId::FaithfulnessCorrelation {
                (0..n).filter(|&k| row(m, k).degenerate).count()
            } else {
                0
            };
            scores.push(ScoreSet {
                metric,
                method: b.method,
                ids: row_ids.clone(),
                raw: raw[m].clone(),
                aggregate: aggregate(&normalized[m])?,
                normalized: std::mem::take(&mut normalized[m]),
                degenerate,
            });
        }
    }
    Ok(Evaluation {
        seed,
        sample_ids: ids,
        methods: batches.iter().map(|b| b.method).collect(),
        scores,
    })
}

/// ROAD scores per resampling draw: each draw averages the per-sample areas
/// over a with-replacement resample shared by all methods. The area of the
/// mean curve equals the mean of per-sample areas, since the area is linear.
fn road_draws(per_method: &[Vec<f64>], draws: usize, seed: u64) -> (Vec<usize>, Vec<Vec<f64>>) {
    let n = per_method[0].len();
    let picks: Vec<Vec<usize>> = (0..draws)
        .map(|v| {
            let mut r = rng::rng_for(seed, &[stream::METRIC, rng::tag("road_resample"), v as u64]);
            (0..n).map(|_| r.random_range(0..n)).collect()
        })
        .collect();
    let raw = per_method
        .iter()
        .map(|aucs| picks.iter().map(|p| p.iter().map(|&k| aucs[k]).sum::<f64>() / n as f64).collect())
        .collect();
    ((0..draws).collect(), raw)
}

/// Dense ranks (1 = best) after sorting by mean. Neighbours in the sorted
/// order share a rank when their means differ by at most the larger of their
/// SEMs, and sharing chains through a group.
pub fn rank_methods(scores: &[Aggregate], higher_is_better: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        let o = scores[i].mean.total_cmp(&scores[j].mean);
        (if higher_is_better { o.reverse() } else { o }).then(i.cmp(&j))
    });
    let mut ranks = vec![0; scores.len()];
    let mut rank = 0;
    for (pos, &i) in order.iter().enumerate() {
        if pos == 0 || !ties(&scores[order[pos - 1]], &scores[i]) {
            rank += 1;
        }
        ranks[i] = rank;
    }
    ranks
}

/// Relative headroom for means that sit exactly one SEM apart, or coincide,
/// but differ by rounding.
const TIE_SLACK: f64 = 1e-9;

fn ties(a: &Aggregate, b: &Aggregate) -> bool {
    let slack = TIE_SLACK * a.mean.abs().max(b.mean.abs()).max(1.0);
    (a.mean - b.mean).abs() <= a.sem.max(b.sem) + slack
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: Method,
    pub mean: f64,
    pub sem: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: Property,
    pub metric: MetricId,
    /// Compared methods, baseline excluded, in evaluation order.
    pub methods: Vec<MethodScore>,
    pub baseline: Aggregate,
    /// The baseline mean is strictly the lowest and further than one SEM
    /// (the larger of the two) below the next method.
    pub baseline_passed: bool,
}

impl PropertyReport {
    pub fn rank_of(&self, method: Method) -> Option<usize> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.rank)
    }
}

/// Ranks the methods of `evaluation` under `metric` and runs the baseline test.
pub fn property_report(evaluation: &Evaluation, metric: MetricId) -> Result<PropertyReport> {
    let get = |m: Method| {
        evaluation
            .score(metric, m)
            .map(|s| s.aggregate)
            .ok_or_else(|| Error::Config(format!("metric `{metric}` was not evaluated for `{m}`")))
    };
    let compared: Vec<Method> = evaluation.methods.iter().copied().filter(|&m| m != BASELINE).collect();
    let aggs = compared.iter().map(|&m| get(m)).collect::<Result<Vec<_>>>()?;
    let baseline = get(BASELINE)?;
    let ranks = rank_methods(&aggs, true);
    let baseline_passed = aggs
        .iter()
        .min_by(|a, b| a.mean.total_cmp(&b.mean))
        .is_some_and(|next| baseline.mean < next.mean && next.mean - baseline.mean > baseline.sem.max(next.sem));
    Ok(PropertyReport {
        property: metric.property(),
        metric,
        methods: compared
            .into_iter()
            .zip(aggs)
            .zip(ranks)
            .map(|((method, a), rank)| MethodScore {
                method,
                mean: a.mean,
                sem: a.sem,
                rank,
            })
            .collect(),
        baseline,
        baseline_passed,
    })
}

/// One report per selected metric, in property order.
pub fn rank(evaluation: &Evaluation, selection: &[MetricId]) -> Result<Vec<PropertyReport>> {
    check_selection(selection, &evaluation.metrics())?;
    let mut selection = selection.to_vec();
    selection.sort_by_key(|m| m.property());
    selection.into_iter().map(|m| property_report(evaluation, m)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub explanations: Vec<ExplanationBatch>,
    pub evaluation: Evaluation,
    pub reports: Vec<PropertyReport>,
}

/// Selection, explanation, evaluation and ranking in one call. The baseline
/// is appended to `methods`.
pub fn run_benchmark(
    model: &TrainedModel,
    dataset: &Dataset,
    methods: &[Method],
    cfg: &BenchmarkConfig,
    xai: &XaiConfig,
    metric_cfg: &MetricConfig,
    seed: u64,
) -> Result<Benchmark> {
    cfg.validate()?;
    let ids = select_samples(model, dataset, cfg, seed)?;
    let mut all: Vec<Method> = methods.iter().copied().filter(|&m| m != BASELINE).collect();
    all.push(BASELINE);
    let explanations = explain_samples(model, dataset, &all, xai, &ids, seed)?;
    let evaluation = evaluate(model, dataset, &explanations, &cfg.metrics, xai, metric_cfg, seed)?;
    let reports = rank(&evaluation, &cfg.selection)?;
    Ok(Benchmark {
        explanations,
        evaluation,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, DatasetConfig, Roi};
    use crate::models::{train, ModelSpec, TrainConfig};
    use proptest::prelude::*;

    fn agg(mean: f64, sem: f64) -> Aggregate {
        Aggregate { mean, sem, n: 50 }
    }

    #[test]
    fn reference_ties_are_merged() {
        let s = [agg(0.99, 0.02), agg(0.99, 0.02), agg(0.85, 0.03)];
        assert_eq!(rank_methods(&s, true), vec![1, 1, 2]);
        assert_eq!(rank_methods(&[agg(0.3, 0.1)], true), vec![1]);
        let s = [agg(0.9, 0.01), agg(0.5, 0.01), agg(0.1, 0.01)];
        assert_eq!(rank_methods(&s, true), vec![1, 2, 3]);
        assert_eq!(rank_methods(&s, false), vec![3, 2, 1]);
    }

    #[test]
    fn ties_chain_through_neighbours() {
        let s = [agg(0.50, 0.03), agg(0.53, 0.01), agg(0.56, 0.03), agg(0.70, 0.01)];
        assert_eq!(rank_methods(&s, true), vec![2, 2, 2, 1]);
    }

    #[test]
    fn baseline_batch_is_uniform_and_seeded() {
        let a = random_baseline_explanations(4, &[6, 5], 9).unwrap();
        assert_eq!(a.maps.shape(), &[4, 6, 5]);
        assert!(a.maps.data().iter().all(|v| (0.0..1.0).contains(v)));
        assert_eq!(a, random_baseline_explanations(4, &[6, 5], 9).unwrap());
        assert_ne!(a.map(0), a.map(1));
        assert!(random_baseline_explanations(0, &[2], 0).is_err());
    }

    #[test]
    fn baseline_redraws_under_robustness_and_keeps_its_map_under_randomization() {
        let e = Explainer::new(BASELINE, XaiConfig::default(), (0.0, 1.0)).unwrap();
        let net = ModelSpec {
            hidden: vec![4],
            classes: 3,
            input_shape: (3, 3),
            ..ModelSpec::default()
        }
        .build(0)
        .unwrap();
        let x = Tensor::full(&[3, 3], 0.5);
        let seed = explanation_seed(1, BASELINE, 7);
        let first = e.relevance(&net, &x, 0, seed).unwrap();
        let perturbed_request = e.relevance(&net, &x, 0, rng::derive_seed(seed, &[1])).unwrap();
        assert_ne!(first, perturbed_request);
        let cfg = MetricConfig::default();
        let mpt = model_parameter_test(&net, &e, &x, 0, &cfg, seed).unwrap();
        assert!(mpt.items.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn selection_rules() {
        let all = MetricId::ALL.to_vec();
        assert!(check_selection(&default_selection(), &all).is_ok());
        assert!(check_selection(&[MetricId::Road, MetricId::FaithfulnessCorrelation], &all).is_err());
        assert!(check_selection(&[MetricId::Road], &[MetricId::TopK]).is_err());
    }

    fn small() -> (Dataset, TrainedModel) {
        let ds = generate(&DatasetConfig {
            grid: (8, 6),
            years: 40,
            members: 5,
            classes: 4,
            roi: Roi {
                row_start: 2,
                row_end: 5,
                col_start: 1,
                col_end: 4,
            },
            roi_signal: 4.0,
            trend_amplitude: 2.0,
            noise_sigma: 0.4,
            seed: 11,
            ..DatasetConfig::default()
        })
        .unwrap();
        let spec = ModelSpec {
            hidden: vec![16, 16],
            bias: crate::models::BiasMode::None,
            ..ModelSpec::for_dataset(crate::models::Arch::Mlp, &ds)
        };
        let model = train(
            &spec,
            &ds,
            &TrainConfig {
                epochs: 30,
                learning_rate: Some(0.01),
                ..TrainConfig::default()
            },
        )
        .unwrap();
        (ds, model)
    }

    fn quick() -> (BenchmarkConfig, XaiConfig, MetricConfig) {
        let xai = XaiConfig {
            sg_samples: 4,
            ng_samples: 3,
            fg_param_samples: 2,
            fg_input_samples: 2,
            ig_steps: 8,
            ..XaiConfig::default()
        };
        let metrics = MetricConfig {
            robust_samples: 3,
            fc_runs: 8,
            fc_subset: 10,
            road_percentages: vec![0.05, 0.1, 0.2, 0.3],
            road_draws: 4,
            ..MetricConfig::default()
        };
        let bench = BenchmarkConfig {
            samples: 6,
            tolerance_years: 8,
            ..BenchmarkConfig::default()
        };
        (bench, xai, metrics)
    }

    #[test]
    fn benchmark_is_deterministic_and_consistent() {
        let (ds, model) = small();
        let (bench, xai, mc) = quick();
        let methods = [Method::Gradient, Method::InputGradient, Method::LrpZ, Method::SmoothGrad];
        let a = run_benchmark(&model, &ds, &methods, &bench, &xai, &mc, 3).unwrap();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = serial.install(|| run_benchmark(&model, &ds, &methods, &bench, &xai, &mc, 3).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.reports.len(), 5);
        assert_eq!(a.evaluation.methods.last(), Some(&BASELINE));
        for s in &a.evaluation.scores {
            let n = if s.metric == MetricId::Road { mc.road_draws } else { bench.samples };
            assert_eq!(s.normalized.len(), n);
        }
        for k in 0..bench.samples {
            for metric in bench.metrics.iter().filter(|&&m| m != MetricId::Road) {
                let col: Vec<f64> = a.evaluation.methods.iter().map(|&m| a.evaluation.score(*metric, m).unwrap().normalized[k]).collect();
                let best = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!(best == 1.0 || col.iter().all(|&v| v == 0.0), "{metric}: {col:?}");
            }
        }
        // the input-times-gradient identity of a bias-free ReLU net carries into every report
        for r in &a.reports {
            assert_eq!(r.rank_of(Method::InputGradient), r.rank_of(Method::LrpZ), "{}", r.metric);
        }
        for r in &a.reports {
            let mut by_mean = r.methods.clone();
            by_mean.sort_by(|x, y| y.mean.total_cmp(&x.mean));
            assert!(by_mean.windows(2).all(|w| w[0].rank <= w[1].rank));
        }
    }

    #[test]
    fn shortfall_is_reported() {
        let (ds, model) = small();
        let (mut bench, _, _) = quick();
        bench.samples = 10_000;
        match select_samples(&model, &ds, &bench, 0) {
            Err(Error::InsufficientSamples { needed, found }) => assert!(needed == 10_000 && found < needed),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn ranks_are_dense_and_follow_means(
            v in prop::collection::vec((0.0f64..1.0, 0.0f64..0.05), 1..12),
        ) {
            let s: Vec<Aggregate> = v.iter().map(|&(m, e)| agg(m, e)).collect();
            let r = rank_methods(&s, true);
            let max = *r.iter().max().unwrap();
            for k in 1..=max {
                prop_assert!(r.contains(&k));
            }
            for i in 0..s.len() {
                for j in 0..s.len() {
                    if s[i].mean > s[j].mean {
                        prop_assert!(r[i] <= r[j]);
                    }
                }
            }
        }
    }
}
