use rand::seq::index;
use rand_distr::{Distribution, Normal};

use super::{explain_prepared, Attribution, LayerOrder, MetricConfig, TaskSeeds, WeightPerturbation};
use crate::error::{Error, Result};
use crate::models::Network;
use crate::rng::{self, stream};
use crate::tensor::Tensor;

/// Per-layer (or per-class) similarities and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizationScore {
    pub items: Vec<f64>,
    pub mean: f64,
}

impl RandomizationScore {
    pub fn from_items(items: Vec<f64>) -> Self {
        let mean = items.iter().sum::<f64>() / items.len().max(1) as f64;
        Self { items, mean }
    }
}

/// Copy of `net` with only layer `layer` disturbed.
fn perturb_layer(net: &Network, layer: usize, cfg: &MetricConfig, seed: u64) -> Result<Network> {
    let noise = Normal::new(0.0, cfg.mpt_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut r = rng::rng_for(seed, &[stream::METRIC, rng::tag("mpt"), layer as u64]);
    Ok(net.map_weights(|i, w| {
        if i == layer {
            for v in w.data_mut() {
                let eps = noise.sample(&mut r);
                match cfg.mpt_perturbation {
                    WeightPerturbation::Multiplicative => *v *= 1.0 + eps,
                    WeightPerturbation::Additive => *v += eps,
                }
            }
        }
    }))
}

/// Mean similarity between the explanation of the original network and of
/// networks with one weighted layer disturbed at a time.
///
/// Every re-explanation reuses `seeds.explain`, so only the model changes.
pub fn model_parameter_test(
    net: &Network,
    attribution: &impl Attribution,
    x: &Tensor,
    class: usize,
    cfg: &MetricConfig,
    seeds: impl Into<TaskSeeds>,
) -> Result<RandomizationScore> {
    let seeds = seeds.into();
    let mut layers = net.param_layer_indices();
    if layers.is_empty() {
        return Err(Error::metric("model_parameter_test", "network has no weighted layers"));
    }
    if cfg.mpt_order == LayerOrder::TopDown {
        layers.reverse();
    }
    let phi = explain_prepared(attribution, net, x, class, seeds.explain, cfg)?;
    let items = layers
        .into_iter()
        .map(|l| {
            let f = perturb_layer(net, l, cfg, seeds.noise)?;
            let phi_l = explain_prepared(attribution, &f, x, class, seeds.explain, cfg)?;
            Ok(cfg.mpt_similarity.eval(phi.data(), phi_l.data()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomizationScore::from_items(items))
}

/// Mean similarity between the explanation of `class` and explanations of
/// other classes (all of them, or `rl_classes` drawn without replacement).
pub fn random_logit(
    net: &Network,
    attribution: &impl Attribution,
    x: &Tensor,
    class: usize,
    cfg: &MetricConfig,
    seeds: impl Into<TaskSeeds>,
) -> Result<RandomizationScore> {
    let seeds = seeds.into();
    let n = net.classes();
    if n < 2 {
        return Err(Error::metric("random_logit", "needs at least two classes"));
    }
    let others: Vec<usize> = (0..n).filter(|&k| k != class).collect();
    let chosen: Vec<usize> = match cfg.rl_classes {
        Some(k) if k < others.len() => {
            let mut r = rng::rng_for(seeds.noise, &[stream::METRIC, rng::tag("random_logit")]);
            let mut pick: Vec<usize> = index::sample(&mut r, others.len(), k.max(1)).into_iter().map(|i| others[i]).collect();
            pick.sort_unstable();
            pick
        }
        _ => others,
    };
    let phi = explain_prepared(attribution, net, x, class, seeds.explain, cfg)?;
    let items = chosen
        .into_iter()
        .map(|k| {
            let phi_k = explain_prepared(attribution, net, x, k, seeds.explain, cfg)?;
            Ok(cfg.rl_similarity.eval(phi.data(), phi_k.data()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomizationScore::from_items(items))
}
