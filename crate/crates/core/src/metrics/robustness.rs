use rand_distr::{Distribution, Normal};

use super::{explain_prepared, Attribution, MetricConfig, TaskSeeds};
use crate::error::{Error, Result};
use crate::models::Network;
use crate::rng::{self, stream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessScores {
    pub avg_sensitivity: f64,
    pub local_lipschitz: f64,
}

fn distance(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Both robustness scores from one shared set of perturbations.
///
/// Draw `k` perturbs `x` by `δ ~ N(0, σ)` and re-explains with a seed derived
/// from `(seeds.explain, k)`, so stochastic explainers make fresh draws each time.
pub fn robustness_scores(
    net: &Network,
    attribution: &impl Attribution,
    x: &Tensor,
    class: usize,
    cfg: &MetricConfig,
    seeds: impl Into<TaskSeeds>,
) -> Result<RobustnessScores> {
    let seeds = seeds.into();
    let x_norm = x.norm();
    if x_norm == 0.0 {
        return Err(Error::metric("avg_sensitivity", "input has zero norm"));
    }
    if cfg.robust_samples == 0 {
        return Err(Error::metric("local_lipschitz", "needs at least one perturbed sample"));
    }
    let noise = Normal::new(0.0, cfg.robust_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let phi = explain_prepared(attribution, net, x, class, seeds.explain, cfg)?;
    let (mut sum, mut max) = (0.0, 0.0f64);
    for k in 0..cfg.robust_samples {
        let mut r = rng::rng_for(seeds.noise, &[stream::METRIC, rng::tag("robustness"), k as u64]);
        let (xp, delta) = loop {
            let xp = x.map(|v| v + noise.sample(&mut r));
            let d = distance(&xp, x);
            if d > 0.0 {
                break (xp, d);
            }
        };
        let reseed = rng::derive_seed(seeds.explain, &[k as u64 + 1]);
        let phi_p = explain_prepared(attribution, net, &xp, class, reseed, cfg)?;
        let diff = distance(&phi, &phi_p);
        sum += diff / x_norm;
        max = max.max(diff / delta);
    }
    Ok(RobustnessScores {
        avg_sensitivity: sum / cfg.robust_samples as f64,
        local_lipschitz: max,
    })
}

/// Mean of `‖Φ(x) − Φ(x + δ)‖ / ‖x‖` over the perturbations.
pub fn avg_sensitivity(
    net: &Network,
    attribution: &impl Attribution,
    x: &Tensor,
    class: usize,
    cfg: &MetricConfig,
    seeds: impl Into<TaskSeeds>,
) -> Result<f64> {
    Ok(robustness_scores(net, attribution, x, class, cfg, seeds)?.avg_sensitivity)
}

/// Max of `‖Φ(x) − Φ(x + δ)‖ / ‖δ‖` over the perturbations.
pub fn local_lipschitz(
    net: &Network,
    attribution: &impl Attribution,
    x: &Tensor,
    class: usize,
    cfg: &MetricConfig,
    seeds: impl Into<TaskSeeds>,
) -> Result<f64> {
    Ok(robustness_scores(net, attribution, x, class, cfg, seeds)?.local_lipschitz)
}
