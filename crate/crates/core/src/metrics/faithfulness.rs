use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::similarity::pearson;
use super::{FcBaseline, MetricConfig};
use crate::error::{Error, Result};
use crate::models::Network;
use crate::rng::{self, stream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcScore {
    pub value: f64,
    /// Set when one of the correlated series had zero variance; `value` is then 0.
    pub degenerate: bool,
}

/// Correlation, over random pixel subsets `S`, between `Σ_{i∈S} Φ_i` and the
/// drop of the class logit when `x_S` is replaced by the baseline.
pub fn faithfulness_correlation(
    net: &Network,
    phi: &Tensor,
    x: &Tensor,
    class: usize,
    cfg: &MetricConfig,
    seed: u64,
) -> Result<FcScore> {
    phi.ensure_shape(x.shape(), "faithfulness_correlation map")?;
    let d = x.len();
    if cfg.fc_subset > d {
        return Err(Error::metric(
            "faithfulness_correlation",
            format!("subset size {} exceeds {d} pixels", cfg.fc_subset),
        ));
    }
    let base = net.logits(x)?.data()[class];
    let mut attributed = Vec::with_capacity(cfg.fc_runs);
    let mut dropped = Vec::with_capacity(cfg.fc_runs);
    for run in 0..cfg.fc_runs {
        let mut r = rng::rng_for(seed, &[stream::METRIC, rng::tag("fc"), run as u64]);
        let subset = index::sample(&mut r, d, cfg.fc_subset);
        let mut xs = x.clone();
        let mut sum = 0.0;
        for i in subset.iter() {
            sum += phi.data()[i];
            xs.data_mut()[i] = match cfg.fc_baseline {
                FcBaseline::Uniform => r.random::<f64>(),
                FcBaseline::Constant(v) => v,
            };
        }
        attributed.push(sum);
        dropped.push(base - net.logits(&xs)?.data()[class]);
    }
    Ok(match pearson(&attributed, &dropped) {
        Some(value) => FcScore {
            value,
            degenerate: false,
        },
        None => FcScore {
            value: 0.0,
            degenerate: true,
        },
    })
}

pub(super) fn check_percentages(p: &[f64]) -> Result<()> {
    if p.len() < 2 {
        return Err(Error::Config("road needs at least two percentages".into()));
    }
    if p.iter().any(|&v| !(v >= 0.0 && v <= 1.0)) {
        return Err(Error::Config("road percentages must lie in [0, 1] (0% to 100%)".into()));
    }
    if p.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("road percentages must be strictly increasing".into()));
    }
    Ok(())
}

/// Fills masked pixels of a row-major `(rows, cols)` map from their unmasked
/// 4-neighbours, ring by ring, adding `N(0, sigma)` to each imputed value.
/// Pixels with no reachable neighbour are set to 0.
pub fn impute_noisy_linear(x: &Tensor, mask: &[bool], sigma: f64, rng: &mut impl Rng) -> Result<Tensor> {
    let shape = x.shape();
    if shape.len() != 2 || mask.len() != x.len() {
        return Err(Error::ShapeMismatch {
            context: "impute_noisy_linear",
            expected: vec![mask.len()],
            actual: shape.to_vec(),
        });
    }
    let (rows, cols) = (shape[0], shape[1]);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = x.data().to_vec();
    let mut known: Vec<bool> = mask.iter().map(|m| !m).collect();
    let mut pending: Vec<usize> = (0..out.len()).filter(|&i| mask[i]).collect();
    while !pending.is_empty() {
        let mut filled = Vec::new();
        let mut rest = Vec::new();
        for &i in &pending {
            let (r, c) = (i / cols, i % cols);
            let mut sum = 0.0;
            let mut n = 0usize;
            let mut visit = |j: usize| {
                if known[j] {
                    sum += out[j];
                    n += 1;
                }
            };
            if r > 0 {
                visit(i - cols);
            }
            if r + 1 < rows {
                visit(i + cols);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
            if n > 0 {
                filled.push((i, sum / n as f64));
            } else {
                rest.push(i);
            }
        }
        if filled.is_empty() {
            for i in rest {
                out[i] = 0.0;
            }
            break;
        }
        for (i, v) in filled {
            out[i] = v + noise.sample(rng);
            known[i] = true;
        }
        pending = rest;
    }
    Tensor::new(shape.to_vec(), out)
}

/// Indices sorted by descending relevance, ties by index.
fn by_relevance(phi: &Tensor) -> Vec<usize> {
    let p = phi.data();
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&i, &j| p[j].total_cmp(&p[i]).then(i.cmp(&j)));
    idx
}

/// For each fraction `p`, whether the prediction on `x` survives imputing the
/// `round(p·d)` most relevant pixels (1.0) or changes (0.0).
pub fn road_curve(net: &Network, phi: &Tensor, x: &Tensor, cfg: &MetricConfig, seed: u64) -> Result<Vec<f64>> {
    check_percentages(&cfg.road_percentages)?;
    phi.ensure_shape(x.shape(), "road map")?;
    let reference = net.predict_class(x)?;
    let order = by_relevance(phi);
    let d = x.len();
    let mut curve = Vec::with_capacity(cfg.road_percentages.len());
    for (step, &p) in cfg.road_percentages.iter().enumerate() {
        let k = ((p * d as f64).round() as usize).min(d);
        let mut mask = vec![false; d];
        for &i in &order[..k] {
            mask[i] = true;
        }
        let mut r = rng::rng_for(seed, &[stream::METRIC, rng::tag("road"), step as u64]);
        let xp = impute_noisy_linear(x, &mask, cfg.road_noise_sigma, &mut r)?;
        curve.push(if net.predict_class(&xp)? == reference { 1.0 } else { 0.0 });
    }
    Ok(curve)
}

pub fn trapezoid_auc(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "trapezoid: length mismatch");
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0).sum()
}

/// Area under one sample's ROAD curve.
pub fn road_auc(net: &Network, phi: &Tensor, x: &Tensor, cfg: &MetricConfig, seed: u64) -> Result<f64> {
    Ok(trapezoid_auc(&cfg.road_percentages, &road_curve(net, phi, x, cfg, seed)?))
}

/// Area under the ROAD curve averaged over samples; equals the mean per-sample area.
pub fn road(net: &Network, inputs: &[Tensor], maps: &[Tensor], cfg: &MetricConfig, seed: u64) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != maps.len() {
        return Err(Error::metric("road", "needs one map per input and at least one input"));
    }
    let mut mean_curve = vec![0.0; cfg.road_percentages.len()];
    for (n, (x, phi)) in inputs.iter().zip(maps).enumerate() {
        let curve = road_curve(net, phi, x, cfg, rng::derive_seed(seed, &[n as u64]))?;
        for (m, c) in mean_curve.iter_mut().zip(curve) {
            *m += c / inputs.len() as f64;
        }
    }
    Ok(trapezoid_auc(&cfg.road_percentages, &mean_curve))
}
