//! Attribution methods: maps from `(network, input, class)` to a relevance map
//! shaped like the input.
//!
//! All methods explain the pre-softmax logit of the target class. Stochastic
//! methods take an explicit seed and derive one generator per draw from it, so
//! a map depends only on its inputs and the seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};
use crate::layers::{Layer, LrpRule};
use crate::models::Network;
use crate::rng::{self, stream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gradient,
    InputGradient,
    IntegratedGradients,
    LrpZ,
    LrpAlphaBeta,
    LrpComposite,
    #[serde(rename = "smoothgrad")]
    SmoothGrad,
    #[serde(rename = "noisegrad")]
    NoiseGrad,
    #[serde(rename = "fusiongrad")]
    FusionGrad,
    /// Uniform-random maps used as the sanity baseline.
    Random,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Gradient,
        Method::InputGradient,
        Method::IntegratedGradients,
        Method::LrpZ,
        Method::LrpAlphaBeta,
        Method::LrpComposite,
        Method::SmoothGrad,
        Method::NoiseGrad,
        Method::FusionGrad,
        Method::Random,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::InputGradient => "input_gradient",
            Method::IntegratedGradients => "integrated_gradients",
            Method::LrpZ => "lrp_z",
            Method::LrpAlphaBeta => "lrp_alpha_beta",
            Method::LrpComposite => "lrp_composite",
            Method::SmoothGrad => "smoothgrad",
            Method::NoiseGrad => "noisegrad",
            Method::FusionGrad => "fusiongrad",
            Method::Random => "random",
        }
    }

    /// Methods compared on an architecture by default (the baseline is added separately).
    pub fn defaults_for(arch: crate::models::Arch) -> Vec<Method> {
        let mut m = vec![
            Method::Gradient,
            Method::InputGradient,
            Method::IntegratedGradients,
            Method::LrpZ,
            Method::LrpAlphaBeta,
            Method::SmoothGrad,
            Method::NoiseGrad,
            Method::FusionGrad,
        ];
        if arch == crate::models::Arch::Cnn {
            m.insert(5, Method::LrpComposite);
        }
        m
    }

    /// Methods whose maps multiply gradients (or relevance) by the input.
    pub fn is_input_contribution(self) -> bool {
        matches!(self, Method::InputGradient | Method::IntegratedGradients | Method::LrpZ)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::SmoothGrad | Method::NoiseGrad | Method::FusionGrad | Method::Random)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XaiConfig {
    pub sg_samples: usize,
    /// SmoothGrad noise std as a fraction of the dataset value range.
    pub sg_sigma_scale: f64,
    pub ng_samples: usize,
    /// Std of the multiplicative weight noise around 1.
    pub ng_sigma: f64,
    /// Also perturb biases in NoiseGrad and FusionGrad.
    pub ng_perturb_bias: bool,
    pub fg_param_samples: usize,
    pub fg_input_samples: usize,
    pub fg_sg_sigma_scale: f64,
    pub fg_ng_sigma: f64,
    pub ig_steps: usize,
    /// Constant value of the integrated-gradients baseline map.
    pub ig_baseline: f64,
    pub lrp_alpha: f64,
    pub lrp_beta: f64,
    pub lrp_epsilon: f64,
    pub lrp_gamma: f64,
    /// Explanation averaged by SmoothGrad, NoiseGrad and FusionGrad.
    pub base_method: Method,
}

impl Default for XaiConfig {
    fn default() -> Self {
        Self {
            sg_samples: 150,
            sg_sigma_scale: 0.5,
            ng_samples: 20,
            ng_sigma: 0.25,
            ng_perturb_bias: false,
            fg_param_samples: 20,
            fg_input_samples: 20,
            fg_sg_sigma_scale: 0.25,
            fg_ng_sigma: 0.125,
            ig_steps: 64,
            ig_baseline: 0.0,
            lrp_alpha: 1.0,
            lrp_beta: 0.0,
            lrp_epsilon: 1e-6,
            lrp_gamma: 0.25,
            base_method: Method::Gradient,
        }
    }
}

impl XaiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_method.is_stochastic() {
            return Err(Error::Config(format!(
                "base_method must be deterministic, got `{}`",
                self.base_method
            )));
        }
        if self.ig_steps == 0 {
            return Err(Error::Config("ig_steps must be at least 1".into()));
        }
        for (name, v) in [
            ("sg_sigma_scale", self.sg_sigma_scale),
            ("ng_sigma", self.ng_sigma),
            ("fg_sg_sigma_scale", self.fg_sg_sigma_scale),
            ("fg_ng_sigma", self.fg_ng_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        LrpRule::AlphaBeta {
            alpha: self.lrp_alpha,
            beta: self.lrp_beta,
        }
        .validate()
    }
}

/// A relevance map together with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: Method,
    pub target_class: usize,
    pub relevance: Tensor,
    pub normalized: bool,
}

/// Which LRP variant to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrpVariant {
    Z,
    AlphaBeta { alpha: f64, beta: f64 },
    /// Bounded-input rule on the first weighted layer, `gamma` on later
    /// convolutions and `epsilon` on dense layers.
    Composite { epsilon: f64, gamma: f64, low: f64, high: f64 },
}

fn check_class(net: &Network, class: usize) -> Result<()> {
    let n = net.classes();
    if class >= n {
        return Err(Error::Config(format!("class {class} out of range 0..{n}")));
    }
    Ok(())
}

pub fn gradient(net: &Network, x: &Tensor, class: usize) -> Result<Tensor> {
    net.logit_gradient(x, class)
}

pub fn input_gradient(net: &Network, x: &Tensor, class: usize) -> Result<Tensor> {
    gradient(net, x, class)?.mul(x)
}

/// Midpoint Riemann sum of the gradient along the straight path from `baseline` to `x`.
pub fn integrated_gradients(net: &Network, x: &Tensor, class: usize, baseline: &Tensor, steps: usize) -> Result<Tensor> {
    if steps == 0 {
        return Err(Error::Config("integrated gradients needs at least one step".into()));
    }
    baseline.ensure_shape(x.shape(), "integrated_gradients baseline")?;
    let diff = x.sub(baseline)?;
    let mut acc = Tensor::zeros(x.shape());
    for k in 0..steps {
        let a = (k as f64 + 0.5) / steps as f64;
        let point = baseline.zip_map(&diff, |b, d| b + a * d)?;
        acc.add_assign(&gradient(net, &point, class)?)?;
    }
    diff.mul(&acc.scale(1.0 / steps as f64))
}

pub fn lrp(net: &Network, x: &Tensor, class: usize, variant: LrpVariant) -> Result<Tensor> {
    let first = net.param_layer_indices().first().copied();
    net.lrp(x, class, |i, layer| match variant {
        LrpVariant::Z => LrpRule::Z,
        LrpVariant::AlphaBeta { alpha, beta } => LrpRule::AlphaBeta { alpha, beta },
        LrpVariant::Composite { epsilon, gamma, low, high } => {
            if Some(i) == first {
                LrpRule::ZBox { low, high }
            } else if matches!(layer, Layer::Conv2d(_)) {
                LrpRule::Gamma { gamma }
            } else {
                LrpRule::Epsilon { epsilon }
            }
        }
    })
}

/// Deterministic base explanation used inside the averaging methods.
fn base_map(base: Method, net: &Network, x: &Tensor, class: usize, ctx: &Explainer) -> Result<Tensor> {
    match base {
        Method::Gradient => gradient(net, x, class),
        Method::InputGradient => input_gradient(net, x, class),
        Method::IntegratedGradients => {
            let baseline = Tensor::full(x.shape(), ctx.cfg.ig_baseline);
            integrated_gradients(net, x, class, &baseline, ctx.cfg.ig_steps)
        }
        Method::LrpZ => lrp(net, x, class, LrpVariant::Z),
        Method::LrpAlphaBeta => lrp(net, x, class, ctx.alpha_beta()),
        Method::LrpComposite => lrp(net, x, class, ctx.composite()),
        other => Err(Error::Config(format!("`{other}` cannot serve as a base method"))),
    }
}

/// `x + g` with `g ~ N(0, sigma)` drawn from its own generator.
fn noisy_input(x: &Tensor, sigma: f64, rng: &mut impl Rng) -> Tensor {
    x.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
}

/// Copy of `net` with every weight (and optionally bias) scaled by `η ~ N(1, sigma)`.
pub fn perturb_parameters(net: &Network, sigma: f64, include_bias: bool, rng: &mut impl Rng) -> Network {
    let mut out = net.clone();
    for layer in out.layers.iter_mut() {
        if let Some(w) = layer.weight_mut() {
            w.data_mut().iter_mut().for_each(|v| *v *= 1.0 + sigma * rng.sample::<f64, _>(StandardNormal));
        }
        if include_bias {
            if let Some(b) = layer.bias_mut() {
                b.data_mut().iter_mut().for_each(|v| *v *= 1.0 + sigma * rng.sample::<f64, _>(StandardNormal));
            }
        }
    }
    out
}

const INPUT_NOISE: u64 = 1;
const PARAM_NOISE: u64 = 2;

fn mean_of(maps: impl Iterator<Item = Result<Tensor>>, shape: &[usize]) -> Result<Tensor> {
    let mut acc = Tensor::zeros(shape);
    let mut n = 0usize;
    for m in maps {
        acc.add_assign(&m?)?;
        n += 1;
    }
    Ok(acc.scale(1.0 / n as f64))
}

/// Mean of the base map over `x` and `samples` noisy copies of it.
///
/// With `sigma == 0` every copy equals `x`, so the base map is returned as is.
pub fn smoothgrad(net: &Network, x: &Tensor, class: usize, samples: usize, sigma: f64, seed: u64, ctx: &Explainer) -> Result<Tensor> {
    let base = ctx.cfg.base_method;
    let samples = if sigma == 0.0 { 0 } else { samples };
    let maps = (0..=samples).map(|i| {
        if i == 0 {
            base_map(base, net, x, class, ctx)
        } else {
            let mut r = rng::rng_for(seed, &[stream::EXPLAIN, INPUT_NOISE, i as u64]);
            base_map(base, net, &noisy_input(x, sigma, &mut r), class, ctx)
        }
    });
    mean_of(maps, x.shape())
}

/// Mean of the base map over the network and `samples` weight-perturbed copies of it.
pub fn noisegrad(net: &Network, x: &Tensor, class: usize, samples: usize, sigma: f64, seed: u64, ctx: &Explainer) -> Result<Tensor> {
    fusiongrad(net, x, class, samples, 0, sigma, 0.0, seed, ctx)
}

/// Mean of the base map over every pair of (perturbed network, noisy input),
/// index 0 on either axis being the unperturbed one.
#[allow(clippy::too_many_arguments)]
pub fn fusiongrad(
    net: &Network,
    x: &Tensor,
    class: usize,
    param_samples: usize,
    input_samples: usize,
    param_sigma: f64,
    input_sigma: f64,
    seed: u64,
    ctx: &Explainer,
) -> Result<Tensor> {
    let base = ctx.cfg.base_method;
    // An axis with zero noise repeats one constituent; averaging over it is a no-op.
    let param_samples = if param_sigma == 0.0 { 0 } else { param_samples };
    let input_samples = if input_sigma == 0.0 { 0 } else { input_samples };
    let inputs: Vec<Tensor> = (0..=input_samples)
        .map(|j| {
            if j == 0 {
                x.clone()
            } else {
                let mut r = rng::rng_for(seed, &[stream::EXPLAIN, INPUT_NOISE, j as u64]);
                noisy_input(x, input_sigma, &mut r)
            }
        })
        .collect();
    let mut acc = Tensor::zeros(x.shape());
    for i in 0..=param_samples {
        let perturbed;
        let f = if i == 0 {
            net
        } else {
            let mut r = rng::rng_for(seed, &[stream::EXPLAIN, PARAM_NOISE, i as u64]);
            perturbed = perturb_parameters(net, param_sigma, ctx.cfg.ng_perturb_bias, &mut r);
            &perturbed
        };
        for xj in &inputs {
            acc.add_assign(&base_map(base, f, xj, class, ctx)?)?;
        }
    }
    Ok(acc.scale(1.0 / ((param_samples + 1) * (input_samples + 1)) as f64))
}

/// A uniform `U(0, 1)` map.
pub fn random_map(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng::rng_for(seed, &[stream::BASELINE]);
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random::<f64>()).collect()).expect("positive shape")
}

/// Scales positive entries by the largest value and negative entries by the
/// magnitude of the smallest, leaving signs and zeros in place.
pub fn minmax_normalize(e: &Explanation) -> Explanation {
    let data = e.relevance.data();
    let max = data.iter().copied().fold(0.0f64, f64::max);
    let min = data.iter().copied().fold(0.0f64, f64::min);
    let relevance = e.relevance.map(|v| {
        if v > 0.0 {
            v / max
        } else if v < 0.0 {
            v / -min
        } else {
            0.0
        }
    });
    Explanation {
        relevance,
        normalized: true,
        ..e.clone()
    }
}

/// Explains with one configured method. `value_range` is the dataset's
/// `(x_min, x_max)`, used for noise scales and the bounded-input LRP rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Explainer {
    pub method: Method,
    pub cfg: XaiConfig,
    pub value_range: (f64, f64),
}

impl Explainer {
    pub fn new(method: Method, cfg: XaiConfig, value_range: (f64, f64)) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            method,
            cfg,
            value_range,
        })
    }

    fn range(&self) -> f64 {
        self.value_range.1 - self.value_range.0
    }

    fn alpha_beta(&self) -> LrpVariant {
        LrpVariant::AlphaBeta {
            alpha: self.cfg.lrp_alpha,
            beta: self.cfg.lrp_beta,
        }
    }

    fn composite(&self) -> LrpVariant {
        LrpVariant::Composite {
            epsilon: self.cfg.lrp_epsilon,
            gamma: self.cfg.lrp_gamma,
            low: self.value_range.0,
            high: self.value_range.1,
        }
    }

    /// Raw relevance for `class`. `seed` keys every random draw the method makes.
    pub fn relevance(&self, net: &Network, x: &Tensor, class: usize, seed: u64) -> Result<Tensor> {
        check_class(net, class)?;
        let c = &self.cfg;
        match self.method {
            Method::SmoothGrad => smoothgrad(net, x, class, c.sg_samples, c.sg_sigma_scale * self.range(), seed, self),
            Method::NoiseGrad => noisegrad(net, x, class, c.ng_samples, c.ng_sigma, seed, self),
            Method::FusionGrad => fusiongrad(
                net,
                x,
                class,
                c.fg_param_samples,
                c.fg_input_samples,
                c.fg_ng_sigma,
                c.fg_sg_sigma_scale * self.range(),
                seed,
                self,
            ),
            Method::Random => Ok(random_map(x.shape(), seed)),
            base => base_map(base, net, x, class, self),
        }
    }

    pub fn explain(&self, net: &Network, x: &Tensor, class: usize, seed: u64) -> Result<Explanation> {
        Ok(Explanation {
            method: self.method,
            target_class: class,
            relevance: self.relevance(net, x, class, seed)?,
            normalized: false,
        })
    }

    /// Relevance after min-max normalization.
    pub fn normalized(&self, net: &Network, x: &Tensor, class: usize, seed: u64) -> Result<Tensor> {
        Ok(minmax_normalize(&self.explain(net, x, class, seed)?).relevance)
    }
}

/// The seed for explaining sample `sample` with `method` under `master`.
pub fn explanation_seed(master: u64, method: Method, sample: usize) -> u64 {
    rng::derive_seed(master, &[stream::EXPLAIN, rng::tag(method.id()), sample as u64])
}

const BATCH_MAGIC: &[u8; 8] = b"XAIBEXPL";
const BATCH_VERSION: u32 = 1;

/// Explanations of one method for a list of samples, as exchanged between pipeline stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationBatch {
    pub method: Method,
    pub sample_ids: Vec<usize>,
    pub target_classes: Vec<usize>,
    /// `(n, v, h)`, raw (unnormalized) relevance.
    pub maps: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSidecar {
    pub format_version: u32,
    pub method: Method,
    pub hyperparameters: XaiConfig,
    pub seed: u64,
    pub sample_ids: Vec<usize>,
    pub target_classes: Vec<usize>,
    pub config_hash: String,
}

pub fn batch_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

impl ExplanationBatch {
    pub fn map(&self, k: usize) -> Tensor {
        let s = self.maps.shape();
        let d = s[1] * s[2];
        Tensor::new(vec![s[1], s[2]], self.maps.data()[k * d..(k + 1) * d].to_vec()).expect("slice shape")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_header(BATCH_MAGIC, BATCH_VERSION);
        let s = self.maps.shape();
        for dim in s {
            w.u32(*dim as u32);
        }
        for (&id, &c) in self.sample_ids.iter().zip(&self.target_classes) {
            w.u32(id as u32);
            w.u32(c as u32);
        }
        w.f64s(self.maps.data());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8], method: Method, path: &Path) -> Result<Self> {
        let mut r = ByteReader::with_header(bytes, BATCH_MAGIC, BATCH_VERSION, path)?;
        let shape: Vec<usize> = (0..3).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
        let n = shape[0];
        let mut sample_ids = Vec::with_capacity(n);
        let mut target_classes = Vec::with_capacity(n);
        for _ in 0..n {
            sample_ids.push(r.u32()? as usize);
            target_classes.push(r.u32()? as usize);
        }
        let maps = Tensor::new(shape.clone(), r.f64s(shape.iter().product())?)?;
        r.finish()?;
        Ok(Self {
            method,
            sample_ids,
            target_classes,
            maps,
        })
    }

    pub fn write(&self, path: &Path, hyperparameters: &XaiConfig, seed: u64, config_hash: &str) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())?;
        let sidecar = BatchSidecar {
            format_version: BATCH_VERSION,
            method: self.method,
            hyperparameters: hyperparameters.clone(),
            seed,
            sample_ids: self.sample_ids.clone(),
            target_classes: self.target_classes.clone(),
            config_hash: config_hash.to_string(),
        };
        crate::io::write_json(&batch_sidecar_path(path), &sidecar)
    }

    pub fn read(path: &Path) -> Result<(Self, BatchSidecar)> {
        let sidecar: BatchSidecar = crate::io::read_json(&batch_sidecar_path(path))?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let batch = Self::from_bytes(&bytes, sidecar.method, path)?;
        if batch.sample_ids != sidecar.sample_ids || batch.target_classes != sidecar.target_classes {
            return Err(Error::artifact(path, "sample table disagrees with the sidecar"));
        }
        Ok((batch, sidecar))
    }
}
