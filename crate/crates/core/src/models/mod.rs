//! The two classifier architectures, their training loop, and the
//! probability-weighted year regression used to score them.

mod checkpoint;
mod network;

pub use checkpoint::ModelSidecar;
pub use network::{Arch, Network};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Split};
use crate::error::{Error, Result};
use crate::layers::{Conv2d, Dense, Layer, MaxPool2d};
use crate::rng::{self, stream};
use crate::tensor::Tensor;

/// Which weighted layers carry a bias term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    None,
    /// Only the logit layer; everything below stays positively homogeneous.
    Output,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub arch: Arch,
    /// Hidden ReLU widths of the MLP.
    pub hidden: Vec<usize>,
    /// L2 coefficient of the MLP's hidden layers.
    pub hidden_l2: f64,
    pub conv_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
    /// Width of the CNN's regularized dense layer.
    pub dense_width: usize,
    /// L2 coefficient of the CNN's dense layer.
    pub l2: f64,
    pub bias: BiasMode,
    pub classes: usize,
    /// `(v, h)`
    pub input_shape: (usize, usize),
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            arch: Arch::Mlp,
            hidden: vec![64, 64],
            hidden_l2: 0.1,
            conv_channels: 8,
            kernel: 6,
            stride: 2,
            pool: 2,
            dense_width: 64,
            l2: 1e-4,
            bias: BiasMode::Output,
            classes: 20,
            input_shape: (36, 24),
        }
    }
}

impl ModelSpec {
    pub fn for_dataset(arch: Arch, dataset: &Dataset) -> Self {
        Self {
            arch,
            classes: dataset.config.classes,
            input_shape: dataset.config.grid,
            ..Self::default()
        }
    }


    /// Builds the layer stack with seeded uniform fan-in initialization.
    pub fn build(&self, seed: u64) -> Result<Network> {
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        let (v, h) = self.input_shape;
        let map_shape = vec![v, h];
        let mut rng = rng::rng_for(seed, &[stream::INIT]);
        let hidden_bias = self.bias == BiasMode::All;
        let output_bias = self.bias != BiasMode::None;
        let mut init = |shape: Vec<usize>, fan_in: usize| -> Tensor {
            let limit = (6.0 / fan_in as f64).sqrt();
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
            Tensor::new(shape, data).expect("init shape")
        };
        let bias_of = |n: usize, on: bool| on.then(|| Tensor::zeros(&[n]));
        let mut layers = Vec::new();
        let input_shape;
        match self.arch {
            Arch::Mlp => {
                input_shape = map_shape.clone();
                layers.push(Layer::Flatten);
                let mut width = v * h;
                for &next in &self.hidden {
                    let mut d = Dense::new(init(vec![next, width], width), bias_of(next, hidden_bias))?;
                    d.l2 = self.hidden_l2;
                    layers.push(Layer::Dense(d));
                    layers.push(Layer::Relu);
                    width = next;
                }
                layers.push(Layer::Dense(Dense::new(init(vec![self.classes, width], width), bias_of(self.classes, output_bias))?));
            }
            Arch::Cnn => {
                input_shape = vec![1, v, h];
                let k = self.kernel;
                let conv = Conv2d::new(
                    init(vec![self.conv_channels, 1, k, k], k * k),
                    bias_of(self.conv_channels, hidden_bias),
                    self.stride,
                )?;
                layers.push(Layer::Conv2d(conv));
                layers.push(Layer::Relu);
                layers.push(Layer::MaxPool2d(MaxPool2d {
                    window: self.pool,
                    stride: self.pool,
                }));
                layers.push(Layer::Flatten);
                let mut shape = input_shape.clone();
                for l in &layers {
                    shape = l.output_shape(&shape)?;
                }
                let flat = shape[0];
                let mut dense = Dense::new(init(vec![self.dense_width, flat], flat), bias_of(self.dense_width, hidden_bias))?;
                dense.l2 = self.l2;
                layers.push(Layer::Dense(dense));
                layers.push(Layer::Relu);
                layers.push(Layer::Dense(Dense::new(
                    init(vec![self.classes, self.dense_width], self.dense_width),
                    bias_of(self.classes, output_bias),
                )?));
            }
        }
        layers.push(Layer::Softmax);
        Network::new(self.arch, map_shape, input_shape, layers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// `None` uses [`default_learning_rate`] for the architecture.
    pub learning_rate: Option<f64>,
    pub momentum: f64,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: None,
            momentum: 0.9,
            patience: 10,
            seed: 0,
        }
    }
}

/// 0.01 for the MLP, 0.001 for the CNN.
pub fn default_learning_rate(arch: Arch) -> f64 {
    match arch {
        Arch::Mlp => 0.01,
        Arch::Cnn => 0.001,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub network: Network,
    pub train_log: Vec<EpochLog>,
}

fn cross_entropy(logits: &Tensor, label: usize) -> f64 {
    let l = logits.data();
    let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + l.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - l[label]
}

/// Mean loss and accuracy over `indices`.
fn loss_and_accuracy(net: &Network, dataset: &Dataset, indices: &[usize]) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut loss = 0.0;
    let mut hits = 0usize;
    for &i in indices {
        let logits = net.logits(&dataset.sample(i))?;
        loss += cross_entropy(&logits, dataset.class_label[i]);
        hits += usize::from(logits.argmax() == dataset.class_label[i]);
    }
    Ok((loss / indices.len() as f64, hits as f64 / indices.len() as f64))
}

/// Minibatch SGD with momentum on categorical cross-entropy, early-stopped on
/// validation loss. The returned network holds the best validation parameters.
pub fn train(spec: &ModelSpec, dataset: &Dataset, hyper: &TrainConfig) -> Result<TrainedModel> {
    if spec.input_shape != dataset.config.grid || spec.classes != dataset.config.classes {
        return Err(Error::Config(format!(
            "model spec ({:?}, {} classes) does not match dataset ({:?}, {} classes)",
            spec.input_shape, spec.classes, dataset.config.grid, dataset.config.classes
        )));
    }
    if hyper.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let lr = hyper.learning_rate.unwrap_or(default_learning_rate(spec.arch));
    let mut net = spec.build(hyper.seed)?;
    let train_idx = dataset.indices(Split::Train);
    let val_idx = dataset.indices(Split::Val);
    if hyper.epochs > 0 && train_idx.is_empty() {
        return Err(Error::Config("dataset has no training samples".into()));
    }

    let param_layers = net.param_layer_indices();
    let zeros_like = |net: &Network| -> Vec<(Tensor, Option<Tensor>)> {
        param_layers
            .iter()
            .map(|&i| {
                let l = &net.layers[i];
                (
                    Tensor::zeros(l.weight().unwrap().shape()),
                    l.bias().map(|b| Tensor::zeros(b.shape())),
                )
            })
            .collect()
    };
    let mut velocity = zeros_like(&net);
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, net.clone());
    let mut stale = 0usize;

    for epoch in 0..hyper.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng::rng_for(hyper.seed, &[stream::SHUFFLE, epoch as u64]));
        for batch in order.chunks(hyper.batch_size) {
            let mut grads = zeros_like(&net);
            for &s in batch {
                let acts = net.trace(&dataset.sample(s))?;
                let logits = acts.last().unwrap();
                let mut up = Layer::Softmax.forward(logits)?;
                up.data_mut()[dataset.class_label[s]] -= 1.0;
                let layers = net.logit_layers();
                let mut slot = grads.len();
                for (li, (layer, input)) in layers.iter().zip(&acts).enumerate().rev() {
                    if layer.has_params() {
                        slot -= 1;
                        debug_assert_eq!(param_layers[slot], li);
                        let g = layer.backward_params_data(input, &up)?;
                        grads[slot].0.add_assign(&g.weight)?;
                        if let (Some(acc), Some(gb)) = (grads[slot].1.as_mut(), g.bias.as_ref()) {
                            acc.add_assign(gb)?;
                        }
                    }
                    if li > 0 {
                        up = layer.backward_input(input, &up)?;
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for (slot, &li) in param_layers.iter().enumerate() {
                let layer = &mut net.layers[li];
                let l2 = layer.l2();
                let (gw, gb) = &grads[slot];
                let (vw, vb) = &mut velocity[slot];
                let w = layer.weight_mut().unwrap();
                for ((wi, vi), gi) in w.data_mut().iter_mut().zip(vw.data_mut()).zip(gw.data()) {
                    let g = gi * inv + 2.0 * l2 * *wi;
                    *vi = hyper.momentum * *vi - lr * g;
                    *wi += *vi;
                }
                if let (Some(b), Some(vb), Some(gb)) = (layer.bias_mut(), vb.as_mut(), gb.as_ref()) {
                    for ((bi, vi), gi) in b.data_mut().iter_mut().zip(vb.data_mut()).zip(gb.data()) {
                        *vi = hyper.momentum * *vi - lr * gi * inv;
                        *bi += *vi;
                    }
                }
            }
        }
        let (train_loss, train_accuracy) = loss_and_accuracy(&net, dataset, &train_idx)?;
        let (val_loss, val_accuracy) = loss_and_accuracy(&net, dataset, &val_idx)?;
        if !train_loss.is_finite() || !(val_idx.is_empty() || val_loss.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
        log::debug!("epoch {epoch}: train_loss={train_loss:.4} val_loss={val_loss:.4} val_acc={val_accuracy:.3}");
        log.push(EpochLog {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
        let monitored = if val_idx.is_empty() { train_loss } else { val_loss };
        if monitored < best.0 {
            best = (monitored, net.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience.max(1) {
                break;
            }
        }
    }
    let network = if hyper.epochs == 0 { net } else { best.1 };
    Ok(TrainedModel {
        spec: spec.clone(),
        network,
        train_log: log,
    })
}

/// Probability-weighted representative year, `Σ_i p_i · Ȳ_i`.
pub fn year_from_probabilities(probabilities: &[f64], central_years: &[f64]) -> f64 {
    probabilities.iter().zip(central_years).map(|(p, y)| p * y).sum()
}

pub fn predict_year(model: &TrainedModel, x: &Tensor, central_years: &[f64]) -> Result<f64> {
    let p = model.network.probabilities(x)?;
    Ok(year_from_probabilities(p.data(), central_years))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPerformance {
    pub samples: usize,
    pub accuracy: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub train: SplitPerformance,
    pub val: SplitPerformance,
    pub test: SplitPerformance,
}

pub fn evaluate_performance(model: &TrainedModel, dataset: &Dataset) -> Result<Performance> {
    let eval = |split: Split| -> Result<SplitPerformance> {
        let idx = dataset.indices(split);
        let mut hits = 0usize;
        let mut sq = 0.0;
        for &i in &idx {
            let p = model.network.probabilities(&dataset.sample(i))?;
            hits += usize::from(p.argmax() == dataset.class_label[i]);
            let err = year_from_probabilities(p.data(), &dataset.central_year) - dataset.year(i);
            sq += err * err;
        }
        let n = idx.len().max(1) as f64;
        Ok(SplitPerformance {
            samples: idx.len(),
            accuracy: hits as f64 / n,
            rmse: (sq / n).sqrt(),
        })
    };
    Ok(Performance {
        train: eval(Split::Train)?,
        val: eval(Split::Val)?,
        test: eval(Split::Test)?,
    })
}

/// `true` where the regressed year lies within `tolerance_years` of the true year.
pub fn correct_prediction_mask(model: &TrainedModel, dataset: &Dataset, tolerance_years: u32) -> Result<Vec<bool>> {
    (0..dataset.len())
        .map(|i| {
            let y = predict_year(model, &dataset.sample(i), &dataset.central_year)?;
            Ok((y - dataset.year(i)).abs() <= f64::from(tolerance_years))
        })
        .collect()
}
