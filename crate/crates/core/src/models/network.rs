use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Layer, LrpRule};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Mlp,
    Cnn,
}

impl Arch {
    pub fn id(self) -> u32 {
        match self {
            Arch::Mlp => 1,
            Arch::Cnn => 2,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(Arch::Mlp),
            2 => Some(Arch::Cnn),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::Cnn => "cnn",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Arch::Mlp),
            "cnn" => Ok(Arch::Cnn),
            other => Err(Error::Config(format!("unknown architecture `{other}` (expected mlp or cnn)"))),
        }
    }
}

/// An ordered stack of layers that maps a `(v, h)` map to class probabilities.
///
/// The trailing softmax is kept for prediction; gradients and relevance start
/// from the logits in front of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: Arch,
    /// Shape of the maps fed to the network.
    pub map_shape: Vec<usize>,
    /// Shape the first layer expects; holds the same number of elements as `map_shape`.
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(arch: Arch, map_shape: Vec<usize>, input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if map_shape.iter().product::<usize>() != input_shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch {
                context: "Network::new",
                expected: map_shape,
                actual: input_shape,
            });
        }
        let mut shape = input_shape.clone();
        for layer in &layers {
            shape = layer.output_shape(&shape)?;
        }
        Ok(Self {
            arch,
            map_shape,
            input_shape,
            layers,
        })
    }

    /// Layers up to (not including) a trailing softmax.
    pub fn logit_layers(&self) -> &[Layer] {
        match self.layers.last() {
            Some(Layer::Softmax) => &self.layers[..self.layers.len() - 1],
            _ => &self.layers,
        }
    }

    pub fn classes(&self) -> usize {
        let mut shape = self.input_shape.clone();
        for layer in self.logit_layers() {
            shape = layer.output_shape(&shape).expect("validated at construction");
        }
        shape.iter().product()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Indices of the layers that carry weights, input side first.
    pub fn param_layer_indices(&self) -> Vec<usize> {
        (0..self.layers.len()).filter(|&i| self.layers[i].has_params()).collect()
    }

    fn to_input(&self, x: &Tensor) -> Result<Tensor> {
        x.ensure_shape(&self.map_shape, "network input")?;
        x.clone().reshape(&self.input_shape)
    }

    /// Activations entering every logit layer, followed by the logits.
    pub fn trace(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let layers = self.logit_layers();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(self.to_input(x)?);
        for layer in layers {
            let next = layer.forward(acts.last().unwrap())?;
            acts.push(next);
        }
        Ok(acts)
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.trace(x)?.pop().unwrap())
    }

    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        let logits = self.logits(x)?;
        Layer::Softmax.forward(&logits)
    }

    pub fn predict_class(&self, x: &Tensor) -> Result<usize> {
        Ok(self.logits(x)?.argmax())
    }

    /// Backpropagates `upstream` (shaped like the logits) through a recorded trace.
    pub(crate) fn backward_from(&self, acts: &[Tensor], upstream: Tensor) -> Result<Tensor> {
        let mut grad = upstream;
        for (layer, input) in self.logit_layers().iter().zip(acts).rev() {
            grad = layer.backward_input(input, &grad)?;
        }
        grad.reshape(&self.map_shape)
    }

    /// `∂ logit_c / ∂ x`, shaped like the map.
    pub fn logit_gradient(&self, x: &Tensor, class: usize) -> Result<Tensor> {
        let acts = self.trace(x)?;
        let n = acts.last().unwrap().len();
        if class >= n {
            return Err(Error::Config(format!("class {class} out of range 0..{n}")));
        }
        let mut up = Tensor::zeros(&[n]);
        up.data_mut()[class] = 1.0;
        self.backward_from(&acts, up)
    }

    /// Layer-wise relevance propagation from the class-`c` logit.
    ///
    /// `rule_for(i, layer)` picks the rule for logit layer `i`; it is only asked
    /// about layers with weights.
    pub fn lrp(&self, x: &Tensor, class: usize, rule_for: impl Fn(usize, &Layer) -> LrpRule) -> Result<Tensor> {
        let layers = self.logit_layers();
        for layer in layers {
            if matches!(layer, Layer::Softmax) {
                return Err(Error::Unsupported(format!(
                    "lrp cannot propagate through layer `{}`",
                    layer.kind()
                )));
            }
        }
        let acts = self.trace(x)?;
        let logits = acts.last().unwrap();
        if class >= logits.len() {
            return Err(Error::Config(format!("class {class} out of range 0..{}", logits.len())));
        }
        let mut relevance = Tensor::zeros(&[logits.len()]);
        relevance.data_mut()[class] = logits.data()[class];
        for (i, (layer, input)) in layers.iter().zip(&acts).enumerate().rev() {
            let rule = if layer.has_params() { rule_for(i, layer) } else { LrpRule::Z };
            relevance = layer.relevance_backward(input, &relevance, rule)?;
        }
        relevance.reshape(&self.map_shape)
    }

    /// A copy whose weights are transformed by `f(layer_index, weights)`.
    pub fn map_weights(&self, mut f: impl FnMut(usize, &mut Tensor)) -> Self {
        let mut out = self.clone();
        for (i, layer) in out.layers.iter_mut().enumerate() {
            if let Some(w) = layer.weight_mut() {
                f(i, w);
            }
        }
        out
    }
}
