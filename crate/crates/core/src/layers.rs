//! Layer primitives with exact forward and backward passes.
//!
//! Every layer works on a single sample, without a batch axis: dense layers take
//! a vector `(in,)`, convolution and pooling take `(channels, rows, cols)`.
//! Besides the usual input and parameter gradients each layer exposes
//! [`Layer::relevance_backward`], the per-layer step of layer-wise relevance
//! propagation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Offset added to LRP share denominators, signed like the denominator.
pub const LRP_STABILIZER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `(out, in)`
    pub weight: Tensor,
    /// `(out,)`
    pub bias: Option<Tensor>,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    /// `(out_channels, in_channels, kernel_rows, kernel_cols)`
    pub weight: Tensor,
    /// `(out_channels,)`
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxPool2d {
    pub window: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    MaxPool2d(MaxPool2d),
    Relu,
    Softmax,
    Flatten,
}

/// Gradients congruent to a layer's weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

/// Relevance propagation rules.
///
/// Share denominators sum over the lower layer only (no bias term), so the
/// stabilizer-free rules conserve relevance exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LrpRule {
    /// Plain proportional shares `z_ij / Σ_i z_ij`.
    Z,
    /// Positive and negative contributions distributed separately,
    /// weighted by `alpha` and `beta`; requires `alpha + beta = 1`.
    AlphaBeta { alpha: f64, beta: f64 },
    /// Proportional shares with the denominator pushed away from zero by `epsilon`.
    Epsilon { epsilon: f64 },
    /// Proportional shares on `a_i (w_ij + gamma w_ij⁺)`.
    Gamma { gamma: f64 },
    /// Bounded-input rule `a_i w_ij - low w_ij⁺ - high w_ij⁻` for pixel layers.
    ZBox { low: f64, high: f64 },
}

impl LrpRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LrpRule::AlphaBeta { alpha, beta } => {
                if !(alpha >= 0.0 && beta >= 0.0) {
                    return Err(Error::InvalidRule(format!(
                        "alpha and beta must be non-negative, got alpha={alpha}, beta={beta}"
                    )));
                }
                if (alpha + beta - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidRule(format!(
                        "alpha + beta must equal 1 for conservation, got {}",
                        alpha + beta
                    )));
                }
            }
            LrpRule::Epsilon { epsilon } if !(epsilon >= 0.0) => {
                return Err(Error::InvalidRule(format!("epsilon must be >= 0, got {epsilon}")));
            }
            LrpRule::Gamma { gamma } if !(gamma >= 0.0) => {
                return Err(Error::InvalidRule(format!("gamma must be >= 0, got {gamma}")));
            }
            LrpRule::ZBox { low, high } if !(low <= high) => {
                return Err(Error::InvalidRule(format!(
                    "z-box bounds must satisfy low <= high, got [{low}, {high}]"
                )));
            }
            _ => {}
        }
        Ok(())
    }
}

impl Dense {
    pub fn new(weight: Tensor, bias: Option<Tensor>) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::Config(format!(
                "dense weight must be (out, in), got {:?}",
                weight.shape()
            )));
        }
        if let Some(b) = &bias {
            b.ensure_shape(&[weight.shape()[0]], "Dense::new bias")?;
        }
        Ok(Self {
            weight,
            bias,
            l2: 0.0,
        })
    }

    pub fn n_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn n_in(&self) -> usize {
        self.weight.shape()[1]
    }
}

impl Conv2d {
    pub fn new(weight: Tensor, bias: Option<Tensor>, stride: usize) -> Result<Self> {
        if weight.shape().len() != 4 {
            return Err(Error::Config(format!(
                "conv2d weight must be (out_ch, in_ch, kh, kw), got {:?}",
                weight.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::Config("conv2d stride must be positive".into()));
        }
        if let Some(b) = &bias {
            b.ensure_shape(&[weight.shape()[0]], "Conv2d::new bias")?;
        }
        Ok(Self {
            weight,
            bias,
            stride,
            l2: 0.0,
        })
    }

    fn dims(&self) -> (usize, usize, usize, usize) {
        let s = self.weight.shape();
        (s[0], s[1], s[2], s[3])
    }
}

/// `floor((n - k) / stride) + 1`, no padding.
fn window_count(n: usize, k: usize, stride: usize) -> Option<usize> {
    (n >= k && k > 0 && stride > 0).then(|| (n - k) / stride + 1)
}

/// Geometry of a convolution applied to a concrete input.
#[derive(Clone, Copy)]
struct ConvGeom {
    oc: usize,
    ic: usize,
    kh: usize,
    kw: usize,
    rows: usize,
    cols: usize,
    oh: usize,
    ow: usize,
    stride: usize,
}

impl ConvGeom {
    fn input_index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.rows + y) * self.cols + x
    }

    /// Calls `f(input_index, weight_index)` for every tap feeding output `(o, oy, ox)`.
    #[inline]
    fn for_each_tap(&self, o: usize, oy: usize, ox: usize, mut f: impl FnMut(usize, usize)) {
        for c in 0..self.ic {
            for ky in 0..self.kh {
                let y = oy * self.stride + ky;
                let in_row = self.input_index(c, y, ox * self.stride);
                let w_row = ((o * self.ic + c) * self.kh + ky) * self.kw;
                for kx in 0..self.kw {
                    f(in_row + kx, w_row + kx);
                }
            }
        }
    }
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::MaxPool2d(_) => "maxpool2d",
            Layer::Relu => "relu",
            Layer::Softmax => "softmax",
            Layer::Flatten => "flatten",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, Layer::Dense(_) | Layer::Conv2d(_))
    }

    pub fn weight(&self) -> Option<&Tensor> {
        match self {
            Layer::Dense(d) => Some(&d.weight),
            Layer::Conv2d(c) => Some(&c.weight),
            _ => None,
        }
    }

    pub fn weight_mut(&mut self) -> Option<&mut Tensor> {
        match self {
            Layer::Dense(d) => Some(&mut d.weight),
            Layer::Conv2d(c) => Some(&mut c.weight),
            _ => None,
        }
    }

    pub fn bias(&self) -> Option<&Tensor> {
        match self {
            Layer::Dense(d) => d.bias.as_ref(),
            Layer::Conv2d(c) => c.bias.as_ref(),
            _ => None,
        }
    }

    pub fn bias_mut(&mut self) -> Option<&mut Tensor> {
        match self {
            Layer::Dense(d) => d.bias.as_mut(),
            Layer::Conv2d(c) => c.bias.as_mut(),
            _ => None,
        }
    }

    pub fn l2(&self) -> f64 {
        match self {
            Layer::Dense(d) => d.l2,
            Layer::Conv2d(c) => c.l2,
            _ => 0.0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight().map_or(0, Tensor::len) + self.bias().map_or(0, Tensor::len)
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::ShapeMismatch {
            context: self.kind(),
            expected,
            actual: input.to_vec(),
        };
        match self {
            Layer::Dense(d) => {
                if input != [d.n_in()] {
                    return Err(mismatch(vec![d.n_in()]));
                }
                Ok(vec![d.n_out()])
            }
            Layer::Conv2d(c) => {
                let (oc, ic, kh, kw) = c.dims();
                if input.len() != 3 || input[0] != ic {
                    return Err(mismatch(vec![ic, kh, kw]));
                }
                let oh = window_count(input[1], kh, c.stride).ok_or_else(|| mismatch(vec![ic, kh, kw]))?;
                let ow = window_count(input[2], kw, c.stride).ok_or_else(|| mismatch(vec![ic, kh, kw]))?;
                Ok(vec![oc, oh, ow])
            }
            Layer::MaxPool2d(p) => {
                if input.len() != 3 {
                    return Err(mismatch(vec![1, p.window, p.window]));
                }
                let oh = window_count(input[1], p.window, p.stride)
                    .ok_or_else(|| mismatch(vec![input[0], p.window, p.window]))?;
                let ow = window_count(input[2], p.window, p.stride)
                    .ok_or_else(|| mismatch(vec![input[0], p.window, p.window]))?;
                Ok(vec![input[0], oh, ow])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::Softmax => {
                if input.len() != 1 {
                    return Err(mismatch(vec![input.iter().product()]));
                }
                Ok(input.to_vec())
            }
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    fn conv_geom(c: &Conv2d, input: &[usize]) -> ConvGeom {
        let (oc, ic, kh, kw) = c.dims();
        ConvGeom {
            oc,
            ic,
            kh,
            kw,
            rows: input[1],
            cols: input[2],
            oh: (input[1] - kh) / c.stride + 1,
            ow: (input[2] - kw) / c.stride + 1,
            stride: c.stride,
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let x = input.data();
        let data = match self {
            Layer::Dense(d) => {
                let (n_out, n_in) = (d.n_out(), d.n_in());
                let w = d.weight.data();
                (0..n_out)
                    .map(|j| {
                        let row = &w[j * n_in..(j + 1) * n_in];
                        let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                        dot + d.bias.as_ref().map_or(0.0, |b| b.data()[j])
                    })
                    .collect()
            }
            Layer::Conv2d(c) => {
                let g = Self::conv_geom(c, input.shape());
                let w = c.weight.data();
                let mut out = Vec::with_capacity(g.oc * g.oh * g.ow);
                for o in 0..g.oc {
                    let b = c.bias.as_ref().map_or(0.0, |b| b.data()[o]);
                    for oy in 0..g.oh {
                        for ox in 0..g.ow {
                            let mut acc = b;
                            g.for_each_tap(o, oy, ox, |i, k| acc += x[i] * w[k]);
                            out.push(acc);
                        }
                    }
                }
                out
            }
            Layer::MaxPool2d(p) => {
                let winners = pool_winners(p, input.shape(), x);
                winners.into_iter().map(|i| x[i]).collect()
            }
            Layer::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            Layer::Softmax => softmax(x),
            Layer::Flatten => x.to_vec(),
        };
        Tensor::new(out_shape, data)
    }

    /// Gradient of a scalar loss with respect to this layer's input.
    pub fn backward_input(&self, input: &Tensor, upstream: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        upstream.ensure_shape(&out_shape, "backward_input upstream")?;
        let x = input.data();
        let u = upstream.data();
        let data = match self {
            Layer::Dense(d) => {
                let (n_out, n_in) = (d.n_out(), d.n_in());
                let w = d.weight.data();
                let mut g = vec![0.0; n_in];
                for (j, &uj) in u.iter().enumerate().take(n_out) {
                    if uj == 0.0 {
                        continue;
                    }
                    let row = &w[j * n_in..(j + 1) * n_in];
                    for (gi, &wji) in g.iter_mut().zip(row) {
                        *gi += wji * uj;
                    }
                }
                g
            }
            Layer::Conv2d(c) => {
                let g = Self::conv_geom(c, input.shape());
                let w = c.weight.data();
                let mut grad = vec![0.0; x.len()];
                let mut j = 0;
                for o in 0..g.oc {
                    for oy in 0..g.oh {
                        for ox in 0..g.ow {
                            let uj = u[j];
                            j += 1;
                            if uj != 0.0 {
                                g.for_each_tap(o, oy, ox, |i, k| grad[i] += w[k] * uj);
                            }
                        }
                    }
                }
                grad
            }
            Layer::MaxPool2d(p) => {
                let mut grad = vec![0.0; x.len()];
                for (&i, &uj) in pool_winners(p, input.shape(), x).iter().zip(u) {
                    grad[i] += uj;
                }
                grad
            }
            Layer::Relu => x
                .iter()
                .zip(u)
                .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                .collect(),
            Layer::Softmax => {
                let s = softmax(x);
                let dot: f64 = s.iter().zip(u).map(|(a, b)| a * b).sum();
                s.iter().zip(u).map(|(&si, &ui)| si * (ui - dot)).collect()
            }
            Layer::Flatten => u.to_vec(),
        };
        Tensor::new(input.shape().to_vec(), data)
    }

    /// Gradient with respect to weight and bias, including the configured L2 term.
    pub fn backward_params(&self, input: &Tensor, upstream: &Tensor) -> Result<ParamGrads> {
        let mut grads = self.backward_params_data(input, upstream)?;
        let l2 = self.l2();
        if l2 != 0.0 {
            let w = self.weight().expect("parameterized layer");
            for (g, &wi) in grads.weight.data_mut().iter_mut().zip(w.data()) {
                *g += 2.0 * l2 * wi;
            }
        }
        Ok(grads)
    }

    /// Data term of [`Layer::backward_params`], without regularization.
    pub(crate) fn backward_params_data(&self, input: &Tensor, upstream: &Tensor) -> Result<ParamGrads> {
        if !self.has_params() {
            return Err(Error::Unsupported(format!(
                "backward_params on parameterless layer `{}`",
                self.kind()
            )));
        }
        let out_shape = self.output_shape(input.shape())?;
        upstream.ensure_shape(&out_shape, "backward_params upstream")?;
        let x = input.data();
        let u = upstream.data();
        match self {
            Layer::Dense(d) => {
                let (n_out, n_in) = (d.n_out(), d.n_in());
                let mut gw = vec![0.0; n_out * n_in];
                for (j, &uj) in u.iter().enumerate() {
                    if uj == 0.0 {
                        continue;
                    }
                    for (g, &xi) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
                        *g = uj * xi;
                    }
                }
                Ok(ParamGrads {
                    weight: Tensor::new(vec![n_out, n_in], gw)?,
                    bias: d.bias.as_ref().map(|_| Tensor::from_vec(u.to_vec())),
                })
            }
            Layer::Conv2d(c) => {
                let g = Self::conv_geom(c, input.shape());
                let mut gw = vec![0.0; c.weight.len()];
                let mut gb = vec![0.0; g.oc];
                let mut j = 0;
                for o in 0..g.oc {
                    for oy in 0..g.oh {
                        for ox in 0..g.ow {
                            let uj = u[j];
                            j += 1;
                            gb[o] += uj;
                            if uj != 0.0 {
                                g.for_each_tap(o, oy, ox, |i, k| gw[k] += x[i] * uj);
                            }
                        }
                    }
                }
                Ok(ParamGrads {
                    weight: Tensor::new(c.weight.shape().to_vec(), gw)?,
                    bias: c.bias.as_ref().map(|_| Tensor::from_vec(gb)),
                })
            }
            _ => unreachable!(),
        }
    }

    /// One step of layer-wise relevance propagation: maps relevance on this
    /// layer's output back onto its input.
    pub fn relevance_backward(&self, input: &Tensor, relevance_out: &Tensor, rule: LrpRule) -> Result<Tensor> {
        rule.validate()?;
        let out_shape = self.output_shape(input.shape())?;
        relevance_out.ensure_shape(&out_shape, "relevance_backward relevance_out")?;
        let a = input.data();
        let r = relevance_out.data();
        let data = match self {
            Layer::Dense(d) => {
                let n_in = d.n_in();
                let w = d.weight.data();
                let taps = |j: usize, f: &mut dyn FnMut(usize, usize)| {
                    for i in 0..n_in {
                        f(i, j * n_in + i);
                    }
                };
                redistribute_rule(a.len(), r, a, w, rule, taps)
            }
            Layer::Conv2d(c) => {
                let g = Self::conv_geom(c, input.shape());
                let w = c.weight.data();
                let plane = g.oh * g.ow;
                let taps = |j: usize, f: &mut dyn FnMut(usize, usize)| {
                    let o = j / plane;
                    let rem = j % plane;
                    g.for_each_tap(o, rem / g.ow, rem % g.ow, &mut *f);
                };
                redistribute_rule(a.len(), r, a, w, rule, taps)
            }
            Layer::MaxPool2d(p) => {
                let mut out = vec![0.0; a.len()];
                for (&i, &rj) in pool_winners(p, input.shape(), a).iter().zip(r) {
                    out[i] += rj;
                }
                out
            }
            Layer::Relu | Layer::Flatten => r.to_vec(),
            Layer::Softmax => {
                return Err(Error::Unsupported(
                    "relevance propagation through `softmax` (start from the logits)".into(),
                ))
            }
        };
        Tensor::new(input.shape().to_vec(), data)
    }
}

/// Flat input index of the maximum in every pooling window, in output order.
/// Ties go to the lowest linear index.
fn pool_winners(p: &MaxPool2d, shape: &[usize], x: &[f64]) -> Vec<usize> {
    let (ch, rows, cols) = (shape[0], shape[1], shape[2]);
    let oh = (rows - p.window) / p.stride + 1;
    let ow = (cols - p.window) / p.stride + 1;
    let mut out = Vec::with_capacity(ch * oh * ow);
    for c in 0..ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (c * rows + oy * p.stride) * cols + ox * p.stride;
                for ky in 0..p.window {
                    let row = (c * rows + oy * p.stride + ky) * cols + ox * p.stride;
                    for i in row..row + p.window {
                        if x[i] > x[best] || (x[i] == x[best] && i < best) {
                            best = i;
                        }
                    }
                }
                out.push(best);
            }
        }
    }
    out
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[inline]
fn stabilize(denom: f64, eps: f64) -> f64 {
    if denom >= 0.0 {
        denom + eps
    } else {
        denom - eps
    }
}

/// Proportional redistribution: `R_i = Σ_j contrib(i, w_ij) / Σ_i' contrib(i', w_i'j) · R_j`.
fn redistribute(
    n_in: usize,
    r_out: &[f64],
    eps: f64,
    taps: &impl Fn(usize, &mut dyn FnMut(usize, usize)),
    contrib: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let mut r_in = vec![0.0; n_in];
    for (j, &rj) in r_out.iter().enumerate() {
        if rj == 0.0 {
            continue;
        }
        let mut denom = 0.0;
        taps(j, &mut |i, k| denom += contrib(i, k));
        let scale = rj / stabilize(denom, eps);
        taps(j, &mut |i, k| r_in[i] += contrib(i, k) * scale);
    }
    r_in
}

fn redistribute_rule(
    n_in: usize,
    r_out: &[f64],
    a: &[f64],
    w: &[f64],
    rule: LrpRule,
    taps: impl Fn(usize, &mut dyn FnMut(usize, usize)),
) -> Vec<f64> {
    match rule {
        LrpRule::Z => redistribute(n_in, r_out, LRP_STABILIZER, &taps, |i, k| a[i] * w[k]),
        LrpRule::Epsilon { epsilon } => {
            redistribute(n_in, r_out, epsilon.max(LRP_STABILIZER), &taps, |i, k| a[i] * w[k])
        }
        LrpRule::Gamma { gamma } => redistribute(n_in, r_out, LRP_STABILIZER, &taps, |i, k| {
            a[i] * (w[k] + gamma * w[k].max(0.0))
        }),
        LrpRule::ZBox { low, high } => redistribute(n_in, r_out, LRP_STABILIZER, &taps, |i, k| {
            a[i] * w[k] - low * w[k].max(0.0) - high * w[k].min(0.0)
        }),
        LrpRule::AlphaBeta { alpha, beta } => {
            let mut out = redistribute(n_in, r_out, LRP_STABILIZER, &taps, |i, k| (a[i] * w[k]).max(0.0));
            if alpha != 1.0 {
                out.iter_mut().for_each(|v| *v *= alpha);
            }
            if beta != 0.0 {
                let neg = redistribute(n_in, r_out, LRP_STABILIZER, &taps, |i, k| (a[i] * w[k]).min(0.0));
                for (o, n) in out.iter_mut().zip(neg) {
                    *o += beta * n;
                }
            }
            out
        }
    }
}
