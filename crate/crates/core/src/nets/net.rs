//! Layer specifications and a feed-forward network over one flat parameter
//! vector, with exact reverse-mode gradients.
//!
//! Sequence tensors are channel-major: element `(c, t)` of a `C x L` input
//! lives at index `c * L + t`. Dense layers flatten whatever they receive.

use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const LEAKY_SLOPE: f64 = 0.2;
/// Initial bias of ReLU units, so they start active on most inputs.
pub const RELU_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and the output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    fn has_kink(self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 1-D convolution with "same" padding and stride 1.
    Conv {
        filters: usize,
        kernel: usize,
        activation: Activation,
    },
    Dense {
        width: usize,
        activation: Activation,
    },
    /// Inverted dropout; the identity outside training.
    Dropout {
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub in_channels: usize,
    pub in_len: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Seq { ch: usize, len: usize },
    Flat(usize),
}

impl Shape {
    fn size(self) -> usize {
        match self {
            Shape::Seq { ch, len } => ch * len,
            Shape::Flat(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Compiled {
    spec: LayerSpec,
    input: Shape,
    output: Shape,
    offset: usize,
    n_params: usize,
}

impl NetSpec {
    fn compile(&self) -> Result<Vec<Compiled>> {
        if self.in_channels == 0 || self.in_len == 0 {
            return Err(Error::Shape("network input must be nonempty".into()));
        }
        let mut shape = Shape::Seq {
            ch: self.in_channels,
            len: self.in_len,
        };
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let (output, n_params) = match *layer {
                LayerSpec::Conv { filters, kernel, .. } => {
                    let Shape::Seq { ch, len } = shape else {
                        return Err(Error::Shape(format!("layer {i}: convolution after a dense layer")));
                    };
                    if filters == 0 || kernel == 0 {
                        return Err(Error::Shape(format!("layer {i}: empty convolution")));
                    }
                    (Shape::Seq { ch: filters, len }, filters * ch * kernel + filters)
                }
                LayerSpec::Dense { width, .. } => {
                    if width == 0 {
                        return Err(Error::Shape(format!("layer {i}: empty dense layer")));
                    }
                    (Shape::Flat(width), width * shape.size() + width)
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::InvalidArgument(format!("layer {i}: dropout rate {rate}")));
                    }
                    (shape, 0)
                }
            };
            out.push(Compiled {
                spec: layer.clone(),
                input: shape,
                output,
                offset,
                n_params,
            });
            offset += n_params;
            shape = output;
        }
        Ok(out)
    }

    pub fn input_size(&self) -> usize {
        self.in_channels * self.in_len
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `acts[i]` is the input of layer `i`; the last entry is the output.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of parametric layers, dropout masks otherwise.
    aux: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace holds the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    spec: NetSpec,
    layers: Vec<Compiled>,
    pub params: Vec<f64>,
}

impl Net {
    /// All parameters zero.
    pub fn zeros(spec: NetSpec) -> Result<Self> {
        let layers = spec.compile()?;
        let n = layers.iter().map(|l| l.n_params).sum();
        Ok(Self {
            spec,
            layers,
            params: vec![0.0; n],
        })
    }

    /// Glorot-uniform weights; biases are zero except on ReLU layers.
    pub fn init(spec: NetSpec, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for l in &net.layers {
            let (fan_in, fan_out, n_weights) = match l.spec {
                LayerSpec::Conv { filters, kernel, .. } => {
                    let Shape::Seq { ch, .. } = l.input else { unreachable!() };
                    (ch * kernel, filters * kernel, filters * ch * kernel)
                }
                LayerSpec::Dense { width, .. } => (l.input.size(), width, width * l.input.size()),
                LayerSpec::Dropout { .. } => continue,
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for w in &mut net.params[l.offset..l.offset + n_weights] {
                *w = dist.sample(rng);
            }
            let relu = matches!(
                l.spec,
                LayerSpec::Conv {
                    activation: Activation::Relu,
                    ..
                } | LayerSpec::Dense {
                    activation: Activation::Relu,
                    ..
                }
            );
            if relu {
                net.params[l.offset + n_weights..l.offset + l.n_params].fill(RELU_BIAS);
            }
        }
        Ok(net)
    }

    pub fn from_params(spec: NetSpec, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters for a network of {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_size(&self) -> usize {
        self.spec.input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(self.input_size(), |l| l.output.size())
    }

    /// Output shape as `(channels, length)`; flat outputs have length 1.
    pub fn output_shape(&self) -> (usize, usize) {
        match self.layers.last().map(|l| l.output) {
            Some(Shape::Seq { ch, len }) => (ch, len),
            Some(Shape::Flat(n)) => (n, 1),
            None => (self.spec.in_channels, self.spec.in_len),
        }
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = f64::from(*p as f32);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::Shape(format!(
                "input of {} values, network expects {}",
                x.len(),
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Deterministic evaluation-mode forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut trace = self.run(&self.params, x, None);
        Ok(trace.acts.pop().expect("trace holds the output"))
    }

    /// Forward pass that records a trace. Dropout is active iff `rng` is given.
    pub fn forward_trace(&self, x: &[f64], rng: Option<&mut Rng>) -> Result<Trace> {
        self.forward_trace_with(&self.params, x, rng)
    }

    /// [`Net::forward_trace`] with parameters taken from `params`.
    pub fn forward_trace_with(&self, params: &[f64], x: &[f64], rng: Option<&mut Rng>) -> Result<Trace> {
        self.check_input(x)?;
        debug_assert_eq!(params.len(), self.params.len());
        Ok(self.run(params, x, rng))
    }

    fn run(&self, params: &[f64], x: &[f64], mut rng: Option<&mut Rng>) -> Trace {
        let mut trace = Trace {
            acts: Vec::with_capacity(self.layers.len() + 1),
            aux: Vec::with_capacity(self.layers.len()),
        };
        trace.acts.push(x.to_vec());
        for l in &self.layers {
            let input = trace.acts.last().expect("nonempty");
            let p = &params[l.offset..l.offset + l.n_params];
            let (out, aux) = match l.spec {
                LayerSpec::Conv { kernel, activation, .. } => {
                    let z = conv_forward(p, input, l.input, l.output, kernel);
                    (z.iter().map(|&v| activation.apply(v)).collect(), z)
                }
                LayerSpec::Dense { activation, .. } => {
                    let z = dense_forward(p, input, l.output.size());
                    (z.iter().map(|&v| activation.apply(v)).collect(), z)
                }
                LayerSpec::Dropout { rate } => match rng.as_deref_mut() {
                    Some(rng) if rate > 0.0 => {
                        let keep = 1.0 / (1.0 - rate);
                        let mask: Vec<f64> = (0..input.len())
                            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                            .collect();
                        (input.iter().zip(&mask).map(|(a, m)| a * m).collect(), mask)
                    }
                    _ => (input.clone(), Vec::new()),
                },
            };
            trace.aux.push(aux);
            trace.acts.push(out);
        }
        trace
    }

    /// Accumulates `d loss / d params` into `grad` and returns `d loss / d input`.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        self.backward_with(&self.params, trace, grad_out, grad)
    }

    /// [`Net::backward`] with parameters taken from `params`.
    pub fn backward_with(&self, params: &[f64], trace: &Trace, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let mut delta = grad_out.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &trace.acts[i];
            let output = &trace.acts[i + 1];
            let aux = &trace.aux[i];
            let p = &params[l.offset..l.offset + l.n_params];
            let g = &mut grad[l.offset..l.offset + l.n_params];
            delta = match l.spec {
                LayerSpec::Conv { kernel, activation, .. } => {
                    for ((d, &z), &a) in delta.iter_mut().zip(aux).zip(output) {
                        *d *= activation.derivative(z, a);
                    }
                    conv_backward(p, g, input, &delta, l.input, l.output, kernel)
                }
                LayerSpec::Dense { activation, .. } => {
                    for ((d, &z), &a) in delta.iter_mut().zip(aux).zip(output) {
                        *d *= activation.derivative(z, a);
                    }
                    dense_backward(p, g, input, &delta)
                }
                LayerSpec::Dropout { .. } => {
                    if !aux.is_empty() {
                        for (d, m) in delta.iter_mut().zip(aux) {
                            *d *= m;
                        }
                    }
                    delta
                }
            };
        }
        delta
    }

    /// Signs of every pre-activation at a kink (ReLU-family), used to detect
    /// when a finite-difference probe crosses a non-differentiable point.
    pub fn kink_pattern(&self, trace: &Trace) -> Vec<bool> {
        let mut out = Vec::new();
        for (l, aux) in self.layers.iter().zip(&trace.aux) {
            let act = match l.spec {
                LayerSpec::Conv { activation, .. } | LayerSpec::Dense { activation, .. } => activation,
                LayerSpec::Dropout { .. } => continue,
            };
            if act.has_kink() {
                out.extend(aux.iter().map(|&z| z > 0.0));
            }
        }
        out
    }
}

fn conv_dims(input: Shape, output: Shape) -> (usize, usize, usize) {
    let (Shape::Seq { ch, len }, Shape::Seq { ch: filters, .. }) = (input, output) else {
        unreachable!("convolution shapes are sequences")
    };
    (ch, len, filters)
}

fn conv_forward(p: &[f64], x: &[f64], input: Shape, output: Shape, kernel: usize) -> Vec<f64> {
    let (ch, len, filters) = conv_dims(input, output);
    let pad = (kernel - 1) / 2;
    let (w, b) = p.split_at(filters * ch * kernel);
    let mut z = vec![0.0; filters * len];
    for o in 0..filters {
        let zo = &mut z[o * len..(o + 1) * len];
        zo.fill(b[o]);
        for c in 0..ch {
            let xc = &x[c * len..(c + 1) * len];
            let wk = &w[(o * ch + c) * kernel..(o * ch + c + 1) * kernel];
            for (j, &wj) in wk.iter().enumerate() {
                // output t reads input t + j - pad
                let lo = pad.saturating_sub(j);
                let hi = (len + pad).saturating_sub(j).min(len);
                for t in lo..hi {
                    zo[t] += wj * xc[t + j - pad];
                }
            }
        }
    }
    z
}

fn conv_backward(
    p: &[f64],
    g: &mut [f64],
    x: &[f64],
    dz: &[f64],
    input: Shape,
    output: Shape,
    kernel: usize,
) -> Vec<f64> {
    let (ch, len, filters) = conv_dims(input, output);
    let pad = (kernel - 1) / 2;
    let n_w = filters * ch * kernel;
    let w = &p[..n_w];
    let (gw, gb) = g.split_at_mut(n_w);
    let mut dx = vec![0.0; ch * len];
    for o in 0..filters {
        let dzo = &dz[o * len..(o + 1) * len];
        gb[o] += dzo.iter().sum::<f64>();
        for c in 0..ch {
            let xc = &x[c * len..(c + 1) * len];
            let dxc = &mut dx[c * len..(c + 1) * len];
            let base = (o * ch + c) * kernel;
            for j in 0..kernel {
                let lo = pad.saturating_sub(j);
                let hi = (len + pad).saturating_sub(j).min(len);
                let wj = w[base + j];
                let mut acc = 0.0;
                for t in lo..hi {
                    acc += dzo[t] * xc[t + j - pad];
                    dxc[t + j - pad] += wj * dzo[t];
                }
                gw[base + j] += acc;
            }
        }
    }
    dx
}

fn dense_forward(p: &[f64], x: &[f64], width: usize) -> Vec<f64> {
    let n_in = x.len();
    let (w, b) = p.split_at(width * n_in);
    (0..width)
        .map(|o| {
            b[o] + w[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect()
}

fn dense_backward(p: &[f64], g: &mut [f64], x: &[f64], dz: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    let width = dz.len();
    let (gw, gb) = g.split_at_mut(width * n_in);
    let mut dx = vec![0.0; n_in];
    for o in 0..width {
        let d = dz[o];
        gb[o] += d;
        if d == 0.0 {
            continue;
        }
        let row = &p[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            gw[o * n_in + i] += d * x[i];
            dx[i] += d * row[i];
        }
    }
    dx
}

/// Softmax of a logit vector, computed stably.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of `softmax(out)` against `label`, and its gradient w.r.t. `out`.
pub fn cross_entropy(out: &[f64], label: usize) -> (f64, Vec<f64>) {
    let p = softmax(out);
    let loss = -p[label].max(f64::MIN_POSITIVE).ln();
    let mut g = p;
    g[label] -= 1.0;
    (loss, g)
}

/// Mean squared error over all elements, and its gradient w.r.t. `out`.
pub fn mse(out: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = out.len() as f64;
    let mut loss = 0.0;
    let g = out
        .iter()
        .zip(target)
        .map(|(o, t)| {
            let d = o - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    (loss / n, g)
}

/// Reorders a time-major `len x ch` window into channel-major `ch x len`.
pub fn to_channel_major(time_major: &[f64], ch: usize) -> Vec<f64> {
    let len = time_major.len() / ch;
    let mut out = vec![0.0; time_major.len()];
    for t in 0..len {
        for c in 0..ch {
            out[c * len + t] = time_major[t * ch + c];
        }
    }
    out
}

/// Inverse of [`to_channel_major`].
pub fn to_time_major(channel_major: &[f64], ch: usize) -> Vec<f64> {
    let len = channel_major.len() / ch;
    let mut out = vec![0.0; channel_major.len()];
    for c in 0..ch {
        for t in 0..len {
            out[t * ch + c] = channel_major[c * len + t];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn conv_oracle(w: &[f64], b: &[f64], x: &[f64], ch: usize, len: usize, filters: usize, k: usize) -> Vec<f64> {
        let pad = (k - 1) as isize / 2;
        let mut out = vec![0.0; filters * len];
        for o in 0..filters {
            for t in 0..len {
                let mut s = b[o];
                for c in 0..ch {
                    for j in 0..k {
                        let src = t as isize + j as isize - pad;
                        if src >= 0 && (src as usize) < len {
                            s += w[(o * ch + c) * k + j] * x[c * len + src as usize];
                        }
                    }
                }
                out[o * len + t] = s;
            }
        }
        out
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut rng = seeded(1);
        for k in [1, 2, 3, 5] {
            let spec = NetSpec {
                in_channels: 3,
                in_len: 8,
                layers: vec![LayerSpec::Conv {
                    filters: 4,
                    kernel: k,
                    activation: Activation::Identity,
                }],
            };
            let mut net = Net::init(spec, &mut rng).unwrap();
            let nb = net.n_params();
            for b in &mut net.params[nb - 4..] {
                *b = rng.gen_range(-1.0..1.0);
            }
            let x: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = net.forward(&x).unwrap();
            let (w, b) = net.params.split_at(4 * 3 * k);
            let want = conv_oracle(w, b, &x, 3, 8, 4, k);
            for (a, e) in got.iter().zip(&want) {
                assert!((a - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_dense_passes_input_through() {
        let spec = NetSpec {
            in_channels: 1,
            in_len: 4,
            layers: vec![LayerSpec::Dense {
                width: 4,
                activation: Activation::Identity,
            }],
        };
        let mut net = Net::zeros(spec).unwrap();
        for i in 0..4 {
            net.params[i * 4 + i] = 1.0;
        }
        let x = [0.5, -1.0, 3.0, 0.0];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn dropout_is_identity_in_eval_mode() {
        let spec = NetSpec {
            in_channels: 2,
            in_len: 3,
            layers: vec![LayerSpec::Dropout { rate: 0.5 }],
        };
        let net = Net::zeros(spec).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
        let t = net.forward_trace(&x, Some(&mut seeded(2))).unwrap();
        assert!(t.output().iter().zip(&x).all(|(o, i)| *o == 0.0 || *o == 2.0 * i));
    }

    #[test]
    fn shape_errors() {
        let bad = NetSpec {
            in_channels: 1,
            in_len: 4,
            layers: vec![
                LayerSpec::Dense {
                    width: 3,
                    activation: Activation::Relu,
                },
                LayerSpec::Conv {
                    filters: 1,
                    kernel: 1,
                    activation: Activation::Relu,
                },
            ],
        };
        assert!(Net::zeros(bad).is_err());
        let drop = NetSpec {
            in_channels: 1,
            in_len: 4,
            layers: vec![LayerSpec::Dropout { rate: 1.0 }],
        };
        assert!(Net::zeros(drop).is_err());
        let ok = NetSpec {
            in_channels: 1,
            in_len: 4,
            layers: vec![],
        };
        assert!(Net::zeros(ok).unwrap().forward(&[1.0; 3]).is_err());
    }

    #[test]
    fn losses() {
        let (l, g) = cross_entropy(&[0.0, 0.0], 1);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g, vec![0.5, -0.5]);
        let (l, g) = mse(&[0.0; 4], &[0.0; 4]);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layout_round_trip() {
        let tm = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 3 steps x 2 channels
        let cm = to_channel_major(&tm, 2);
        assert_eq!(cm, vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        assert_eq!(to_time_major(&cm, 2), tm.to_vec());
    }
}
