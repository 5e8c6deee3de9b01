//! Dense feed-forward networks with exact reverse-mode gradients, an Adam
//! optimizer, soft target updates and a text checkpoint format.
//!
//! Fully-connected layers with relu / tanh / identity activations are all the
//! actor and critic need; the hand-written backward pass is checked against
//! central finite differences in the tests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation value.
    fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

/// One dense layer; `weights[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn in_dim(&self) -> usize {
        self.weights.first().map(Vec::len).unwrap_or(0)
    }

    fn out_dim(&self) -> usize {
        self.weights.len()
    }
}

/// A multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![vec![0.0; l.in_dim()]; l.out_dim()], vec![0.0; l.out_dim()]))
                .collect(),
        }
    }

    /// self += other * scale
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (row, orow) in w.iter_mut().zip(ow) {
                for (x, ox) in row.iter_mut().zip(orow) {
                    *x += ox * scale;
                }
            }
            for (x, ox) in b.iter_mut().zip(ob) {
                *x += ox * scale;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            for row in w {
                for x in row {
                    *x *= factor;
                }
            }
            for x in b {
                *x *= factor;
            }
        }
    }
}

impl Network {
    /// Random initialization: weights uniform in ±1/sqrt(fan_in), biases zero.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(
                "a network needs at least an input and an output dimension".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::Config(format!(
                "{} layer(s) need {} activation(s), got {}",
                dims.len() - 1,
                dims.len() - 1,
                activations.len()
            )));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                Layer {
                    weights: (0..fan_out)
                        .map(|_| (0..fan_in).map(|_| rng.random_range(-bound..bound)).collect())
                        .collect(),
                    bias: vec![0.0; fan_out],
                    activation,
                }
            })
            .collect();
        Ok(Network { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map(Layer::in_dim).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(Layer::out_dim).unwrap_or(0)
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.in_dim(), "input length mismatch");
        let mut current = input.to_vec();
        for layer in &self.layers {
            let mut next = Vec::with_capacity(layer.out_dim());
            for (row, &b) in layer.weights.iter().zip(&layer.bias) {
                let z: f64 = row.iter().zip(&current).map(|(w, x)| w * x).sum::<f64>() + b;
                next.push(layer.activation.apply(z));
            }
            current = next;
        }
        current
    }

    /// Exact gradients of `output . upstream` with respect to every parameter
    /// and to the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> (Gradients, Vec<f64>) {
        assert_eq!(input.len(), self.in_dim(), "input length mismatch");
        assert_eq!(upstream.len(), self.out_dim(), "upstream length mismatch");

        // forward pass retaining layer inputs and pre-activations
        let mut layer_inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre_activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            layer_inputs.push(current.clone());
            let z: Vec<f64> = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, &b)| row.iter().zip(&current).map(|(w, x)| w * x).sum::<f64>() + b)
                .collect();
            current = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre_activations.push(z);
        }

        let mut grads = Gradients::zeros_like(self);
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(&pre_activations[self.layers.len() - 1])
            .map(|(&u, &z)| u * self.layers.last().unwrap().activation.slope(z))
            .collect();

        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let x = &layer_inputs[idx];
            let (grad_w, grad_b) = &mut grads.layers[idx];
            for (o, &d) in delta.iter().enumerate() {
                grad_b[o] = d;
                for (i, &xi) in x.iter().enumerate() {
                    grad_w[o][i] = d * xi;
                }
            }
            let mut propagated = vec![0.0; layer.in_dim()];
            for (o, &d) in delta.iter().enumerate() {
                for (i, &w) in layer.weights[o].iter().enumerate() {
                    propagated[i] += w * d;
                }
            }
            if idx > 0 {
                let prev = &self.layers[idx - 1];
                delta = propagated
                    .iter()
                    .zip(&pre_activations[idx - 1])
                    .map(|(&e, &z)| e * prev.activation.slope(z))
                    .collect();
            } else {
                return (grads, propagated);
            }
        }
        unreachable!("networks always have at least one layer")
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.in_dim()];
        dims.extend(self.layers.iter().map(Layer::out_dim));
        dims
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct AdamOptimizer {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
    second_moment: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl AdamOptimizer {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        let zeros = Gradients::zeros_like(net).layers;
        AdamOptimizer {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// One descent step along `grads`.
    pub fn apply(&mut self, net: &mut Network, grads: &Gradients) {
        self.step += 1;
        let correction1 = 1.0 - self.beta1.powi(self.step as i32);
        let correction2 = 1.0 - self.beta2.powi(self.step as i32);

        for (layer_idx, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[layer_idx];
            let (mw, mb) = &mut self.first_moment[layer_idx];
            let (vw, vb) = &mut self.second_moment[layer_idx];

            for o in 0..layer.weights.len() {
                for i in 0..layer.weights[o].len() {
                    let g = gw[o][i];
                    mw[o][i] = self.beta1 * mw[o][i] + (1.0 - self.beta1) * g;
                    vw[o][i] = self.beta2 * vw[o][i] + (1.0 - self.beta2) * g * g;
                    let m_hat = mw[o][i] / correction1;
                    let v_hat = vw[o][i] / correction2;
                    layer.weights[o][i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                }
                let g = gb[o];
                mb[o] = self.beta1 * mb[o] + (1.0 - self.beta1) * g;
                vb[o] = self.beta2 * vb[o] + (1.0 - self.beta2) * g * g;
                let m_hat = mb[o] / correction1;
                let v_hat = vb[o] / correction2;
                layer.bias[o] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Polyak averaging: `target = tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Network, online: &Network, tau: f64) {
    assert!((0.0..=1.0).contains(&tau), "tau must lie in [0,1]");
    assert_eq!(target.dims(), online.dims(), "network shape mismatch");
    for (tl, ol) in target.layers.iter_mut().zip(&online.layers) {
        for (trow, orow) in tl.weights.iter_mut().zip(&ol.weights) {
            for (t, &o) in trow.iter_mut().zip(orow) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
        for (t, &o) in tl.bias.iter_mut().zip(&ol.bias) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

/// Write a checkpoint: dims and activations, then row-major weights and the
/// bias row per layer. Floats round-trip exactly through their shortest
/// decimal form.
pub fn save_checkpoint(path: &Path, net: &Network) -> Result<()> {
    let mut out = String::from("mlp v1\n");
    write!(out, "dims").expect("write to string");
    for d in net.dims() {
        write!(out, " {d}").expect("write to string");
    }
    out.push('\n');
    write!(out, "activations").expect("write to string");
    for a in net.activations() {
        write!(out, " {}", a.name()).expect("write to string");
    }
    out.push('\n');
    for layer in &net.layers {
        for row in &layer.weights {
            push_floats(&mut out, row);
        }
        push_floats(&mut out, &layer.bias);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn push_floats(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v}").expect("write to string");
    }
    out.push('\n');
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Checkpoint {
        path: path.to_owned(),
        message: msg.to_owned(),
    };
    let mut lines = text.lines();
    if lines.next() != Some("mlp v1") {
        return Err(bad("missing `mlp v1` header"));
    }
    let dims: Vec<usize> = lines
        .next()
        .and_then(|l| l.strip_prefix("dims"))
        .ok_or_else(|| bad("missing dims line"))?
        .split_whitespace()
        .map(|p| p.parse().map_err(|_| bad("bad dimension")))
        .collect::<Result<_>>()?;
    let activations: Vec<Activation> = lines
        .next()
        .and_then(|l| l.strip_prefix("activations"))
        .ok_or_else(|| bad("missing activations line"))?
        .split_whitespace()
        .map(|p| p.parse().map_err(|e: String| bad(&e)))
        .collect::<Result<_>>()?;
    if dims.len() < 2 || activations.len() != dims.len() - 1 {
        return Err(bad("dims/activations mismatch"));
    }

    let mut read_row = |expected: usize| -> Result<Vec<f64>> {
        let line = lines.next().ok_or_else(|| bad("truncated parameters"))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|p| p.parse().map_err(|_| bad("bad parameter float")))
            .collect::<Result<_>>()?;
        if row.len() != expected {
            return Err(bad("parameter row has wrong width"));
        }
        Ok(row)
    };

    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (pair, &activation) in dims.windows(2).zip(&activations) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let mut weights = Vec::with_capacity(fan_out);
        for _ in 0..fan_out {
            weights.push(read_row(fan_in)?);
        }
        let bias = read_row(fan_out)?;
        layers.push(Layer {
            weights,
            bias,
            activation,
        });
    }
    Ok(Network { layers })
}
