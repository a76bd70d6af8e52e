//! Minimal fully-connected network stack with analytic forward/backward
//! passes and plain SGD. Everything is f64 so gradient checks can be tight.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Softplus,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Softplus => softplus(z),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation z.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Softplus => sigmoid(z),
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(z: f64) -> f64 {
    // Numerically stable ln(1 + e^z).
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

/// One dense layer: weights stored row-major, `output_dim` rows of
/// `input_dim` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    #[serde(rename = "in")]
    pub input_dim: usize,
    #[serde(rename = "out")]
    pub output_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetParams {
    pub layers: Vec<Layer>,
}

/// Same shape as `NetParams`, holding gradients.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>, // (d_weights, d_bias) per layer
}

/// Per-layer records kept by `forward` for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl NetParams {
    /// Glorot-uniform weights, zero biases, seeded via the caller's rng.
    pub fn init(specs: &[LayerSpec], rng: &mut ChaCha8Rng) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in specs.windows(2) {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(Error::Config(format!(
                    "layer dims incompatible: {} -> {}",
                    pair[0].output_dim, pair[1].input_dim
                )));
            }
        }
        let layers = specs
            .iter()
            .map(|spec| {
                if spec.input_dim == 0 || spec.output_dim == 0 {
                    return Err(Error::Config("layer dims must be positive".into()));
                }
                let limit = (6.0 / (spec.input_dim + spec.output_dim) as f64).sqrt();
                let weights = (0..spec.input_dim * spec.output_dim)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect();
                Ok(Layer {
                    input_dim: spec.input_dim,
                    output_dim: spec.output_dim,
                    activation: spec.activation,
                    weights,
                    bias: vec![0.0; spec.output_dim],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NetParams { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Cache)> {
        if x.len() != self.input_dim() {
            return Err(Error::Usage(format!(
                "input length {} does not match first layer input dim {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.bias.clone();
            for (row, zi) in z.iter_mut().enumerate() {
                let w = &layer.weights[row * layer.input_dim..(row + 1) * layer.input_dim];
                for (wij, xj) in w.iter().zip(&current) {
                    *zi += wij * xj;
                }
            }
            let y: Vec<f64> = z.iter().map(|&zi| layer.activation.apply(zi)).collect();
            inputs.push(current);
            pre_activations.push(z);
            current = y;
        }
        Ok((current, Cache { inputs, pre_activations }))
    }

    /// Reverse-mode gradients. Returns gradients for every layer plus the
    /// cotangent with respect to the network input.
    pub fn backward(&self, cache: &Cache, dl_dy: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Usage("cache does not match network depth".into()));
        }
        if dl_dy.len() != self.output_dim() {
            return Err(Error::Usage("cotangent length mismatch".into()));
        }
        let mut grads = vec![(Vec::new(), Vec::new()); self.layers.len()];
        let mut upstream = dl_dy.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[idx];
            let input = &cache.inputs[idx];
            if z.len() != layer.output_dim || input.len() != layer.input_dim {
                return Err(Error::Usage("stale cache for this network".into()));
            }
            // dL/dz = dL/dy * activation'(z)
            let dz: Vec<f64> = upstream
                .iter()
                .zip(z)
                .map(|(u, &zi)| u * layer.activation.derivative(zi))
                .collect();
            let mut dw = vec![0.0; layer.weights.len()];
            for (row, dzi) in dz.iter().enumerate() {
                for (col, xj) in input.iter().enumerate() {
                    dw[row * layer.input_dim + col] = dzi * xj;
                }
            }
            let mut dx = vec![0.0; layer.input_dim];
            for (row, dzi) in dz.iter().enumerate() {
                let w = &layer.weights[row * layer.input_dim..(row + 1) * layer.input_dim];
                for (col, wij) in w.iter().enumerate() {
                    dx[col] += dzi * wij;
                }
            }
            grads[idx] = (dw, dz);
            upstream = dx;
        }
        Ok((Gradients { layers: grads }, upstream))
    }

    /// Plain SGD: w <- w - alpha * g. Rejects non-finite gradients.
    pub fn sgd_step(&mut self, grads: &Gradients, alpha: f64) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Usage("gradient shape mismatch".into()));
        }
        for (layer, (dw, db)) in self.layers.iter().zip(&grads.layers) {
            if dw.len() != layer.weights.len() || db.len() != layer.bias.len() {
                return Err(Error::Usage("gradient shape mismatch".into()));
            }
            if dw.iter().chain(db.iter()).any(|g| !g.is_finite()) {
                return Err(Error::Numeric("non-finite gradient, update rejected".into()));
            }
        }
        for (layer, (dw, db)) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.weights.iter_mut().zip(dw) {
                *w -= alpha * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(db) {
                *b -= alpha * g;
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flat view of all parameters, weights then bias per layer. Used by
    /// finite-difference checks and tests.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn unflatten_into(&mut self, flat: &[f64]) {
        let mut i = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[i..i + nw]);
            i += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[i..i + nb]);
            i += nb;
        }
        assert_eq!(i, flat.len());
    }
}

impl Gradients {
    pub fn zeros_like(params: &NetParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for ((dw, db), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in dw.iter_mut().zip(ow) {
                *a += scale * b;
            }
            for (a, b) in db.iter_mut().zip(ob) {
                *a += scale * b;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (dw, db) in &self.layers {
            out.extend_from_slice(dw);
            out.extend_from_slice(db);
        }
        out
    }
}
