//! Feed-forward network with exact backpropagation and Adam.
//!
//! Inputs are processed in batches laid out row-wise (`batch × features`).
//! Parameter gradients follow the batch-mean convention: [`MlpNetwork::backward`]
//! returns the gradient of `mean_k ℓ_k` where `∂ℓ_k/∂out_k` is row `k` of the
//! supplied output gradient, so the learning rate does not depend on the
//! batch size. The input gradient it returns is per sample, `∂ℓ_k/∂in_k`.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const CHECKPOINT_FORMAT: &str = "mtom-mlp-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Linear,
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
    ];

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `fan_in × fan_out`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
    /// Bumped by every parameter update; forward caches record it.
    revision: u64,
}

/// Intermediates of one forward pass, consumed by [`MlpNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache always holds at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl MlpNetwork {
    /// Hidden layers use `hidden`, the last layer `output`.
    pub fn init(dims: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        let n_layers = dims.len().saturating_sub(1);
        let acts: Vec<Activation> = (0..n_layers)
            .map(|i| if i + 1 == n_layers { output } else { hidden })
            .collect();
        Self::with_activations(dims, &acts, seed)
    }

    /// Uniform fan-in initialization: weights ~ U(−a, a) with
    /// `a = √(6/fan_in)` for ReLU layers and `√(3/fan_in)` otherwise, zero
    /// biases. Identical seeds give bit-identical parameters.
    pub fn with_activations(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(invalid!("need at least input and output dims, got {dims:?}"));
        }
        if dims.contains(&0) {
            return Err(invalid!("zero-size layer in {dims:?}"));
        }
        if activations.len() != dims.len() - 1 {
            return Err(invalid!(
                "{} activations for {} layers",
                activations.len(),
                dims.len() - 1
            ));
        }
        let mut rng = crate::rng::stream(seed, 0);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let gain = if activation == Activation::Relu { 6.0 } else { 3.0 };
                let limit = (gain / fan_in as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(Self { layers, revision: 0 })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid!("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(invalid!(
                    "layer output {} does not feed next layer input {}",
                    pair[0].fan_out(),
                    pair[1].fan_in()
                ));
            }
        }
        for l in &layers {
            if l.bias.len() != l.fan_out() || l.fan_in() == 0 || l.fan_out() == 0 {
                return Err(invalid!("inconsistent layer shapes"));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Numeric("non-finite parameter".into()));
            }
        }
        Ok(Self { layers, revision: 0 })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.revision += 1;
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].fan_in())
            .chain(self.layers.iter().map(Layer::fan_out))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::fan_out).unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters flattened layer by layer (weights row-major, then bias).
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Forward pass over a batch, keeping the intermediates for backward.
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        if input.ncols() != self.input_dim() {
            return Err(invalid!(
                "input width {} does not match network input {}",
                input.ncols(),
                self.input_dim()
            ));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut outputs = Vec::with_capacity(n);
        let mut current = input.to_owned();
        for layer in &self.layers {
            let z = current.dot(&layer.weights) + &layer.bias;
            let a = z.mapv(|v| layer.activation.apply(v));
            inputs.push(current);
            pre.push(z);
            current = a.clone();
            outputs.push(a);
        }
        Ok(ForwardCache {
            revision: self.revision,
            inputs,
            pre,
            outputs,
        })
    }

    /// Output only; no cache retained.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(input)?.outputs.pop().expect("non-empty"))
    }

    /// Backpropagates `grad_output` (batch × outputs). Returns the batch-mean
    /// parameter gradients and the per-sample input gradient.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if cache.revision != self.revision || cache.inputs.len() != self.layers.len() {
            return Err(Error::InvalidState(
                "forward cache does not belong to the current parameters".into(),
            ));
        }
        let batch = cache.batch_size();
        if grad_output.dim() != (batch, self.output_dim()) {
            return Err(invalid!(
                "output gradient shape {:?} does not match ({batch}, {})",
                grad_output.dim(),
                self.output_dim()
            ));
        }
        let inv_batch = 1.0 / batch as f64;
        let n = self.layers.len();
        let mut grads = Gradients {
            weights: Vec::with_capacity(n),
            biases: Vec::with_capacity(n),
        };
        let mut delta = grad_output.to_owned();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            if act != Activation::Linear {
                ndarray::Zip::from(&mut delta)
                    .and(&cache.pre[li])
                    .and(&cache.outputs[li])
                    .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            }
            let mut gw = cache.inputs[li].t().dot(&delta);
            gw *= inv_batch;
            let gb = delta.sum_axis(Axis(0)) * inv_batch;
            grads.weights.push(gw);
            grads.biases.push(gb);
            delta = delta.dot(&layer.weights.t());
        }
        grads.weights.reverse();
        grads.biases.reverse();
        Ok((grads, delta))
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            layers: self.layers.clone(),
        };
        let text = serde_json::to_string(&doc).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        if doc.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unexpected format tag {:?}", doc.format)));
        }
        Self::from_layers(doc.layers).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    layers: Vec<Layer>,
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Gradients,
    second: Gradients,
}

impl OptimizerState {
    pub fn new(net: &MlpNetwork, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one Adam update to `net`.
    pub fn step(&mut self, net: &mut MlpNetwork, grads: &Gradients) -> Result<()> {
        let shapes_match = |g: &Gradients| {
            g.weights.len() == net.layers.len()
                && g.weights
                    .iter()
                    .zip(&net.layers)
                    .all(|(w, l)| w.raw_dim() == l.weights.raw_dim())
                && g.biases
                    .iter()
                    .zip(&net.layers)
                    .all(|(b, l)| b.raw_dim() == l.bias.raw_dim())
        };
        if !shapes_match(grads) || !shapes_match(&self.first) {
            return Err(invalid!("gradient shapes do not match the network"));
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let lr = self.learning_rate;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (li, layer) in net.layers.iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.weights)
                .and(&grads.weights[li])
                .and(&mut self.first.weights[li])
                .and(&mut self.second.weights[li])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&grads.biases[li])
                .and(&mut self.first.biases[li])
                .and(&mut self.second.biases[li])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        net.revision += 1;
        Ok(())
    }
}
