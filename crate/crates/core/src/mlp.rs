//! Feed-forward network with a single sigmoid output, trained by
//! backpropagation and adam over seeded mini-batches.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{check_labels, check_width, Classifier};
use crate::error::{Error, Result};
use crate::linear_margin::sigmoid;
use crate::optim::{first_order_step, minibatch_iter, FirstOrderConfig, OptimizerKind, OptimizerState};
use crate::rng::{derive_seed, rng_from_seed};

const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation and activation.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation) -> Self {
        LayerSpec { units, activation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `units × fan_in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Hidden layers followed by the single sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// Zero-filled network for input width `d`.
    pub fn zeros(d: usize, hidden: &[LayerSpec]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = d;
        for spec in hidden.iter().copied().chain([LayerSpec::new(1, Activation::Sigmoid)]) {
            layers.push(Layer {
                weights: Array2::zeros((spec.units, fan_in)),
                bias: Array1::zeros(spec.units),
                activation: spec.activation,
            });
            fan_in = spec.units;
        }
        MlpParams { layers }
    }

    /// Glorot-uniform weights on `[−r, r]`, `r = √(6/(fan_in+fan_out))`;
    /// biases start at zero.
    pub fn glorot(d: usize, hidden: &[LayerSpec], seed: u64) -> Self {
        let mut params = MlpParams::zeros(d, hidden);
        let mut rng = rng_from_seed(seed);
        for layer in &mut params.layers {
            let (out, inp) = layer.weights.dim();
            let r = (6.0 / (inp + out) as f64).sqrt();
            layer.weights.mapv_inplace(|_| rng.gen_range(-r..=r));
        }
        params
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights (row-major) then bias, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn assign(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut at = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = flat[at];
                at += 1;
            }
            for b in l.bias.iter_mut() {
                *b = flat[at];
                at += 1;
            }
        }
    }
}

/// Per-layer pre-activations `z` and activations `a`; `a[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub z: Vec<Array2<f64>>,
    pub a: Vec<Array2<f64>>,
}

pub fn forward(params: &MlpParams, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, ForwardCache)> {
    check_width(params.input_width(), x)?;
    let mut z_all = Vec::with_capacity(params.layers.len());
    let mut a_all = vec![x.to_owned()];
    for layer in &params.layers {
        let prev = a_all.last().expect("input is always present");
        let z = prev.dot(&layer.weights.t()) + &layer.bias;
        let a = z.mapv(|v| layer.activation.apply(v));
        z_all.push(z);
        a_all.push(a);
    }
    let out = a_all.last().expect("output layer").column(0).to_owned();
    Ok((out, ForwardCache { z: z_all, a: a_all }))
}

/// Mean binary cross-entropy of `probs` against `labels`.
pub fn cross_entropy(probs: &Array1<f64>, labels: &[u8]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / labels.len() as f64
}

/// Gradients of the mean cross-entropy, shaped like `params`.
pub fn backward(params: &MlpParams, cache: &ForwardCache, labels: &[u8]) -> Result<MlpParams> {
    let b = labels.len();
    let out = cache.a.last().expect("output activations");
    if out.nrows() != b {
        return Err(Error::usage(format!("{b} labels for a batch of {}", out.nrows())));
    }
    let mut grads = params.clone();
    let y = Array2::from_shape_fn((b, 1), |(i, _)| f64::from(labels[i]));
    // Sigmoid output with cross-entropy collapses to (a − y)/B.
    let mut delta = (out - &y) / b as f64;
    for l in (0..params.layers.len()).rev() {
        let a_prev = &cache.a[l];
        grads.layers[l].weights = delta.t().dot(a_prev);
        grads.layers[l].bias = delta.sum_axis(Axis(0));
        if l > 0 {
            let below = &params.layers[l - 1];
            let back = delta.dot(&params.layers[l].weights);
            let z = &cache.z[l - 1];
            let a = &cache.a[l];
            delta = Array2::from_shape_fn(back.dim(), |(i, j)| {
                back[[i, j]] * below.activation.derivative(z[[i, j]], a[[i, j]])
            });
        }
    }
    Ok(grads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<LayerSpec>,
    pub epochs: usize,
    /// Clipped to the number of training rows.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![LayerSpec::new(4, Activation::Tanh), LayerSpec::new(2, Activation::Tanh)],
            epochs: 1000,
            batch_size: 200,
            learning_rate: 0.001,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    /// Mean training loss over each epoch's batches.
    pub loss_trace: Vec<f64>,
}

pub fn mlp_train(x: ArrayView2<'_, f64>, labels: &[u8], config: &MlpConfig) -> Result<MlpModel> {
    check_labels(x.nrows(), labels)?;
    let n = x.nrows();
    let ones = labels.iter().filter(|&&y| y == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::usage("network training needs both classes"));
    }
    if config.hidden.iter().any(|l| l.units == 0) {
        return Err(Error::usage("every hidden layer needs at least one unit"));
    }
    if config.batch_size == 0 {
        return Err(Error::usage("batch size must be at least 1"));
    }
    let opt = FirstOrderConfig::new(OptimizerKind::Adam).with_learning_rate(config.learning_rate);
    opt.validate()?;
    let mut params = MlpParams::glorot(x.ncols(), &config.hidden, derive_seed(config.seed, 0));
    let mut flat = params.flatten();
    let mut state = OptimizerState::new(flat.len());
    let mut batches = minibatch_iter(n, config.batch_size.min(n), derive_seed(config.seed, 1))?;
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let epoch = batches.next().expect("mini-batch epochs never run out");
        let mut total = 0.0;
        for rows in &epoch {
            let xb = x.select(Axis(0), rows);
            let yb: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
            let (probs, cache) = forward(&params, xb.view())?;
            total += cross_entropy(&probs, &yb) * rows.len() as f64;
            let grads = backward(&params, &cache, &yb)?;
            first_order_step(&opt, &mut state, &mut flat, &grads.flatten())?;
            params.assign(&flat);
        }
        let loss = total / n as f64;
        if !loss.is_finite() {
            return Err(Error::numeric("training loss is not finite"));
        }
        loss_trace.push(loss);
    }
    Ok(MlpModel { params, loss_trace })
}

pub fn mlp_predict(params: &MlpParams, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
    let (probs, _) = forward(params, x)?;
    Ok(probs.iter().map(|&p| u8::from(p > 0.5)).collect())
}

impl Classifier for MlpModel {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(forward(&self.params, x)?.0)
    }

    fn threshold(&self) -> f64 {
        0.5
    }
}
