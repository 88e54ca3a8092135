//! First-order optimizers (gradient descent, momentum, Nesterov, adagrad,
//! RMSProp, adam), the SAGA incremental-gradient method with proximal L1,
//! and seeded mini-batch iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, index, permutation, rng_from_seed, Rng64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Gd,
    Momentum,
    Nesterov,
    Adagrad,
    RmsProp,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Gd,
        OptimizerKind::Momentum,
        OptimizerKind::Nesterov,
        OptimizerKind::Adagrad,
        OptimizerKind::RmsProp,
        OptimizerKind::Adam,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Momentum coefficient for momentum and Nesterov.
    pub beta: f64,
    /// RMSProp decay.
    pub gamma: f64,
    /// Adam first-moment decay.
    pub gamma_v: f64,
    /// Adam second-moment decay.
    pub gamma_s: f64,
    pub eps: f64,
}

impl FirstOrderConfig {
    /// Defaults: learning rate 0.001 for adam, 0.01 for adagrad, 0.1 otherwise.
    pub fn new(kind: OptimizerKind) -> Self {
        let learning_rate = match kind {
            OptimizerKind::Adam => 0.001,
            OptimizerKind::Adagrad => 0.01,
            _ => 0.1,
        };
        FirstOrderConfig {
            kind,
            learning_rate,
            beta: 0.9,
            gamma: 0.9,
            gamma_v: 0.9,
            gamma_s: 0.999,
            eps: 1e-8,
        }
    }

    pub fn with_learning_rate(mut self, learning_rate: f64) -> Self {
        self.learning_rate = learning_rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(unit(self.beta) && unit(self.gamma) && unit(self.gamma_v) && unit(self.gamma_s)) {
            return Err(Error::usage("decay coefficients must lie in (0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::usage("eps must be positive"));
        }
        Ok(())
    }
}

/// Mutable per-run state: velocity / first moment `v`, squared-gradient
/// accumulator `s`, and the step counter `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub velocity: Vec<f64>,
    pub accumulator: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(dim: usize) -> Self {
        OptimizerState { velocity: vec![0.0; dim], accumulator: vec![0.0; dim], t: 0 }
    }

    /// Point at which Nesterov wants its next gradient: `params + beta * v`.
    pub fn lookahead(&self, config: &FirstOrderConfig, params: &[f64]) -> Vec<f64> {
        params
            .iter()
            .zip(&self.velocity)
            .map(|(x, v)| x + config.beta * v)
            .collect()
    }
}

/// Apply one update in place.
///
/// For [`OptimizerKind::Nesterov`] the caller must pass the gradient
/// evaluated at [`OptimizerState::lookahead`], not at `params`.
pub fn first_order_step(
    config: &FirstOrderConfig,
    state: &mut OptimizerState,
    params: &mut [f64],
    grad: &[f64],
) -> Result<()> {
    if params.len() != grad.len() || state.velocity.len() != params.len() {
        return Err(Error::usage(format!(
            "length mismatch: params {}, gradient {}, state {}",
            params.len(),
            grad.len(),
            state.velocity.len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("non-finite gradient"));
    }
    let alpha = config.learning_rate;
    state.t += 1;
    match config.kind {
        OptimizerKind::Gd => {
            for (x, g) in params.iter_mut().zip(grad) {
                *x -= alpha * g;
            }
        }
        OptimizerKind::Momentum | OptimizerKind::Nesterov => {
            for ((x, v), g) in params.iter_mut().zip(&mut state.velocity).zip(grad) {
                *v = config.beta * *v - alpha * g;
                *x += *v;
            }
        }
        OptimizerKind::Adagrad => {
            for ((x, s), g) in params.iter_mut().zip(&mut state.accumulator).zip(grad) {
                *s += g * g;
                *x -= alpha * g / (config.eps + s.sqrt());
            }
        }
        OptimizerKind::RmsProp => {
            for ((x, s), g) in params.iter_mut().zip(&mut state.accumulator).zip(grad) {
                *s = config.gamma * *s + (1.0 - config.gamma) * g * g;
                *x -= alpha * g / (config.eps + s.sqrt());
            }
        }
        OptimizerKind::Adam => {
            let t = i32::try_from(state.t).unwrap_or(i32::MAX);
            let bias_v = 1.0 - config.gamma_v.powi(t);
            let bias_s = 1.0 - config.gamma_s.powi(t);
            for (((x, v), s), g) in params
                .iter_mut()
                .zip(&mut state.velocity)
                .zip(&mut state.accumulator)
                .zip(grad)
            {
                *v = config.gamma_v * *v + (1.0 - config.gamma_v) * g;
                *s = config.gamma_s * *s + (1.0 - config.gamma_s) * g * g;
                let v_hat = *v / bias_v;
                let s_hat = *s / bias_s;
                *x -= alpha * v_hat / (config.eps + s_hat.sqrt());
            }
        }
    }
    if params.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("optimizer step produced non-finite parameters"));
    }
    Ok(())
}

/// A differentiable objective returning `(loss, gradient)`.
pub trait Objective {
    fn eval(&self, params: &[f64]) -> (f64, Vec<f64>);
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    fn eval(&self, params: &[f64]) -> (f64, Vec<f64>) {
        self(params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimized {
    pub params: Vec<f64>,
    /// Loss at every evaluated iterate, starting with the initial point.
    pub trace: Vec<f64>,
    /// Number of optimizer steps taken.
    pub iterations: usize,
    pub converged: bool,
}

fn checked_eval<O: Objective + ?Sized>(objective: &O, params: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (loss, grad) = objective.eval(params);
    if grad.len() != params.len() {
        return Err(Error::usage(format!(
            "objective returned {} gradient entries for {} parameters",
            grad.len(),
            params.len()
        )));
    }
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("objective is not finite (diverged)"));
    }
    Ok((loss, grad))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Iterate [`first_order_step`] until `‖∇f‖∞ < tol` or `max_iter` steps.
pub fn minimize<O: Objective + ?Sized>(
    config: &FirstOrderConfig,
    objective: &O,
    init: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<Minimized> {
    config.validate()?;
    let mut params = init.to_vec();
    let mut state = OptimizerState::new(params.len());
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let (loss, grad) = checked_eval(objective, &params)?;
        trace.push(loss);
        if inf_norm(&grad) < tol {
            return Ok(Minimized { params, trace, iterations, converged: true });
        }
        if iterations == max_iter {
            return Ok(Minimized { params, trace, iterations, converged: false });
        }
        let step_grad = if config.kind == OptimizerKind::Nesterov {
            checked_eval(objective, &state.lookahead(config, &params))?.1
        } else {
            grad
        };
        first_order_step(config, &mut state, &mut params, &step_grad)?;
        iterations += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    None,
    L1,
    L2,
}

/// `sign(x) · max(|x| − threshold, 0)`.
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

/// Finite-sum objective `(1/n) Σ f_i(w)` with per-example gradient access.
pub trait FiniteSum: Sync {
    fn n_examples(&self) -> usize;
    fn dim(&self) -> usize;
    /// Gradient of the smooth term `f_i` at `params`, written into `out`.
    fn example_gradient(&self, params: &[f64], i: usize, out: &mut [f64]);
    /// Whether coordinate `k` is subject to the penalty (intercepts are not).
    fn is_penalized(&self, _k: usize) -> bool {
        true
    }
}

/// SAGA settings for minimizing `(1/n) Σ f_i(w) + lambda · R(w)` where
/// `R` is `‖w‖₁` (L1) or `½‖w‖²` (L2) over penalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SagaConfig {
    pub step_size: f64,
    pub lambda: f64,
    pub penalty: Penalty,
    /// Maximum number of epochs (one epoch = `n` sampled steps).
    pub max_iter: usize,
    /// Stop once no coordinate moved by more than this over an epoch.
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SagaResult {
    pub params: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

/// SAGA iterate with its table of stored per-example gradients.
pub struct Saga<'a, F: FiniteSum + ?Sized> {
    objective: &'a F,
    config: SagaConfig,
    params: Vec<f64>,
    table: Vec<f64>,
    average: Vec<f64>,
    penalized: Vec<bool>,
    scratch: Vec<f64>,
    rng: Rng64,
}

impl<'a, F: FiniteSum + ?Sized> Saga<'a, F> {
    /// Validate the configuration and fill the gradient table at `init`.
    pub fn new(objective: &'a F, config: SagaConfig, init: &[f64]) -> Result<Self> {
        if !(config.step_size > 0.0 && config.step_size.is_finite()) {
            return Err(Error::usage("SAGA step size must be positive"));
        }
        if !(config.lambda >= 0.0) || !(config.tol > 0.0) {
            return Err(Error::usage("SAGA needs lambda >= 0 and tol > 0"));
        }
        let (n, dim) = (objective.n_examples(), objective.dim());
        if n == 0 {
            return Err(Error::usage("SAGA needs at least one example"));
        }
        if init.len() != dim {
            return Err(Error::usage(format!("init has {} entries, objective has {dim}", init.len())));
        }
        let mut table = vec![0.0; n * dim];
        let mut average = vec![0.0; dim];
        for i in 0..n {
            let row = &mut table[i * dim..(i + 1) * dim];
            objective.example_gradient(init, i, row);
            for (a, g) in average.iter_mut().zip(row.iter()) {
                *a += g;
            }
        }
        for a in &mut average {
            *a /= n as f64;
        }
        let penalized = (0..dim).map(|k| objective.is_penalized(k)).collect();
        let rng = rng_from_seed(config.seed);
        Ok(Saga {
            objective,
            config,
            params: init.to_vec(),
            table,
            average,
            penalized,
            scratch: vec![0.0; dim],
            rng,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// The incrementally maintained mean of the stored gradients.
    pub fn stored_average(&self) -> &[f64] {
        &self.average
    }

    /// The mean of the stored gradients recomputed from scratch.
    pub fn recomputed_average(&self) -> Vec<f64> {
        let dim = self.params.len();
        let n = self.objective.n_examples();
        let mut avg = vec![0.0; dim];
        for row in self.table.chunks_exact(dim) {
            for (a, g) in avg.iter_mut().zip(row) {
                *a += g;
            }
        }
        avg.iter_mut().for_each(|a| *a /= n as f64);
        avg
    }

    /// One SAGA step on a uniformly sampled example.
    pub fn step(&mut self) -> Result<()> {
        let dim = self.params.len();
        let n = self.objective.n_examples();
        let j = index(&mut self.rng, n);
        self.objective.example_gradient(&self.params, j, &mut self.scratch);
        let alpha = self.config.step_size;
        let lambda = self.config.lambda;
        let stored = &mut self.table[j * dim..(j + 1) * dim];
        for k in 0..dim {
            let fresh = self.scratch[k];
            let mut direction = fresh - stored[k] + self.average[k];
            if self.config.penalty == Penalty::L2 && self.penalized[k] {
                direction += lambda * self.params[k];
            }
            let mut x = self.params[k] - alpha * direction;
            if self.config.penalty == Penalty::L1 && self.penalized[k] {
                x = soft_threshold(x, alpha * lambda);
            }
            if !x.is_finite() {
                return Err(Error::numeric("SAGA iterate is not finite"));
            }
            self.params[k] = x;
            self.average[k] += (fresh - stored[k]) / n as f64;
            stored[k] = fresh;
        }
        Ok(())
    }

    /// Run epochs until the parameter change over an epoch drops below tol.
    pub fn run(mut self) -> Result<SagaResult> {
        let n = self.objective.n_examples();
        for epoch in 1..=self.config.max_iter {
            let start = self.params.clone();
            for _ in 0..n {
                self.step()?;
            }
            let change = start
                .iter()
                .zip(&self.params)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if change < self.config.tol {
                return Ok(SagaResult { params: self.params, epochs: epoch, converged: true });
            }
        }
        Ok(SagaResult { params: self.params, epochs: self.config.max_iter, converged: false })
    }
}

pub fn saga_minimize<F: FiniteSum + ?Sized>(
    config: &SagaConfig,
    objective: &F,
    init: &[f64],
) -> Result<SagaResult> {
    if config.max_iter == 0 {
        return Ok(SagaResult { params: init.to_vec(), epochs: 0, converged: false });
    }
    Saga::new(objective, config.clone(), init)?.run()
}

/// Endless sequence of epochs, each a fresh seeded permutation of
/// `0..n_rows` cut into batches of `batch_size` (the last may be short).
#[derive(Debug, Clone)]
pub struct MiniBatches {
    n_rows: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
}

impl Iterator for MiniBatches {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut rng = rng_from_seed(derive_seed(self.seed, self.epoch));
        self.epoch += 1;
        let order = permutation(&mut rng, self.n_rows);
        Some(order.chunks(self.batch_size).map(<[usize]>::to_vec).collect())
    }
}

pub fn minibatch_iter(n_rows: usize, batch_size: usize, seed: u64) -> Result<MiniBatches> {
    if batch_size == 0 || batch_size > n_rows {
        return Err(Error::usage(format!(
            "batch size {batch_size} must lie in 1..={n_rows}"
        )));
    }
    Ok(MiniBatches { n_rows, batch_size, seed, epoch: 0 })
}
