//! Penalized logistic regression fitted with SAGA, and a soft-margin kernel
//! SVC solved in the dual by sequential minimal optimization.
//!
//! Logistic parameters are laid out as `[θ₁, …, θ_d, θ₀]`. The loss is the
//! summed negative log-likelihood plus `λ·R(θ)` with `λ = 1/C`, where
//! `R = ‖θ‖₁` for L1 and `R = ½‖θ‖²` for L2; the intercept is never
//! penalized.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{check_labels, check_width, Classifier};
use crate::error::{Error, Result};
use crate::optim::{saga_minimize, FiniteSum, Penalty, SagaConfig};

/// Logistic function, branching on sign so neither side overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const PROB_CLAMP: f64 = 1e-12;

fn linear_predictor(params: &[f64], row: ArrayView1<'_, f64>) -> f64 {
    let d = params.len() - 1;
    row.iter().zip(&params[..d]).map(|(x, t)| x * t).sum::<f64>() + params[d]
}

/// Summed NLL plus `λ·R(θ)` and the gradient of its smooth part.
/// The L1 term contributes to the loss only; L2 contributes to both.
pub fn logreg_nll(
    params: &[f64],
    x: ArrayView2<'_, f64>,
    labels: &[u8],
    penalty: Penalty,
    lambda: f64,
) -> (f64, Vec<f64>) {
    let d = x.ncols();
    assert_eq!(params.len(), d + 1, "params must hold d coefficients and an intercept");
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (row, &y) in x.rows().into_iter().zip(labels) {
        let h = sigmoid(linear_predictor(params, row)).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let y = f64::from(y);
        loss -= y * h.ln() + (1.0 - y) * (1.0 - h).ln();
        let r = h - y;
        for (g, v) in grad.iter_mut().zip(row.iter()) {
            *g += r * v;
        }
        grad[d] += r;
    }
    let theta = &params[..d];
    match penalty {
        Penalty::None => {}
        Penalty::L1 => loss += lambda * theta.iter().map(|t| t.abs()).sum::<f64>(),
        Penalty::L2 => {
            loss += 0.5 * lambda * theta.iter().map(|t| t * t).sum::<f64>();
            for (g, t) in grad.iter_mut().zip(theta) {
                *g += lambda * t;
            }
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub penalty: Penalty,
    /// Inverse regularization strength, `λ = 1/C`.
    pub c: f64,
    /// Epoch cap; `None` picks 4000 with a penalty and 3000 without.
    pub max_iter: Option<usize>,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { penalty: Penalty::L2, c: 1.0, max_iter: None, tol: 1e-4, seed: 0 }
    }
}

impl LogRegConfig {
    pub fn effective_max_iter(&self) -> usize {
        self.max_iter.unwrap_or(if self.penalty == Penalty::None { 3000 } else { 4000 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub epochs: usize,
    pub converged: bool,
}

/// The mean-loss view of the logistic objective consumed by SAGA.
struct LogisticSum<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
}

impl FiniteSum for LogisticSum<'_> {
    fn n_examples(&self) -> usize {
        self.x.nrows()
    }

    fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    fn example_gradient(&self, params: &[f64], i: usize, out: &mut [f64]) {
        let row = self.x.row(i);
        let r = sigmoid(linear_predictor(params, row)) - f64::from(self.y[i]);
        for (o, v) in out.iter_mut().zip(row.iter()) {
            *o = r * v;
        }
        out[self.x.ncols()] = r;
    }

    fn is_penalized(&self, k: usize) -> bool {
        k < self.x.ncols()
    }
}

pub fn logreg_fit(x: ArrayView2<'_, f64>, labels: &[u8], config: &LogRegConfig) -> Result<LogRegModel> {
    check_labels(x.nrows(), labels)?;
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(Error::usage(format!("C = {} must be positive", config.c)));
    }
    let n = x.nrows();
    let ones = labels.iter().filter(|&&y| y == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::usage("logistic regression needs both classes"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("feature matrix contains non-finite values"));
    }
    // Dividing the summed objective by n turns λ into λ/n.
    let lambda = if config.penalty == Penalty::None { 0.0 } else { 1.0 / (config.c * n as f64) };
    let max_sq = x.rows().into_iter().map(|r| r.dot(&r)).fold(0.0, f64::max);
    let mut lipschitz = 0.25 * (max_sq + 1.0);
    if config.penalty == Penalty::L2 {
        lipschitz += lambda;
    }
    let saga = SagaConfig {
        step_size: 1.0 / (3.0 * lipschitz),
        lambda,
        penalty: config.penalty,
        max_iter: config.effective_max_iter(),
        tol: config.tol,
        seed: config.seed,
    };
    let objective = LogisticSum { x, y: labels };
    let out = saga_minimize(&saga, &objective, &vec![0.0; x.ncols() + 1])?;
    let d = x.ncols();
    Ok(LogRegModel {
        theta: out.params[..d].to_vec(),
        intercept: out.params[d],
        epochs: out.epochs,
        converged: out.converged,
    })
}

impl LogRegModel {
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.theta.clone();
        p.push(self.intercept);
        p
    }
}

pub fn logreg_predict_proba(model: &LogRegModel, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    check_width(model.theta.len(), x)?;
    let p = model.params();
    Ok(x.rows().into_iter().map(|r| sigmoid(linear_predictor(&p, r))).collect())
}

impl Classifier for LogRegModel {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        logreg_predict_proba(self, x)
    }

    fn threshold(&self) -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

pub fn kernel_eval(kernel: Kernel, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::usage(format!("kernel arguments differ in length: {} vs {}", a.len(), b.len())));
    }
    Ok(kernel_raw(kernel, a, b))
}

fn kernel_raw(kernel: Kernel, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Kernel::Rbf { gamma } => {
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * sq).exp()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcConfig {
    pub c: f64,
    pub kernel: Kernel,
    /// Stop once the maximal violating pair differs by at most this.
    pub tol: f64,
    /// Pair-update budget, in multiples of the training size.
    pub max_passes: usize,
}

impl Default for SvcConfig {
    fn default() -> Self {
        SvcConfig { c: 1.0, kernel: Kernel::Rbf { gamma: 0.1 }, tol: 1e-3, max_passes: 100 }
    }
}

/// Dual multipliers `a` and everything derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub a: Vec<f64>,
    pub bias: f64,
    /// Indices with `a_i > 0`.
    pub support: Vec<usize>,
    /// `Σ a_i y_i x_i`, for the linear kernel only.
    pub theta: Option<Vec<f64>>,
    /// Training decision values `f(x_i)` including the bias.
    pub train_decision: Vec<f64>,
    pub c: f64,
    pub kernel: Kernel,
    pub iterations: usize,
    pub converged: bool,
}

fn signed(y: u8) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

fn gram(x: ArrayView2<'_, f64>, kernel: Kernel) -> Vec<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = kernel_raw(kernel, &rows[i], &rows[j]);
        }
    });
    k
}

/// Dual objective `Σa − ½ Σ a_i y_i F_i` where `F = Σ_j a_j y_j K_·j`.
fn dual_value(a: &[f64], y: &[f64], f: &[f64]) -> f64 {
    a.iter().sum::<f64>() - 0.5 * a.iter().zip(y).zip(f).map(|((a, y), f)| a * y * f).sum::<f64>()
}

pub fn svc_fit(x: ArrayView2<'_, f64>, labels: &[u8], config: &SvcConfig) -> Result<DualSolution> {
    Ok(svc_fit_traced(x, labels, config, false)?.0)
}

/// As [`svc_fit`], optionally recording the dual objective after every
/// pair update.
pub fn svc_fit_traced(
    x: ArrayView2<'_, f64>,
    labels: &[u8],
    config: &SvcConfig,
    trace: bool,
) -> Result<(DualSolution, Vec<f64>)> {
    check_labels(x.nrows(), labels)?;
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(Error::usage(format!("C = {} must be positive", config.c)));
    }
    if let Kernel::Rbf { gamma } = config.kernel {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::usage(format!("gamma = {gamma} must be positive")));
        }
    }
    if !(config.tol > 0.0) {
        return Err(Error::usage("SVC tolerance must be positive"));
    }
    let n = x.nrows();
    let ones = labels.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::usage("SVC needs both classes"));
    }
    let c = config.c;
    let y: Vec<f64> = labels.iter().map(|&v| signed(v)).collect();
    let k = gram(x, config.kernel);
    let mut a = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut values = Vec::new();
    let budget = config.max_passes.saturating_mul(n);
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y < 0.0 && a < c) || (y > 0.0 && a > 0.0);

    let mut iterations = 0;
    let mut converged = false;
    let (mut m, mut big_m);
    loop {
        // Maximal violating pair over y − F; first index wins ties.
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        m = f64::NEG_INFINITY;
        big_m = f64::INFINITY;
        for t in 0..n {
            let v = y[t] - f[t];
            if in_up(a[t], y[t]) && v > m {
                m = v;
                i = t;
            }
            if in_low(a[t], y[t]) && v < big_m {
                big_m = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || m - big_m <= config.tol {
            converged = true;
            break;
        }
        if iterations >= budget {
            break;
        }
        iterations += 1;

        let eta = (k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j]).max(1e-12);
        let (ai, aj) = (a[i], a[j]);
        let (lo, hi) = if y[i] != y[j] {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        let e_i = f[i] - y[i];
        let e_j = f[j] - y[j];
        let aj_new = (aj + y[j] * (e_i - e_j) / eta).clamp(lo, hi);
        let mut ai_new = ai + y[i] * y[j] * (aj - aj_new);
        // Snap round-off at the box edges.
        if ai_new < 1e-15 * c {
            ai_new = 0.0;
        } else if ai_new > c * (1.0 - 1e-15) {
            ai_new = c;
        }
        let (di, dj) = ((ai_new - ai) * y[i], (aj_new - aj) * y[j]);
        a[i] = ai_new;
        a[j] = aj_new;
        let (ki, kj) = (&k[i * n..(i + 1) * n], &k[j * n..(j + 1) * n]);
        for t in 0..n {
            f[t] += di * ki[t] + dj * kj[t];
        }
        if trace {
            values.push(dual_value(&a, &y, &f));
        }
    }

    let free: Vec<usize> = (0..n).filter(|&t| a[t] > 0.0 && a[t] < c).collect();
    let bias = if free.is_empty() {
        0.5 * (m + big_m)
    } else {
        free.iter().map(|&t| y[t] - f[t]).sum::<f64>() / free.len() as f64
    };
    let support: Vec<usize> = (0..n).filter(|&t| a[t] > 0.0).collect();
    let theta = (config.kernel == Kernel::Linear).then(|| {
        let mut th = vec![0.0; x.ncols()];
        for &t in &support {
            for (o, v) in th.iter_mut().zip(x.row(t).iter()) {
                *o += a[t] * y[t] * v;
            }
        }
        th
    });
    let train_decision = f.iter().map(|v| v + bias).collect();
    Ok((
        DualSolution {
            a,
            bias,
            support,
            theta,
            train_decision,
            c,
            kernel: config.kernel,
            iterations,
            converged,
        },
        values,
    ))
}

impl DualSolution {
    pub fn dual_objective(&self, labels: &[u8]) -> f64 {
        let y: Vec<f64> = labels.iter().map(|&v| signed(v)).collect();
        let f: Vec<f64> = self.train_decision.iter().map(|v| v - self.bias).collect();
        dual_value(&self.a, &y, &f)
    }

    /// Check the box, the equality constraint and the complementary
    /// slackness conditions at tolerance `tol`.
    pub fn kkt_satisfied(&self, labels: &[u8], tol: f64) -> bool {
        let balance: f64 = self.a.iter().zip(labels).map(|(a, &y)| a * signed(y)).sum();
        if balance.abs() > 1e-8 {
            return false;
        }
        self.a.iter().zip(labels).zip(&self.train_decision).all(|((&a, &y), &f)| {
            let margin = signed(y) * f;
            if a < 0.0 || a > self.c {
                false
            } else if a == 0.0 {
                margin >= 1.0 - tol
            } else if a < self.c {
                (margin - 1.0).abs() <= tol
            } else {
                margin <= 1.0 + tol
            }
        })
    }
}

/// `Σ a_i y_i κ(x_i, x) + θ₀` against the training matrix used to fit.
pub fn svc_decision(
    solution: &DualSolution,
    train: ArrayView2<'_, f64>,
    labels: &[u8],
    rows: ArrayView2<'_, f64>,
) -> Result<Array1<f64>> {
    check_width(train.ncols(), rows)?;
    if train.nrows() != solution.a.len() || labels.len() != solution.a.len() {
        return Err(Error::usage("training data does not match the dual solution"));
    }
    let model = SvcModel::from_solution(solution, train, labels);
    model.score(rows)
}

/// Support vectors with their signed multipliers, enough to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub kernel: Kernel,
    pub support_vectors: Array2<f64>,
    /// `a_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub theta: Option<Vec<f64>>,
    pub converged: bool,
    pub kkt_satisfied: bool,
}

impl SvcModel {
    pub fn from_solution(solution: &DualSolution, train: ArrayView2<'_, f64>, labels: &[u8]) -> Self {
        let sv = train.select(ndarray::Axis(0), &solution.support);
        let dual_coef = solution.support.iter().map(|&t| solution.a[t] * signed(labels[t])).collect();
        SvcModel {
            kernel: solution.kernel,
            support_vectors: sv,
            dual_coef,
            bias: solution.bias,
            theta: solution.theta.clone(),
            converged: solution.converged,
            kkt_satisfied: solution.kkt_satisfied(labels, 1e-3),
        }
    }

    pub fn fit(x: ArrayView2<'_, f64>, labels: &[u8], config: &SvcConfig) -> Result<Self> {
        let sol = svc_fit(x, labels, config)?;
        let mut model = SvcModel::from_solution(&sol, x, labels);
        model.kkt_satisfied = sol.kkt_satisfied(labels, config.tol + 1e-9);
        Ok(model)
    }
}

impl Classifier for SvcModel {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_width(self.support_vectors.ncols(), x)?;
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let svs: Vec<Vec<f64>> = self.support_vectors.rows().into_iter().map(|r| r.to_vec()).collect();
        let out: Vec<f64> = rows
            .par_iter()
            .map(|r| {
                svs.iter().zip(&self.dual_coef).map(|(s, c)| c * kernel_raw(self.kernel, s, r)).sum::<f64>()
                    + self.bias
            })
            .collect();
        Ok(Array1::from(out))
    }

    fn threshold(&self) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(40.0) - 1.0).abs() < 1e-15);
        assert!((sigmoid(3.7) + sigmoid(-3.7) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-1e3) >= 0.0 && sigmoid(1e3) <= 1.0);
    }

    #[test]
    fn nll_at_zero() {
        let x = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0], [-2.0, 1.0]];
        let y = [0, 1, 0, 1];
        let (loss, _) = logreg_nll(&[0.0; 3], x.view(), &y, Penalty::None, 0.0);
        assert!((loss - 4.0 * 2f64.ln()).abs() < 1e-12);
        for p in [Penalty::L1, Penalty::L2] {
            assert_eq!(logreg_nll(&[0.0; 3], x.view(), &y, p, 5.0).0, loss);
        }
    }

    #[test]
    fn proba_edges() {
        let m = LogRegModel { theta: vec![0.0, 0.0], intercept: 0.0, epochs: 0, converged: true };
        let x = array![[1.0, 2.0], [-3.0, 4.0]];
        assert_eq!(logreg_predict_proba(&m, x.view()).unwrap().to_vec(), vec![0.5, 0.5]);
        let m = LogRegModel { intercept: 40.0, ..m };
        assert!(logreg_predict_proba(&m, x.view()).unwrap().iter().all(|p| (p - 1.0).abs() < 1e-15));
        let m = LogRegModel { theta: vec![1.0], intercept: 0.0, epochs: 0, converged: true };
        assert_eq!(logreg_predict_proba(&m, array![[0.0]].view()).unwrap()[0], 0.5);
        assert!(logreg_predict_proba(&m, x.view()).is_err());
    }

    #[test]
    fn kernels() {
        let k = Kernel::Rbf { gamma: 0.1 };
        assert_eq!(kernel_eval(k, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        let d = kernel_eval(k, &[0.0, 0.0], &[1.0, 3.0]).unwrap();
        assert!((d - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(kernel_eval(Kernel::Linear, &[1.0, 0.0], &[0.0, 5.0]).unwrap(), 0.0);
        assert!(kernel_eval(Kernel::Linear, &[1.0], &[0.0, 5.0]).is_err());
    }

    fn two_points(c: f64) -> DualSolution {
        let x = array![[0.0], [2.0]];
        svc_fit(x.view(), &[0, 1], &SvcConfig { c, kernel: Kernel::Linear, ..SvcConfig::default() }).unwrap()
    }

    #[test]
    fn two_point_dual() {
        let s = two_points(1.0);
        assert!((s.a[0] - 0.5).abs() < 1e-12 && (s.a[1] - 0.5).abs() < 1e-12);
        assert!((s.theta.as_ref().unwrap()[0] - 1.0).abs() < 1e-12);
        assert!((s.bias + 1.0).abs() < 1e-12);
        let x = array![[0.0], [2.0]];
        let dec = svc_decision(&s, x.view(), &[0, 1], array![[1.0], [3.0]].view()).unwrap();
        assert!(dec[0].abs() < 1e-12 && (dec[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_box_active() {
        let s = two_points(0.1);
        assert!((s.a[0] - 0.1).abs() < 1e-15 && (s.a[1] - 0.1).abs() < 1e-15);
        assert!((s.bias + 0.2).abs() < 1e-12);
        assert!(s.kkt_satisfied(&[0, 1], 1e-9));
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[0.0], [2.0]];
        assert!(matches!(svc_fit(x.view(), &[1, 1], &SvcConfig::default()), Err(Error::Usage(_))));
        assert!(matches!(logreg_fit(x.view(), &[0, 0], &LogRegConfig::default()), Err(Error::Usage(_))));
    }
}
