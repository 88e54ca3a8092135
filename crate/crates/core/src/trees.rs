//! CART trees under weighted Gini, bagged and random forests, and discrete
//! AdaBoost over depth-one stumps.

use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{check_labels, check_width, majority_label, Classifier};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, index, rng_from_seed, sample_distinct, Rng64};

/// Reductions closer than this count as ties, and a split must beat it.
pub const SPLIT_TOL: f64 = 1e-12;
/// Error floor used to cap α when a stump is perfect.
pub const BOOST_EPS: f64 = 1e-10;

pub fn gini(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::usage(format!("proportion {p} outside [0, 1]")));
    }
    Ok(2.0 * p * (1.0 - p))
}

fn gini_mass(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = (pos / total).clamp(0.0, 1.0);
    2.0 * p * (1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub reduction: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Best weighted-Gini split of `rows` over `candidates`, with at least
/// `min_leaf` rows on each side. `rows` may repeat indices (bootstrap).
fn best_split_rows(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    w: &[f64],
    rows: &[usize],
    candidates: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let total: f64 = rows.iter().map(|&i| w[i]).sum();
    let pos: f64 = rows.iter().filter(|&&i| y[i] == 1).map(|&i| w[i]).sum();
    if total <= 0.0 {
        return None;
    }
    let parent = gini_mass(pos, total);
    let mut best: Option<SplitChoice> = None;
    let mut buf: Vec<(f64, u8, f64)> = Vec::with_capacity(rows.len());
    for &f in candidates {
        buf.clear();
        buf.extend(rows.iter().map(|&i| (x[[i, f]], y[i], w[i])));
        buf.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut left_w, mut left_pos) = (0.0, 0.0);
        for k in 0..buf.len() - 1 {
            left_w += buf[k].2;
            if buf[k].1 == 1 {
                left_pos += buf[k].2;
            }
            if buf[k].0 == buf[k + 1].0 {
                continue;
            }
            let n_left = k + 1;
            if n_left < min_leaf || buf.len() - n_left < min_leaf {
                continue;
            }
            let right_w = total - left_w;
            let child = (left_w / total) * gini_mass(left_pos, left_w)
                + (right_w / total) * gini_mass(pos - left_pos, right_w);
            let reduction = parent - child;
            if best.map_or(true, |b| reduction > b.reduction + SPLIT_TOL) {
                best = Some(SplitChoice { feature: f, threshold: midpoint(buf[k].0, buf[k + 1].0), reduction });
            }
        }
    }
    best.filter(|b| b.reduction > SPLIT_TOL)
}

/// Split maximizing the weighted Gini reduction over midpoints between
/// consecutive distinct values; ties go to the lower feature, then the lower
/// threshold. `None` when no split reduces the cost.
pub fn best_split(
    x: ArrayView2<'_, f64>,
    labels: &[u8],
    weights: &[f64],
    candidates: &[usize],
) -> Option<SplitChoice> {
    if x.nrows() < 2 {
        return None;
    }
    let rows: Vec<usize> = (0..x.nrows()).collect();
    best_split_rows(x, labels, weights, &rows, candidates, 1)
}

/// Arena node; children are indices into [`Tree::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf { p: f64, n: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl Tree {
    fn leaf_for(&self, row: &[f64]) -> (f64, usize) {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { p, n } => return (p, n),
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Positive fraction of the leaf reached by `row`.
    pub fn leaf_p(&self, row: &[f64]) -> f64 {
        self.leaf_for(row).0
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.leaf_p(row) > 0.5)
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Split { .. })).count()
    }
}

impl Classifier for Tree {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_width(self.n_features, x)?;
        Ok(x.rows().into_iter().map(|r| self.leaf_p(&r.to_vec())).collect())
    }

    fn threshold(&self) -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartConfig {
    /// `None` grows until the other stopping rules fire.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig { max_depth: None, min_samples_leaf: 1, min_samples_split: 2 }
    }
}

impl CartConfig {
    fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::usage("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// How candidate features are chosen at each split.
enum FeatureDraw<'a> {
    All(Vec<usize>),
    Sample { rng: &'a mut Rng64, d: usize, k: usize },
}

impl FeatureDraw<'_> {
    fn next(&mut self) -> Vec<usize> {
        match self {
            FeatureDraw::All(all) => all.clone(),
            FeatureDraw::Sample { rng, d, k } => sample_distinct(rng, *d, *k),
        }
    }
}

fn grow(
    x: ArrayView2<'_, f64>,
    y: &[u8],
    w: &[f64],
    rows: Vec<usize>,
    config: &CartConfig,
    draw: &mut FeatureDraw<'_>,
) -> Tree {
    let mut nodes = vec![TreeNode::Leaf { p: 0.0, n: 0 }];
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((id, rows, depth)) = stack.pop() {
        let total: f64 = rows.iter().map(|&i| w[i]).sum();
        let pos: f64 = rows.iter().filter(|&&i| y[i] == 1).map(|&i| w[i]).sum();
        let p = if total > 0.0 { (pos / total).clamp(0.0, 1.0) } else { 0.0 };
        let leaf = TreeNode::Leaf { p, n: rows.len() };
        let stop = config.max_depth.is_some_and(|m| depth >= m)
            || rows.len() < config.min_samples_split
            || rows.len() < 2 * config.min_samples_leaf
            || pos <= 0.0
            || pos >= total;
        let choice = if stop {
            None
        } else {
            best_split_rows(x, y, w, &rows, &draw.next(), config.min_samples_leaf)
        };
        let Some(choice) = choice else {
            nodes[id] = leaf;
            continue;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| x[[i, choice.feature]] <= choice.threshold);
        let left = nodes.len();
        nodes.push(TreeNode::Leaf { p: 0.0, n: 0 });
        nodes.push(TreeNode::Leaf { p: 0.0, n: 0 });
        nodes[id] = TreeNode::Split { feature: choice.feature, threshold: choice.threshold, left, right: left + 1 };
        // Right is pushed first so the left subtree is expanded first.
        stack.push((left + 1, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }
    Tree { nodes, n_features: x.ncols() }
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    if weights.len() != n {
        return Err(Error::usage(format!("{} weights for {n} rows", weights.len())));
    }
    if weights.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::usage("example weights must be positive and finite"));
    }
    Ok(())
}

/// Greedy CART. `weights = None` means unit weights.
pub fn cart_fit(
    x: ArrayView2<'_, f64>,
    labels: &[u8],
    weights: Option<&[f64]>,
    config: &CartConfig,
) -> Result<Tree> {
    config.validate()?;
    check_labels(x.nrows(), labels)?;
    if x.nrows() == 0 {
        return Err(Error::usage("cannot fit a tree on zero rows"));
    }
    let unit;
    let w = match weights {
        Some(w) => {
            check_weights(x.nrows(), w)?;
            w
        }
        None => {
            unit = vec![1.0; x.nrows()];
            &unit
        }
    };
    let mut draw = FeatureDraw::All((0..x.ncols()).collect());
    Ok(grow(x, labels, w, (0..x.nrows()).collect(), config, &mut draw))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidates per split; `None` means round(√d).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    pub tree: CartConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 10, max_features: None, bootstrap: true, seed: 0, tree: CartConfig::default() }
    }
}

impl ForestConfig {
    /// Bagging: every feature is a candidate at every split.
    pub fn bagging(n_trees: usize, seed: u64, d: usize) -> Self {
        ForestConfig { n_trees, max_features: Some(d), seed, ..ForestConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

pub fn forest_fit(x: ArrayView2<'_, f64>, labels: &[u8], config: &ForestConfig) -> Result<Forest> {
    config.tree.validate()?;
    check_labels(x.nrows(), labels)?;
    let (n, d) = x.dim();
    if config.n_trees == 0 {
        return Err(Error::usage("a forest needs at least one tree"));
    }
    if n == 0 || d == 0 {
        return Err(Error::usage("cannot fit a forest on an empty matrix"));
    }
    let k = config.max_features.unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1));
    if k == 0 || k > d {
        return Err(Error::usage(format!("max_features = {k} must lie in 1..={d}")));
    }
    let unit = vec![1.0; n];
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(config.seed, t as u64));
            let rows: Vec<usize> =
                if config.bootstrap { (0..n).map(|_| index(&mut rng, n)).collect() } else { (0..n).collect() };
            let mut draw =
                if k == d { FeatureDraw::All((0..d).collect()) } else { FeatureDraw::Sample { rng: &mut rng, d, k } };
            grow(x, labels, &unit, rows, &config.tree, &mut draw)
        })
        .collect();
    Ok(Forest { trees, n_features: d })
}

impl Classifier for Forest {
    /// Fraction of trees voting positive; an even split predicts 0.
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_width(self.n_features, x)?;
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let scores: Vec<f64> = rows
            .par_iter()
            .map(|r| {
                let votes = self.trees.iter().filter(|t| t.predict_row(r) == 1).count();
                votes as f64 / self.trees.len() as f64
            })
            .collect();
        Ok(Array1::from(scores))
    }

    fn threshold(&self) -> f64 {
        0.5
    }
}

pub fn forest_predict(model: &Forest, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
    model.predict(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostStage {
    pub alpha: f64,
    pub stump: Tree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub stages: Vec<BoostStage>,
    /// Set only when no stage survived; the model then predicts this label.
    pub default_label: Option<u8>,
    pub n_features: usize,
}

/// Per-stage bookkeeping exposed for verification.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub weights_before: Vec<f64>,
    pub error: f64,
    pub alpha: f64,
    /// `None` for a terminal stage that was discarded or ended with zero error.
    pub weights_after: Option<Vec<f64>>,
    pub kept: bool,
}

/// `½ log((1 − e) / e)`.
pub fn boost_alpha(error: f64) -> f64 {
    0.5 * ((1.0 - error) / error).ln()
}

fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn adaboost_fit(x: ArrayView2<'_, f64>, labels: &[u8], n_stages: usize) -> Result<BoostModel> {
    Ok(adaboost_fit_with_trace(x, labels, n_stages)?.0)
}

pub fn adaboost_fit_with_trace(
    x: ArrayView2<'_, f64>,
    labels: &[u8],
    n_stages: usize,
) -> Result<(BoostModel, Vec<StageTrace>)> {
    check_labels(x.nrows(), labels)?;
    let n = x.nrows();
    let ones = labels.iter().filter(|&&y| y == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::usage("AdaBoost needs both classes in the training labels"));
    }
    if n_stages == 0 {
        return Err(Error::usage("AdaBoost needs at least one stage"));
    }
    let stump_cfg = CartConfig { max_depth: Some(1), ..CartConfig::default() };
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..n_stages {
        let stump = cart_fit(x, labels, Some(&w), &stump_cfg)?;
        if stump.n_splits() == 0 {
            break;
        }
        let h: Vec<u8> = rows.iter().map(|r| stump.predict_row(r)).collect();
        let error: f64 = (0..n).filter(|&i| h[i] != labels[i]).map(|i| w[i]).sum::<f64>().clamp(0.0, 1.0);
        if error >= 0.5 {
            trace.push(StageTrace { weights_before: w.clone(), error, alpha: 0.0, weights_after: None, kept: false });
            break;
        }
        if error <= 0.0 {
            let alpha = boost_alpha(BOOST_EPS);
            trace.push(StageTrace { weights_before: w.clone(), error, alpha, weights_after: None, kept: true });
            stages.push(BoostStage { alpha, stump });
            break;
        }
        let alpha = boost_alpha(error);
        let before = w.clone();
        for i in 0..n {
            w[i] *= (-alpha * signed(labels[i]) * signed(h[i])).exp();
        }
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= z);
        trace.push(StageTrace { weights_before: before, error, alpha, weights_after: Some(w.clone()), kept: true });
        stages.push(BoostStage { alpha, stump });
    }
    let default_label = stages.is_empty().then(|| majority_label(labels));
    Ok((BoostModel { stages, default_label, n_features: x.ncols() }, trace))
}

impl BoostModel {
    /// `Σ α_t h_t(x)` with `h_t ∈ {−1, +1}`.
    pub fn margin_row(&self, row: &[f64]) -> f64 {
        self.stages.iter().map(|s| s.alpha * signed(s.stump.predict_row(row))).sum()
    }
}

impl Classifier for BoostModel {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_width(self.n_features, x)?;
        if self.stages.is_empty() {
            let Some(label) = self.default_label else {
                return Err(Error::usage("boosted model has no stages"));
            };
            return Ok(Array1::from_elem(x.nrows(), signed(label)));
        }
        Ok(x.rows().into_iter().map(|r| self.margin_row(&r.to_vec())).collect())
    }

    fn threshold(&self) -> f64 {
        0.0
    }
}

pub fn adaboost_predict(model: &BoostModel, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
    model.predict(x)
}
