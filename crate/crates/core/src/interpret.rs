//! Permutation importance and feature clustering.
//!
//! Importance permutes raw table columns before the fitted pipeline, so
//! categorical encoders only ever see valid levels. Clustering runs average
//! linkage on `1 - |rho|` where `rho` is the Spearman correlation.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::FittedPipeline;
use crate::rng::{derive_seed, permutation, rng_from_seed};
use crate::tabular::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_drop: f64,
    pub std: f64,
    /// 1 for the largest mean drop.
    pub rank: usize,
    pub drops: Vec<f64>,
}

/// Features in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceResult {
    pub base_accuracy: f64,
    pub features: Vec<FeatureImportance>,
}

impl ImportanceResult {
    /// Features sorted by rank.
    pub fn ranked(&self) -> Vec<&FeatureImportance> {
        let mut v: Vec<&FeatureImportance> = self.features.iter().collect();
        v.sort_by_key(|f| f.rank);
        v
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.features.iter().find(|f| f.feature == feature).map(|f| f.rank)
    }
}

fn accuracy(truth: &[u8], pred: &[u8]) -> f64 {
    truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Mean accuracy drop when each raw feature column of `test` is shuffled.
/// Feature `j` (position in the schema's feature list) draws its
/// permutations from stream `j` of `seed`.
pub fn permutation_importance(
    pipeline: &FittedPipeline,
    test: &Table,
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceResult> {
    if n_repeats == 0 {
        return Err(Error::usage("n_repeats must be at least 1"));
    }
    if test.n_rows() == 0 {
        return Err(Error::usage("importance needs at least one test row"));
    }
    let schema = test.schema();
    let features = schema.feature_indices();
    let names: Vec<String> = features.iter().map(|&c| schema.columns()[c].name.clone()).collect();
    if names != pipeline.encoder.input_names() {
        return Err(Error::usage(format!(
            "test table features {:?} do not match the pipeline's {:?}",
            names,
            pipeline.encoder.input_names()
        )));
    }
    let truth = test.labels()?;
    let base = accuracy(&truth, &pipeline.predict(test)?);

    let per_feature: Vec<Result<Vec<f64>>> = features
        .par_iter()
        .enumerate()
        .map(|(j, &col)| {
            let mut rng = rng_from_seed(derive_seed(seed, j as u64));
            (0..n_repeats)
                .map(|_| {
                    let order = permutation(&mut rng, test.n_rows());
                    let shuffled = test.with_column(col, test.column(col).permuted(&order))?;
                    Ok(base - accuracy(&truth, &pipeline.predict(&shuffled)?))
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(features.len());
    for (name, drops) in names.into_iter().zip(per_feature) {
        let drops = drops?;
        let n = drops.len() as f64;
        let mean = drops.iter().sum::<f64>() / n;
        let std = (drops.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n).sqrt();
        out.push(FeatureImportance { feature: name, mean_drop: mean, std, rank: 0, drops });
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| {
        out[b].mean_drop.total_cmp(&out[a].mean_drop).then_with(|| out[a].feature.cmp(&out[b].feature))
    });
    for (r, &i) in order.iter().enumerate() {
        out[i].rank = r + 1;
    }
    Ok(ImportanceResult { base_accuracy: base, features: out })
}

/// Rows in rank order.
pub fn importance_csv(result: &ImportanceResult) -> String {
    let mut s = String::from("feature,mean_drop,std,rank\n");
    for f in result.ranked() {
        let _ = writeln!(s, "{},{},{},{}", f.feature, f.mean_drop, f.std, f.rank);
    }
    s
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(v: ArrayView1<f64>) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub values: Array2<f64>,
    /// Columns with zero variance; their off-diagonal correlations are 0.
    pub constant: Vec<bool>,
}

/// Spearman correlation between the columns of `x`.
pub fn feature_correlation(x: &Array2<f64>) -> Result<CorrelationMatrix> {
    let (n, d) = x.dim();
    if d < 2 {
        return Err(Error::usage(format!("correlation needs at least 2 features, got {d}")));
    }
    if n < 2 {
        return Err(Error::usage(format!("correlation needs at least 2 rows, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("feature matrix contains non-finite values"));
    }
    let mut centered = Vec::with_capacity(d);
    let mut sumsq = Vec::with_capacity(d);
    for col in x.columns() {
        let r = average_ranks(col);
        let m = r.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = r.iter().map(|v| v - m).collect();
        sumsq.push(c.iter().map(|v| v * v).sum::<f64>());
        centered.push(c);
    }
    let constant: Vec<bool> = sumsq.iter().map(|&s| s == 0.0).collect();
    let mut values = Array2::<f64>::eye(d);
    for a in 0..d {
        for b in a + 1..d {
            let rho = if constant[a] || constant[b] {
                0.0
            } else {
                let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(p, q)| p * q).sum();
                // sqrt of the product keeps duplicated columns at exactly 1.
                (dot / (sumsq[a] * sumsq[b]).sqrt()).clamp(-1.0, 1.0)
            };
            values[[a, b]] = rho;
            values[[b, a]] = rho;
        }
    }
    Ok(CorrelationMatrix { values, constant })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DendrogramNode {
    Leaf(usize),
    Merge { left: Box<DendrogramNode>, right: Box<DendrogramNode>, height: f64 },
}

impl DendrogramNode {
    pub fn height(&self) -> f64 {
        match self {
            DendrogramNode::Leaf(_) => 0.0,
            DendrogramNode::Merge { height, .. } => *height,
        }
    }

    /// Leaf indices, left to right.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                DendrogramNode::Leaf(i) => out.push(*i),
                DendrogramNode::Merge { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// Clusters left after removing every merge above `height`.
    pub fn cut(&self, height: f64) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                DendrogramNode::Merge { left, right, height: h } if *h > height => {
                    stack.push(right);
                    stack.push(left);
                }
                _ => out.push(node.leaves()),
            }
        }
        out
    }

    pub fn named(&self, names: &[String]) -> NamedDendrogram {
        match self {
            DendrogramNode::Leaf(i) => NamedDendrogram::Leaf { feature: names[*i].clone() },
            DendrogramNode::Merge { left, right, height } => NamedDendrogram::Merge {
                height: *height,
                left: Box::new(left.named(names)),
                right: Box::new(right.named(names)),
            },
        }
    }
}

/// JSON export shape: `{"feature": ..}` leaves and `{"height", "left", "right"}` merges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NamedDendrogram {
    Leaf { feature: String },
    Merge { height: f64, left: Box<NamedDendrogram>, right: Box<NamedDendrogram> },
}

/// Average-linkage agglomeration on `1 - |rho|`. Clusters are numbered
/// leaves first, then merges in creation order; among equal distances the
/// pair with the smallest ids merges first.
pub fn hier_cluster(corr: &Array2<f64>) -> Result<DendrogramNode> {
    let d = corr.nrows();
    if d == 0 || corr.ncols() != d {
        return Err(Error::usage(format!("correlation matrix must be square and non-empty, got {:?}", corr.dim())));
    }
    let mut dist = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            dist[i][j] = 1.0 - corr[[i, j]].abs();
        }
    }
    // Active clusters: (node, size, row in `dist`), kept in id order.
    let mut active: Vec<(DendrogramNode, usize, usize)> = (0..d).map(|i| (DendrogramNode::Leaf(i), 1, i)).collect();
    while active.len() > 1 {
        let mut best = (0, 1);
        let mut best_d = f64::INFINITY;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let v = dist[active[a].2][active[b].2];
                if v < best_d {
                    best_d = v;
                    best = (a, b);
                }
            }
        }
        let (a, b) = best;
        let (right, nb, rb) = active.remove(b);
        let (left, na, ra) = active.remove(a);
        // Lance-Williams update; the mean is clamped into [min, max] of its two
        // inputs so rounding cannot break monotone heights.
        for (_, _, r) in &active {
            let (x, y) = (dist[ra][*r], dist[rb][*r]);
            let m = ((na as f64 * x + nb as f64 * y) / (na + nb) as f64).clamp(x.min(y), x.max(y));
            dist[ra][*r] = m;
            dist[*r][ra] = m;
        }
        let node = DendrogramNode::Merge { left: Box::new(left), right: Box::new(right), height: best_d };
        active.push((node, na + nb, ra));
    }
    Ok(active.pop().expect("one cluster remains").0)
}

/// One feature per cluster at the cut `height`: the lexicographically
/// first name in each cluster, returned sorted.
pub fn select_representatives(root: &DendrogramNode, height: f64, names: &[String]) -> Vec<String> {
    let mut reps: Vec<String> = root
        .cut(height)
        .into_iter()
        .map(|c| c.iter().map(|&i| names[i].clone()).min().expect("clusters are non-empty"))
        .collect();
    reps.sort();
    reps
}
