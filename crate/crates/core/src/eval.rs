//! Confusion-matrix metrics, ROC/AUC, and shuffle-split model selection
//! (validation curves and grid search).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::preprocess::{FittedPipeline, Recipe};
use crate::tabular::{shuffle_split_iter, SplitPlan, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::usage(format!("{} labels vs {} predictions", y_true.len(), y_pred.len())));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => return Err(Error::usage(format!("labels must be 0 or 1, got ({t}, {p})"))),
        }
    }
    Ok(cm)
}

/// Ratios that would divide by zero are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balanced_accuracy: Option<f64>,
    pub misclassification: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specificity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Metrics of `cm`; `scores = (truth, scores)` adds the AUC when both
/// classes are present.
pub fn metrics(cm: &ConfusionMatrix, scores: Option<(&[u8], &[f64])>) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::usage("confusion matrix is empty"));
    }
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let specificity = ratio(cm.tn, cm.tn + cm.fp);
    let auc = match scores {
        Some((truth, s)) => {
            let pos = truth.iter().filter(|&&y| y == 1).count();
            if pos == 0 || pos == truth.len() {
                None
            } else {
                Some(auc(&roc_curve(truth, s)?))
            }
        }
        None => None,
    };
    Ok(MetricsReport {
        accuracy,
        balanced_accuracy: recall.zip(specificity).map(|(r, s)| (r + s) / 2.0),
        misclassification: (cm.fp + cm.fn_) as f64 / total as f64,
        precision: ratio(cm.tp, cm.tp + cm.fp),
        recall,
        specificity,
        fpr: ratio(cm.fp, cm.fp + cm.tn),
        auc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// One point per distinct score, descending, each counting `score ≥
/// threshold` as positive, preceded by `(+∞, 0, 0)`. The last point is
/// `(min score, 1, 1)`.
pub fn roc_curve(y_true: &[u8], scores: &[f64]) -> Result<RocCurve> {
    if y_true.len() != scores.len() {
        return Err(Error::usage(format!("{} labels vs {} scores", y_true.len(), scores.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::numeric("NaN score"));
    }
    let pos = y_true.iter().filter(|&&y| y == 1).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::usage("ROC curve needs both classes in the truth labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if y_true[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint { threshold: s, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    Accuracy,
    BalancedAccuracy,
}

impl SelectionMetric {
    fn measure(self, truth: &[u8], pred: &[u8]) -> Result<f64> {
        let m = metrics(&confusion(truth, pred)?, None)?;
        match self {
            SelectionMetric::Accuracy => Ok(m.accuracy),
            SelectionMetric::BalancedAccuracy => m.balanced_accuracy.ok_or_else(|| {
                Error::data("balanced accuracy is undefined on a single-class fold; use a stratified split")
            }),
        }
    }
}

/// Mean and population standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub train_mean: f64,
    pub train_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
}

/// Train and validation scores of one configuration on one fold.
fn evaluate_fold(
    table: &Table,
    labels: &[u8],
    train: &[usize],
    val: &[usize],
    recipe: &Recipe,
    model: &ModelConfig,
    metric: SelectionMetric,
) -> Result<(f64, f64)> {
    let pipe = FittedPipeline::fit(table, train, recipe, model)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<u8>>();
    let train_pred = pipe.predict(&table.select_rows(train)?)?;
    let val_pred = pipe.predict(&table.select_rows(val)?)?;
    Ok((metric.measure(&pick(train), &train_pred)?, metric.measure(&pick(val), &val_pred)?))
}

/// Score every configuration on every shuffle split; the result is indexed
/// `[config][fold]`. The first failing cell in enumeration order is returned
/// as the error.
fn score_cells(
    table: &Table,
    recipe: &Recipe,
    configs: &[ModelConfig],
    plan: &SplitPlan,
    metric: SelectionMetric,
) -> Result<Vec<FoldSummary>> {
    let labels = table.labels()?;
    let splits: Vec<_> =
        shuffle_split_iter(table.n_rows(), plan, plan.stratified.then_some(labels.as_slice()))?.collect();
    let cells: Vec<(usize, usize)> =
        (0..configs.len()).flat_map(|c| (0..splits.len()).map(move |f| (c, f))).collect();
    let results: Vec<Result<(f64, f64)>> = cells
        .par_iter()
        .map(|&(c, f)| evaluate_fold(table, &labels, &splits[f].train, &splits[f].test, recipe, &configs[c], metric))
        .collect();
    let mut out = Vec::with_capacity(configs.len());
    let mut it = results.into_iter();
    for _ in configs {
        let mut train = Vec::with_capacity(splits.len());
        let mut val = Vec::with_capacity(splits.len());
        for _ in &splits {
            let (t, v) = it.next().expect("one result per cell")?;
            train.push(t);
            val.push(v);
        }
        let (train_mean, train_std) = mean_std(&train);
        let (val_mean, val_std) = mean_std(&val);
        out.push(FoldSummary { train_mean, train_std, val_mean, val_std });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCurveResult {
    pub param: String,
    pub values: Vec<String>,
    pub scores: Vec<FoldSummary>,
}

pub fn validation_curve(
    table: &Table,
    recipe: &Recipe,
    base: &ModelConfig,
    param: &str,
    values: &[String],
    plan: &SplitPlan,
    metric: SelectionMetric,
) -> Result<ValidationCurveResult> {
    if values.is_empty() {
        return Err(Error::usage("validation curve needs at least one parameter value"));
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut m = base.clone();
            m.set_param(param, v)?;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let scores = score_cells(table, recipe, &configs, plan, metric)?;
    Ok(ValidationCurveResult { param: param.to_string(), values: values.to_vec(), scores })
}

pub fn validation_curve_csv(result: &ValidationCurveResult) -> String {
    let mut out = String::from("param,train_mean,train_std,val_mean,val_std\n");
    for (v, s) in result.values.iter().zip(&result.scores) {
        let _ = writeln!(out, "{v},{},{},{},{}", s.train_mean, s.train_std, s.val_mean, s.val_std);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// Parameter assignments in sorted key order.
    pub params: Vec<(String, String)>,
    pub scores: FoldSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub cells: Vec<GridCell>,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridCell {
        &self.cells[self.best_index]
    }
}

/// Cross product of the grid, keys in sorted order and values in the
/// given order, with the last key varying fastest.
pub fn grid_cells(grid: &BTreeMap<String, Vec<String>>) -> Vec<Vec<(String, String)>> {
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in grid {
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for cell in &cells {
            for v in values {
                let mut c = cell.clone();
                c.push((key.clone(), v.clone()));
                next.push(c);
            }
        }
        cells = next;
    }
    cells
}

/// Highest mean validation score wins; ties keep the earliest cell.
pub fn grid_search(
    table: &Table,
    recipe: &Recipe,
    base: &ModelConfig,
    grid: &BTreeMap<String, Vec<String>>,
    plan: &SplitPlan,
    metric: SelectionMetric,
) -> Result<GridSearchResult> {
    if grid.is_empty() || grid.values().any(Vec::is_empty) {
        return Err(Error::usage("grid search needs at least one value for every parameter"));
    }
    let assignments = grid_cells(grid);
    let configs = assignments
        .iter()
        .map(|cell| {
            let mut m = base.clone();
            for (k, v) in cell {
                m.set_param(k, v)?;
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let scores = score_cells(table, recipe, &configs, plan, metric)?;
    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.val_mean > scores[best_index].val_mean {
            best_index = i;
        }
    }
    let cells = assignments.into_iter().zip(scores).map(|(params, scores)| GridCell { params, scores }).collect();
    Ok(GridSearchResult { best_index, cells })
}

pub fn grid_search_csv(result: &GridSearchResult) -> String {
    let keys: Vec<&str> = result.cells[0].params.iter().map(|(k, _)| k.as_str()).collect();
    let mut out = keys.join(",");
    out.push_str(",train_mean,train_std,val_mean,val_std\n");
    for cell in &result.cells {
        let vals: Vec<&str> = cell.params.iter().map(|(_, v)| v.as_str()).collect();
        let s = &cell.scores;
        let _ = writeln!(out, "{},{},{},{},{}", vals.join(","), s.train_mean, s.train_std, s.val_mean, s.val_std);
    }
    out
}
