use std::collections::BTreeMap;

use nonresp::eval::{ConfusionMatrix, MetricsReport};
use serde::{Deserialize, Serialize};

/// `report.json` of `train-eval`. Optional metrics are omitted, never null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub seed: u64,
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balanced_accuracy: Option<f64>,
    pub misclassification: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specificity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fpr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    pub train_accuracy: f64,
    /// SVC only: whether the fitted dual passes the KKT checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_feasible: Option<bool>,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub wall_ms: u64,
}

impl RunReport {
    pub fn new(
        model: &str,
        seed: u64,
        cm: &ConfusionMatrix,
        m: &MetricsReport,
        train_accuracy: f64,
        config: BTreeMap<String, String>,
    ) -> Self {
        RunReport {
            model: model.to_string(),
            seed,
            tp: cm.tp,
            tn: cm.tn,
            fp: cm.fp,
            fn_: cm.fn_,
            accuracy: m.accuracy,
            balanced_accuracy: m.balanced_accuracy,
            misclassification: m.misclassification,
            precision: m.precision,
            recall: m.recall,
            specificity: m.specificity,
            fpr: m.fpr,
            auc: m.auc,
            train_accuracy,
            kkt_feasible: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            wall_ms: 0,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
