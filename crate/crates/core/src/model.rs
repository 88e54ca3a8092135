//! Named model configurations with string-keyed hyperparameters, and the
//! serializable union of fitted models.

use std::fmt::Display;
use std::str::FromStr;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::classify::{knn_fit, Classifier, KnnModel, NullModel};
use crate::error::{Error, Result};
use crate::linear_margin::{logreg_fit, Kernel, LogRegConfig, LogRegModel, SvcConfig, SvcModel};
use crate::mlp::{mlp_train, Activation, LayerSpec, MlpConfig, MlpModel};
use crate::optim::Penalty;
use crate::preprocess::{EncoderKind, Recipe, ScalerKind};
use crate::trees::{adaboost_fit, cart_fit, forest_fit, BoostModel, CartConfig, Forest, ForestConfig, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// SVC settings kept flat so `gamma` survives a switch of kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl SvcParams {
    pub fn to_config(&self) -> SvcConfig {
        let kernel = match self.kernel {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::Rbf { gamma: self.gamma },
        };
        SvcConfig { c: self.c, kernel, tol: self.tol, max_passes: self.max_passes }
    }
}

impl Default for SvcParams {
    fn default() -> Self {
        let d = SvcConfig::default();
        SvcParams { kernel: KernelKind::Rbf, c: d.c, gamma: 0.1, tol: d.tol, max_passes: d.max_passes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    Null,
    Knn { k: usize },
    Cart(CartConfig),
    Rf(ForestConfig),
    Adaboost { n_stages: usize },
    Logreg(LogRegConfig),
    Svc(SvcParams),
    Mlp(MlpConfig),
}

pub const MODEL_NAMES: [&str; 8] = ["null", "knn", "cart", "rf", "adaboost", "logreg", "svc", "mlp"];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.trim().parse().map_err(|e| Error::usage(format!("bad value '{value}' for '{key}': {e}")))
}

fn parse_opt_usize(key: &str, value: &str) -> Result<Option<usize>> {
    match value.trim() {
        "none" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_penalty(value: &str) -> Result<Penalty> {
    match value.trim() {
        "none" => Ok(Penalty::None),
        "l1" => Ok(Penalty::L1),
        "l2" => Ok(Penalty::L2),
        v => Err(Error::usage(format!("penalty must be none, l1 or l2, got '{v}'"))),
    }
}

fn penalty_name(p: Penalty) -> &'static str {
    match p {
        Penalty::None => "none",
        Penalty::L1 => "l1",
        Penalty::L2 => "l2",
    }
}

fn parse_activation(value: &str) -> Result<Activation> {
    match value.trim() {
        "tanh" => Ok(Activation::Tanh),
        "sigmoid" => Ok(Activation::Sigmoid),
        "relu" => Ok(Activation::Relu),
        v => Err(Error::usage(format!("activation must be tanh, sigmoid or relu, got '{v}'"))),
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Sigmoid => "sigmoid",
        Activation::Relu => "relu",
    }
}

fn opt_name(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn unknown(model: &str, key: &str) -> Error {
    Error::usage(format!("model '{model}' has no parameter '{key}'"))
}

impl ModelConfig {
    /// Default configuration for a model name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "null" => ModelConfig::Null,
            "knn" => ModelConfig::Knn { k: 10 },
            "cart" => ModelConfig::Cart(CartConfig::default()),
            "rf" => ModelConfig::Rf(ForestConfig::default()),
            "adaboost" => ModelConfig::Adaboost { n_stages: 3 },
            "logreg" => ModelConfig::Logreg(LogRegConfig::default()),
            "svc" => ModelConfig::Svc(SvcParams::default()),
            "mlp" => ModelConfig::Mlp(MlpConfig::default()),
            other => {
                return Err(Error::usage(format!(
                    "unknown model '{other}' (expected one of {})",
                    MODEL_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Null => "null",
            ModelConfig::Knn { .. } => "knn",
            ModelConfig::Cart(_) => "cart",
            ModelConfig::Rf(_) => "rf",
            ModelConfig::Adaboost { .. } => "adaboost",
            ModelConfig::Logreg(_) => "logreg",
            ModelConfig::Svc(_) => "svc",
            ModelConfig::Mlp(_) => "mlp",
        }
    }

    /// Propagate the experiment seed to stochastic models.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ModelConfig::Rf(c) => c.seed = seed,
            ModelConfig::Logreg(c) => c.seed = seed,
            ModelConfig::Mlp(c) => c.seed = seed,
            _ => {}
        }
    }

    /// Set one hyperparameter from its textual value.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<()> {
        let name = self.name();
        match self {
            ModelConfig::Null => return Err(unknown(name, key)),
            ModelConfig::Knn { k } => match key {
                "k" => *k = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ModelConfig::Cart(c) => match key {
                "max_depth" => c.max_depth = parse_opt_usize(key, value)?,
                "min_samples_leaf" => c.min_samples_leaf = parse(key, value)?,
                "min_samples_split" => c.min_samples_split = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ModelConfig::Rf(c) => match key {
                "n_trees" => c.n_trees = parse(key, value)?,
                "max_features" => c.max_features = parse_opt_usize(key, value)?,
                "bootstrap" => c.bootstrap = parse(key, value)?,
                "max_depth" => c.tree.max_depth = parse_opt_usize(key, value)?,
                "min_samples_leaf" => c.tree.min_samples_leaf = parse(key, value)?,
                "min_samples_split" => c.tree.min_samples_split = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ModelConfig::Adaboost { n_stages } => match key {
                "n_stages" => *n_stages = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ModelConfig::Logreg(c) => match key {
                "penalty" => c.penalty = parse_penalty(value)?,
                "c" => c.c = parse(key, value)?,
                "max_iter" => c.max_iter = parse_opt_usize(key, value)?,
                "tol" => c.tol = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ModelConfig::Svc(c) => match key {
                "kernel" => {
                    c.kernel = match value.trim() {
                        "linear" => KernelKind::Linear,
                        "rbf" => KernelKind::Rbf,
                        v => return Err(Error::usage(format!("kernel must be linear or rbf, got '{v}'"))),
                    }
                }
                "c" => c.c = parse(key, value)?,
                "gamma" => c.gamma = parse(key, value)?,
                "tol" => c.tol = parse(key, value)?,
                "max_passes" => c.max_passes = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
            ModelConfig::Mlp(c) => match key {
                "hidden" => {
                    let act = c.hidden.first().map_or(Activation::Tanh, |l| l.activation);
                    let units: Vec<usize> = value
                        .split(|ch| ch == ',' || ch == '|')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| parse(key, s))
                        .collect::<Result<_>>()?;
                    c.hidden = units.into_iter().map(|u| LayerSpec::new(u, act)).collect();
                }
                "activation" => {
                    let act = parse_activation(value)?;
                    c.hidden.iter_mut().for_each(|l| l.activation = act);
                }
                "epochs" => c.epochs = parse(key, value)?,
                "batch_size" => c.batch_size = parse(key, value)?,
                "learning_rate" => c.learning_rate = parse(key, value)?,
                _ => return Err(unknown(name, key)),
            },
        }
        Ok(())
    }

    /// Every tunable hyperparameter with its current value, sorted by key.
    pub fn params(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = match self {
            ModelConfig::Null => vec![],
            ModelConfig::Knn { k } => vec![("k", k.to_string())],
            ModelConfig::Cart(c) => vec![
                ("max_depth", opt_name(c.max_depth)),
                ("min_samples_leaf", c.min_samples_leaf.to_string()),
                ("min_samples_split", c.min_samples_split.to_string()),
            ],
            ModelConfig::Rf(c) => vec![
                ("n_trees", c.n_trees.to_string()),
                ("max_features", opt_name(c.max_features)),
                ("bootstrap", c.bootstrap.to_string()),
                ("max_depth", opt_name(c.tree.max_depth)),
                ("min_samples_leaf", c.tree.min_samples_leaf.to_string()),
                ("min_samples_split", c.tree.min_samples_split.to_string()),
            ],
            ModelConfig::Adaboost { n_stages } => vec![("n_stages", n_stages.to_string())],
            ModelConfig::Logreg(c) => vec![
                ("penalty", penalty_name(c.penalty).to_string()),
                ("c", c.c.to_string()),
                ("max_iter", opt_name(c.max_iter)),
                ("tol", c.tol.to_string()),
            ],
            ModelConfig::Svc(c) => vec![
                ("kernel", if c.kernel == KernelKind::Linear { "linear" } else { "rbf" }.to_string()),
                ("c", c.c.to_string()),
                ("gamma", c.gamma.to_string()),
                ("tol", c.tol.to_string()),
                ("max_passes", c.max_passes.to_string()),
            ],
            ModelConfig::Mlp(c) => vec![
                ("hidden", c.hidden.iter().map(|l| l.units.to_string()).collect::<Vec<_>>().join(",")),
                ("activation", c.hidden.first().map_or("tanh", |l| activation_name(l.activation)).to_string()),
                ("epochs", c.epochs.to_string()),
                ("batch_size", c.batch_size.to_string()),
                ("learning_rate", c.learning_rate.to_string()),
            ],
        };
        out.sort_by(|a, b| a.0.cmp(b.0));
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// KNN gets min-max scaling, tree models and the null model none, the
    /// rest standard scaling; all use ordinal encoding with imputation.
    pub fn default_recipe(&self) -> Recipe {
        let scaler = match self {
            ModelConfig::Knn { .. } => Some(ScalerKind::MinMax),
            ModelConfig::Null | ModelConfig::Cart(_) | ModelConfig::Rf(_) | ModelConfig::Adaboost { .. } => None,
            _ => Some(ScalerKind::Standard),
        };
        Recipe { impute: true, encoder: EncoderKind::Ordinal, drop_first: false, scaler }
    }

    pub fn fit(&self, x: ArrayView2<'_, f64>, labels: &[u8]) -> Result<FittedModel> {
        Ok(match self {
            ModelConfig::Null => FittedModel::Null(NullModel::fit(x, labels)?),
            ModelConfig::Knn { k } => FittedModel::Knn(knn_fit(x, labels, *k)?),
            ModelConfig::Cart(c) => FittedModel::Cart(cart_fit(x, labels, None, c)?),
            ModelConfig::Rf(c) => FittedModel::Rf(forest_fit(x, labels, c)?),
            ModelConfig::Adaboost { n_stages } => FittedModel::Adaboost(adaboost_fit(x, labels, *n_stages)?),
            ModelConfig::Logreg(c) => FittedModel::Logreg(logreg_fit(x, labels, c)?),
            ModelConfig::Svc(c) => FittedModel::Svc(SvcModel::fit(x, labels, &c.to_config())?),
            ModelConfig::Mlp(c) => FittedModel::Mlp(mlp_train(x, labels, c)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "fitted", rename_all = "snake_case")]
pub enum FittedModel {
    Null(NullModel),
    Knn(KnnModel),
    Cart(Tree),
    Rf(Forest),
    Adaboost(BoostModel),
    Logreg(LogRegModel),
    Svc(SvcModel),
    Mlp(MlpModel),
}

impl FittedModel {
    fn inner(&self) -> &dyn Classifier {
        match self {
            FittedModel::Null(m) => m,
            FittedModel::Knn(m) => m,
            FittedModel::Cart(m) => m,
            FittedModel::Rf(m) => m,
            FittedModel::Adaboost(m) => m,
            FittedModel::Logreg(m) => m,
            FittedModel::Svc(m) => m,
            FittedModel::Mlp(m) => m,
        }
    }
}

impl Classifier for FittedModel {
    fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.inner().score(x)
    }

    fn threshold(&self) -> f64 {
        self.inner().threshold()
    }
}
