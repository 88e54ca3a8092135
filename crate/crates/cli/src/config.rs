//! Flat `key = value` experiment configuration.
//!
//! Settings are layered: built-in defaults, then `NONRESP_SEED`, then the
//! config file, then command-line flags. Every recognised key is listed in
//! the README.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nonresp::eval::SelectionMetric;
use nonresp::model::{ModelConfig, MODEL_NAMES};
use nonresp::preprocess::{EncoderKind, Recipe, ScalerKind};
use nonresp::tabular::{SplitPlan, SyntheticConfig};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "NONRESP_SEED";

/// Raw settings in layering order; later layers override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.trim().to_string(), value.trim().to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Apply `key=value` lines; blank lines and `#` comments are skipped.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.merge_pair(line).map_err(|_| {
                CliError::usage(format!("{origin}:{}: expected key=value, got '{line}'", n + 1))
            })?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.merge_text(&text, &path.display().to_string())
    }

    pub fn merge_pair(&mut self, pair: &str) -> CliResult<()> {
        match pair.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                self.set(k, v);
                Ok(())
            }
            _ => Err(CliError::usage(format!("expected key=value, got '{pair}'"))),
        }
    }

    fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.values.iter().filter_map(move |(k, v)| k.strip_prefix(prefix).map(|rest| (rest, v.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth(SyntheticConfig),
    Csv { data: PathBuf, schema: PathBuf },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub recipe: Recipe,
    pub model: ModelConfig,
    pub plan: SplitPlan,
    pub seed: u64,
    pub out: PathBuf,
    pub curve_param: Option<String>,
    pub curve_values: Vec<String>,
    pub grid: BTreeMap<String, Vec<String>>,
    pub selection: SelectionMetric,
    pub n_repeats: usize,
    pub cluster_height: f64,
    pub svg: bool,
    /// Every effective setting, defaults included, for the run report.
    pub echo: BTreeMap<String, String>,
}

const KNOWN: &[&str] = &[
    "seed",
    "out",
    "data",
    "schema",
    "synth.n_rows",
    "synth.positive_rate",
    "synth.missing_rate",
    "synth.seed",
    "model",
    "recipe.impute",
    "recipe.encoder",
    "recipe.drop_first",
    "recipe.scaler",
    "split.test_fraction",
    "split.n_splits",
    "split.stratified",
    "split.seed",
    "curve.param",
    "curve.values",
    "selection",
    "importance.n_repeats",
    "cluster.height",
    "svg",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| CliError::usage(format!("invalid value '{value}' for '{key}'")))
}

/// A `;`-separated list; `a..b` expands to the integers `a` through `b`.
pub fn parse_values(key: &str, text: &str) -> CliResult<Vec<String>> {
    let mut out = Vec::new();
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once("..") {
            Some((a, b)) => {
                let (a, b): (i64, i64) = (parse(key, a.trim())?, parse(key, b.trim())?);
                if a > b {
                    return Err(CliError::usage(format!("empty range '{item}' for '{key}'")));
                }
                out.extend((a..=b).map(|v| v.to_string()));
            }
            None => out.push(item.to_string()),
        }
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("'{key}' needs at least one value")));
    }
    Ok(out)
}

fn scaler_name(s: Option<ScalerKind>) -> &'static str {
    match s {
        None => "none",
        Some(ScalerKind::Standard) => "standard",
        Some(ScalerKind::MinMax) => "min_max",
    }
}

impl ExperimentConfig {
    pub fn from_settings(s: &Settings) -> CliResult<Self> {
        for key in s.values.keys() {
            let known = KNOWN.contains(&key.as_str()) || key.starts_with("model.") || key.starts_with("grid.");
            if !known {
                return Err(CliError::usage(format!("unknown config key '{key}'")));
            }
        }
        let seed: u64 = match s.get("seed") {
            Some(v) => parse("seed", v)?,
            None => 0,
        };
        let get_or = |key: &str, default: &str| s.get(key).unwrap_or(default).to_string();

        let name = get_or("model", "rf");
        if !MODEL_NAMES.contains(&name.as_str()) {
            return Err(CliError::usage(format!("model must be one of {}, got '{name}'", MODEL_NAMES.join(", "))));
        }
        let mut model = ModelConfig::from_name(&name)?;
        model.set_seed(seed);
        for (key, value) in s.with_prefix("model.") {
            model.set_param(key, value)?;
        }

        let mut recipe = model.default_recipe();
        if let Some(v) = s.get("recipe.impute") {
            recipe.impute = parse("recipe.impute", v)?;
        }
        if let Some(v) = s.get("recipe.drop_first") {
            recipe.drop_first = parse("recipe.drop_first", v)?;
        }
        if let Some(v) = s.get("recipe.encoder") {
            recipe.encoder = match v {
                "ordinal" => EncoderKind::Ordinal,
                "one_hot" => EncoderKind::OneHot,
                _ => return Err(CliError::usage(format!("recipe.encoder must be ordinal or one_hot, got '{v}'"))),
            };
        }
        if let Some(v) = s.get("recipe.scaler") {
            recipe.scaler = match v {
                "auto" => recipe.scaler,
                "none" => None,
                "standard" => Some(ScalerKind::Standard),
                "min_max" => Some(ScalerKind::MinMax),
                _ => {
                    return Err(CliError::usage(format!(
                        "recipe.scaler must be auto, none, standard or min_max, got '{v}'"
                    )))
                }
            };
        }

        let defaults = SplitPlan::default();
        let plan = SplitPlan {
            test_fraction: match s.get("split.test_fraction") {
                Some(v) => parse("split.test_fraction", v)?,
                None => defaults.test_fraction,
            },
            n_splits: match s.get("split.n_splits") {
                Some(v) => parse("split.n_splits", v)?,
                None => defaults.n_splits,
            },
            seed: match s.get("split.seed") {
                Some(v) => parse("split.seed", v)?,
                None => seed,
            },
            stratified: match s.get("split.stratified") {
                Some(v) => parse("split.stratified", v)?,
                None => defaults.stratified,
            },
        };

        let data_key = get_or("data", "synth");
        let data = if data_key == "synth" {
            if s.get("schema").is_some() {
                return Err(CliError::usage("'schema' only applies to csv data"));
            }
            let d = SyntheticConfig::default();
            DataSource::Synth(SyntheticConfig {
                n_rows: s.get("synth.n_rows").map_or(Ok(d.n_rows), |v| parse("synth.n_rows", v))?,
                positive_rate: s
                    .get("synth.positive_rate")
                    .map_or(Ok(d.positive_rate), |v| parse("synth.positive_rate", v))?,
                missing_rate: s
                    .get("synth.missing_rate")
                    .map_or(Ok(d.missing_rate), |v| parse("synth.missing_rate", v))?,
                seed: s.get("synth.seed").map_or(Ok(seed), |v| parse("synth.seed", v))?,
                planted: d.planted,
            })
        } else {
            let schema = s
                .get("schema")
                .ok_or_else(|| CliError::usage("csv data needs a 'schema' path"))?;
            DataSource::Csv { data: PathBuf::from(&data_key), schema: PathBuf::from(schema) }
        };

        let curve_values = match s.get("curve.values") {
            Some(v) => parse_values("curve.values", v)?,
            None => Vec::new(),
        };
        let mut grid = BTreeMap::new();
        for (key, value) in s.with_prefix("grid.") {
            grid.insert(key.to_string(), parse_values(&format!("grid.{key}"), value)?);
        }
        let selection = match s.get("selection").unwrap_or("accuracy") {
            "accuracy" => SelectionMetric::Accuracy,
            "balanced_accuracy" => SelectionMetric::BalancedAccuracy,
            v => return Err(CliError::usage(format!("selection must be accuracy or balanced_accuracy, got '{v}'"))),
        };
        let n_repeats: usize = parse("importance.n_repeats", &get_or("importance.n_repeats", "10"))?;
        let cluster_height: f64 = parse("cluster.height", &get_or("cluster.height", "0.5"))?;
        let svg: bool = parse("svg", &get_or("svg", "false"))?;

        let mut echo = BTreeMap::new();
        echo.insert("seed".to_string(), seed.to_string());
        echo.insert("model".to_string(), name.clone());
        for (k, v) in model.params() {
            echo.insert(format!("model.{k}"), v);
        }
        echo.insert("recipe.impute".into(), recipe.impute.to_string());
        echo.insert(
            "recipe.encoder".into(),
            if recipe.encoder == EncoderKind::Ordinal { "ordinal" } else { "one_hot" }.into(),
        );
        echo.insert("recipe.drop_first".into(), recipe.drop_first.to_string());
        echo.insert("recipe.scaler".into(), scaler_name(recipe.scaler).into());
        echo.insert("split.test_fraction".into(), plan.test_fraction.to_string());
        echo.insert("split.n_splits".into(), plan.n_splits.to_string());
        echo.insert("split.seed".into(), plan.seed.to_string());
        echo.insert("split.stratified".into(), plan.stratified.to_string());
        match &data {
            DataSource::Synth(c) => {
                echo.insert("data".into(), "synth".into());
                echo.insert("synth.n_rows".into(), c.n_rows.to_string());
                echo.insert("synth.positive_rate".into(), c.positive_rate.to_string());
                echo.insert("synth.missing_rate".into(), c.missing_rate.to_string());
                echo.insert("synth.seed".into(), c.seed.to_string());
            }
            DataSource::Csv { data, schema } => {
                echo.insert("data".into(), data.display().to_string());
                echo.insert("schema".into(), schema.display().to_string());
            }
        }

        Ok(ExperimentConfig {
            data,
            recipe,
            model,
            plan,
            seed,
            out: PathBuf::from(get_or("out", "out")),
            curve_param: s.get("curve.param").map(str::to_string),
            curve_values,
            grid,
            selection,
            n_repeats,
            cluster_height,
            svg,
            echo,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(text: &str) -> Settings {
        let mut s = Settings::default();
        s.merge_text(text, "test").unwrap();
        s
    }

    #[test]
    fn defaults_match_the_tuned_values() {
        let c = ExperimentConfig::from_settings(&Settings::default()).unwrap();
        assert_eq!(c.model.name(), "rf");
        assert_eq!(c.echo["model.n_trees"], "10");
        for (name, key, value) in [
            ("knn", "model.k", "10"),
            ("adaboost", "model.n_stages", "3"),
            ("logreg", "model.c", "1"),
            ("svc", "model.kernel", "rbf"),
            ("svc", "model.gamma", "0.1"),
            ("mlp", "model.hidden", "4,2"),
            ("mlp", "model.activation", "tanh"),
            ("mlp", "model.epochs", "1000"),
        ] {
            let c = ExperimentConfig::from_settings(&settings(&format!("model={name}"))).unwrap();
            assert_eq!(c.echo[key], value, "{name} {key}");
        }
    }

    #[test]
    fn later_layers_win() {
        let mut s = settings("seed = 4\nmodel=knn\nmodel.k=3\n# comment\n");
        s.merge_pair("model.k=7").unwrap();
        let c = ExperimentConfig::from_settings(&s).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.plan.seed, 4);
        assert_eq!(c.echo["model.k"], "7");
        assert_eq!(c.recipe.scaler, Some(ScalerKind::MinMax));
    }

    #[test]
    fn value_lists_and_ranges() {
        assert_eq!(parse_values("v", "1..3; 10").unwrap(), vec!["1", "2", "3", "10"]);
        assert_eq!(parse_values("v", "4,2;8").unwrap(), vec!["4,2", "8"]);
        assert!(parse_values("v", " ; ").is_err());
        assert!(parse_values("v", "5..1").is_err());
    }

    #[test]
    fn bad_settings_are_usage_errors() {
        for text in ["colour=red", "model=forest", "model=knn\nmodel.depth=3", "data=x.csv", "seed=-1"] {
            let err = ExperimentConfig::from_settings(&settings(text)).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}");
        }
        assert!(Settings::default().merge_text("novalue", "t").is_err());
    }
}
