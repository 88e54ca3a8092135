use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use nonresp::eval::{
    confusion, grid_search, grid_search_csv, metrics, roc_csv, roc_curve, validation_curve, validation_curve_csv,
};
use nonresp::interpret::{feature_correlation, hier_cluster, importance_csv, permutation_importance, select_representatives};
use nonresp::model::FittedModel;
use nonresp::preprocess::{pipeline_fit_predict, FittedPipeline};
use nonresp::tabular::{read_csv, synth_generate, train_test_split, write_csv_to_writer, Schema, Split, Table};
use serde_json::json;

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;
use crate::report::RunReport;
use crate::svg::{line_chart, Series};

pub fn load_table(cfg: &ExperimentConfig) -> CliResult<Table> {
    Ok(match &cfg.data {
        DataSource::Synth(s) => synth_generate(s)?,
        DataSource::Csv { data, schema } => {
            let schema = Schema::from_file(schema).map_err(|e| match e {
                nonresp::Error::Io(io) => CliError::io(schema, io),
                other => other.into(),
            })?;
            read_csv(data, &schema).map_err(|e| match e {
                nonresp::Error::Io(io) => CliError::io(data, io),
                other => other.into(),
            })?
        }
    })
}

fn holdout(cfg: &ExperimentConfig, table: &Table) -> CliResult<(Vec<u8>, Split)> {
    let labels = table.labels()?;
    let split = train_test_split(table.n_rows(), &cfg.plan, cfg.plan.stratified.then_some(labels.as_slice()))?;
    Ok((labels, split))
}

fn json_text(v: &impl serde::Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn synth(cfg: &ExperimentConfig) -> CliResult<Outputs> {
    let DataSource::Synth(_) = &cfg.data else {
        return Err(CliError::usage("synth only generates synthetic data; drop the 'data' setting"));
    };
    let table = load_table(cfg)?;
    let mut csv = Vec::new();
    write_csv_to_writer(&mut csv, &table)?;
    let mut out = Outputs::default();
    out.add("data.csv", csv);
    out.add("schema.txt", table.schema().to_text());
    println!("synth: {} rows, {} columns", table.n_rows(), table.schema().len());
    Ok(out)
}

/// `wall_ms` in the report counts from `started`.
pub fn train_eval(cfg: &ExperimentConfig, started: Instant) -> CliResult<Outputs> {
    let table = load_table(cfg)?;
    let (labels, split) = holdout(cfg, &table)?;
    let (pipe, pred, scores) = pipeline_fit_predict(&table, &split.train, &split.test, &cfg.recipe, &cfg.model)?;
    let truth: Vec<u8> = split.test.iter().map(|&i| labels[i]).collect();
    let cm = confusion(&truth, &pred)?;
    let scores = scores.to_vec();
    let m = metrics(&cm, Some((&truth, &scores)))?;

    let train_truth: Vec<u8> = split.train.iter().map(|&i| labels[i]).collect();
    let train_pred = pipe.predict(&table.select_rows(&split.train)?)?;
    let train_accuracy = metrics(&confusion(&train_truth, &train_pred)?, None)?.accuracy;

    let mut report = RunReport::new(cfg.model.name(), cfg.seed, &cm, &m, train_accuracy, cfg.echo.clone());
    if let FittedModel::Svc(svc) = &pipe.model {
        report.kkt_feasible = Some(svc.kkt_satisfied);
    }

    let mut out = Outputs::default();
    if m.auc.is_some() {
        let curve = roc_curve(&truth, &scores)?;
        out.add("roc.csv", roc_csv(&curve));
        if cfg.svg {
            let pts = curve.points.iter().map(|p| (p.fpr, p.tpr)).collect();
            let svg = line_chart(
                &format!("ROC ({}), AUC {:.4}", cfg.model.name(), m.auc.unwrap_or(0.0)),
                "false positive rate",
                "true positive rate",
                &[Series { name: cfg.model.name(), points: pts }, Series { name: "chance", points: vec![(0.0, 0.0), (1.0, 1.0)] }],
                true,
            );
            out.add("roc.svg", svg);
        }
    }
    out.add("model.json", json_text(&pipe)?);
    report.wall_ms = started.elapsed().as_millis() as u64;
    out.add("report.json", report.to_json()?);

    println!(
        "{}: accuracy {:.4}, balanced {}, auc {}, tp {} tn {} fp {} fn {}",
        cfg.model.name(),
        m.accuracy,
        m.balanced_accuracy.map_or("n/a".to_string(), |v| format!("{v:.4}")),
        m.auc.map_or("n/a".to_string(), |v| format!("{v:.4}")),
        cm.tp,
        cm.tn,
        cm.fp,
        cm.fn_
    );
    Ok(out)
}

pub fn validation(cfg: &ExperimentConfig) -> CliResult<Outputs> {
    let param = cfg.curve_param.as_deref().ok_or_else(|| CliError::usage("validation-curve needs 'curve.param'"))?;
    if cfg.curve_values.is_empty() {
        return Err(CliError::usage("validation-curve needs 'curve.values'"));
    }
    let table = load_table(cfg)?;
    let r = validation_curve(&table, &cfg.recipe, &cfg.model, param, &cfg.curve_values, &cfg.plan, cfg.selection)?;
    let mut out = Outputs::default();
    out.add("validation_curve.csv", validation_curve_csv(&r));
    if cfg.svg {
        let xs: Vec<f64> = (0..r.values.len())
            .map(|i| r.values[i].parse::<f64>().unwrap_or(i as f64))
            .collect();
        let train = xs.iter().zip(&r.scores).map(|(&x, s)| (x, s.train_mean)).collect();
        let val = xs.iter().zip(&r.scores).map(|(&x, s)| (x, s.val_mean)).collect();
        let svg = line_chart(
            &format!("validation curve ({} over {param})", cfg.model.name()),
            param,
            "mean score",
            &[Series { name: "train", points: train }, Series { name: "validation", points: val }],
            false,
        );
        out.add("validation_curve.svg", svg);
    }
    for (v, s) in r.values.iter().zip(&r.scores) {
        println!("{param}={v}: train {:.4} (±{:.4}), validation {:.4} (±{:.4})", s.train_mean, s.train_std, s.val_mean, s.val_std);
    }
    Ok(out)
}

pub fn grid(cfg: &ExperimentConfig) -> CliResult<Outputs> {
    if cfg.grid.is_empty() {
        return Err(CliError::usage("grid-search needs at least one 'grid.<param>' setting"));
    }
    let table = load_table(cfg)?;
    let r = grid_search(&table, &cfg.recipe, &cfg.model, &cfg.grid, &cfg.plan, cfg.selection)?;
    let best = r.best();
    let params: BTreeMap<&str, &str> = best.params.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    let best_json = json!({
        "model": cfg.model.name(),
        "params": params,
        "val_mean": best.scores.val_mean,
        "val_std": best.scores.val_std,
    });
    let text = json_text(&best_json)?;
    let mut out = Outputs::default();
    out.add("grid_search.csv", grid_search_csv(&r));
    out.add("best_params.json", text.clone());
    print!("{text}");
    Ok(out)
}

pub fn importance(cfg: &ExperimentConfig) -> CliResult<Outputs> {
    let table = load_table(cfg)?;
    let (_, split) = holdout(cfg, &table)?;
    let pipe = FittedPipeline::fit(&table, &split.train, &cfg.recipe, &cfg.model)?;
    let test = table.select_rows(&split.test)?;
    let imp = permutation_importance(&pipe, &test, cfg.n_repeats, cfg.seed)?;

    let encoded = pipe.transform(&table.select_rows(&split.train)?)?;
    let names = pipe.encoder.output_names();
    let corr = feature_correlation(&encoded)?;
    let root = hier_cluster(&corr.values)?;
    let reps = select_representatives(&root, cfg.cluster_height, &names);
    let constant: Vec<&str> =
        names.iter().zip(&corr.constant).filter(|(_, &c)| c).map(|(n, _)| n.as_str()).collect();
    let dendrogram = json!({
        "cut_height": cfg.cluster_height,
        "representatives": reps,
        "constant_features": constant,
        "tree": root.named(&names),
    });

    let mut corr_csv = format!("feature,{}\n", names.join(","));
    for (i, name) in names.iter().enumerate() {
        let row: Vec<String> = corr.values.row(i).iter().map(f64::to_string).collect();
        let _ = writeln!(corr_csv, "{name},{}", row.join(","));
    }

    let mut out = Outputs::default();
    out.add("importance.csv", importance_csv(&imp));
    out.add("correlation.csv", corr_csv);
    out.add("dendrogram.json", json_text(&dendrogram)?);
    println!("base accuracy {:.4}; top features:", imp.base_accuracy);
    for f in imp.ranked().into_iter().take(5) {
        println!("  {}. {} ({:.4} ± {:.4})", f.rank, f.feature, f.mean_drop, f.std);
    }
    Ok(out)
}
