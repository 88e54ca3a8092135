//! Schema-mirroring synthetic survey generator.
//!
//! Rows are drawn independently: every categorical feature from a fixed
//! marginal distribution, age from a clipped normal, and the non-response
//! label from a logistic model whose log-odds are the sum of the planted
//! per-level shifts plus an intercept calibrated so that the expected
//! positive rate equals `positive_rate`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ColumnData, ColumnKind, Schema, Table, MISSING_CODE};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng64};

pub const SYNTHETIC_SCHEMA_TEXT: &str = include_str!("../../data/synthetic_schema.txt");

const LABEL_STREAM: u64 = 10_000;
const MISSING_STREAM: u64 = 20_000;

pub fn synthetic_schema() -> Schema {
    Schema::parse(SYNTHETIC_SCHEMA_TEXT).expect("bundled schema is valid")
}

/// Log-odds shifts applied to rows holding the listed levels of `feature`.
/// Levels not listed shift by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub feature: String,
    pub shifts: Vec<(String, f64)>,
}

impl PlantedEffect {
    pub fn new(feature: &str, shifts: &[(&str, f64)]) -> Self {
        PlantedEffect {
            feature: feature.to_string(),
            shifts: shifts.iter().map(|(l, s)| (l.to_string(), *s)).collect(),
        }
    }
}

/// The default signal. Log-odds add up, and the calibrated intercept is
/// very negative, so single effects stay weak while combinations are
/// strong. A phone interview alone or fair self-rated health alone leaves
/// non-response rare, but together they make it likely; this puts the
/// phone-mode rate near 0.20 against roughly 0.05 online. Dementia makes
/// non-response near certain under either mode.
pub fn default_plant() -> Vec<PlantedEffect> {
    vec![
        PlantedEffect::new("interview_mode", &[("phone", 3.5)]),
        PlantedEffect::new("self_rated_health", &[("fair", 5.7)]),
        PlantedEffect::new("dementia", &[("yes", 12.0)]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_rows: usize,
    pub positive_rate: f64,
    pub planted: Vec<PlantedEffect>,
    /// Probability that any feature cell is blanked after labels are drawn.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_rows: 5820,
            positive_rate: 0.083,
            planted: default_plant(),
            missing_rate: 0.01,
            seed: 0,
        }
    }
}

/// Marginal level weights, aligned with the schema's sorted level lists.
fn level_weights(name: &str, n_levels: usize) -> Vec<f64> {
    let w: &[f64] = match name {
        "interview_mode" => &[1135.0, 4685.0],
        "cohort" => &[2819.0, 631.0, 1108.0, 489.0, 168.0, 605.0],
        "region" => &[8.0, 10.0, 9.0, 5.0, 12.0, 2.0, 3.0, 16.0, 11.0, 3.0, 10.0, 9.0],
        "rural_urban" => &[1574.0, 4246.0],
        "living_place" => &[6.0, 29.0, 5729.0, 2.0, 54.0],
        "smoker" => &[5419.0, 401.0],
        "employment" => &[18.0, 4.0, 3.0, 62.0, 6.0, 5.0, 2.0],
        "employment_pre_covid" => &[22.0, 3.0, 3.0, 60.0, 7.0, 4.0, 1.0],
        "physical_activity" => &[35.0, 15.0, 50.0],
        "marital_status" => &[10.0, 65.0, 7.0, 18.0],
        "education" => &[30.0, 15.0, 20.0, 35.0],
        "tenure" => &[5.0, 80.0, 15.0],
        "household_size" => &[25.0, 55.0, 12.0, 8.0],
        "self_rated_health" => &[12.0, 20.0, 33.0, 7.0, 28.0],
        "internet_use" => &[75.0, 12.0, 13.0],
        "loneliness" => &[60.0, 10.0, 30.0],
        "financial_situation" => &[40.0, 5.0, 35.0, 20.0],
        "covid_test" => &[80.0, 20.0],
        "covid_positive" => &[96.0, 4.0],
        "covid_hospitalised" => &[99.0, 1.0],
        "high_blood_pressure" => &[62.0, 38.0],
        "arthritis" => &[65.0, 35.0],
        "dementia" => &[96.0, 4.0],
        "disability" => &[85.0, 15.0],
        "stroke" => &[95.0, 5.0],
        "cancer" => &[92.0, 8.0],
        _ if n_levels == 2 => &[88.0, 12.0],
        _ => &[],
    };
    if w.len() == n_levels {
        w.to_vec()
    } else {
        vec![1.0; n_levels]
    }
}

fn draw_categorical(rng: &mut Rng64, cumulative: &[f64]) -> u32 {
    let total = *cumulative.last().expect("non-empty weights");
    let u = rng.gen::<f64>() * total;
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1) as u32
}

fn draw_age(rng: &mut Rng64) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout fixed.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    (70.0 + 9.0 * z).round().clamp(50.0, 100.0)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Intercept `b` with `mean(sigmoid(b + shift_i)) == rate`, by bisection.
fn calibrate_intercept(shifts: &[f64], rate: f64) -> f64 {
    let mean_at = |b: f64| shifts.iter().map(|&s| sigmoid(b + s)).sum::<f64>() / shifts.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn synth_generate(config: &SyntheticConfig) -> Result<Table> {
    if config.n_rows == 0 {
        return Err(Error::usage("synthetic table needs at least one row"));
    }
    if !(config.positive_rate > 0.0 && config.positive_rate < 1.0) {
        return Err(Error::usage(format!("positive rate {} outside (0, 1)", config.positive_rate)));
    }
    if !(0.0..1.0).contains(&config.missing_rate) {
        return Err(Error::usage(format!("missing rate {} outside [0, 1)", config.missing_rate)));
    }
    let schema = synthetic_schema();
    let n = config.n_rows;

    // Resolve planted effects to per-column, per-code shift tables.
    let mut plants: Vec<(usize, Vec<f64>)> = Vec::new();
    for effect in &config.planted {
        let col = schema
            .index_of(&effect.feature)
            .filter(|&c| schema.columns()[c].role == super::Role::Feature)
            .ok_or_else(|| Error::usage(format!("unknown planted feature '{}'", effect.feature)))?;
        let levels = schema.columns()[col].levels().ok_or_else(|| {
            Error::usage(format!("planted feature '{}' is not categorical", effect.feature))
        })?;
        let mut table = vec![0.0; levels.len()];
        for (level, shift) in &effect.shifts {
            let code = levels.iter().position(|l| l == level).ok_or_else(|| {
                Error::usage(format!("feature '{}' has no level '{level}'", effect.feature))
            })?;
            if !shift.is_finite() {
                return Err(Error::usage(format!("non-finite shift for '{}'", effect.feature)));
            }
            table[code] += shift;
        }
        plants.push((col, table));
    }

    let mut columns: Vec<ColumnData> = Vec::with_capacity(schema.len());
    for (col, spec) in schema.columns().iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(config.seed, col as u64));
        let data = match (&spec.kind, spec.role) {
            (_, super::Role::Id) => ColumnData::Numeric((1..=n).map(|i| i as f64).collect()),
            (_, super::Role::Target) => ColumnData::Categorical(Vec::new()),
            (ColumnKind::Categorical { levels }, _) => {
                let mut cumulative = level_weights(&spec.name, levels.len());
                for i in 1..cumulative.len() {
                    cumulative[i] += cumulative[i - 1];
                }
                ColumnData::Categorical((0..n).map(|_| draw_categorical(&mut rng, &cumulative)).collect())
            }
            (ColumnKind::Numeric, _) => ColumnData::Numeric((0..n).map(|_| draw_age(&mut rng)).collect()),
        };
        columns.push(data);
    }

    let mut shifts = vec![0.0; n];
    for (col, table) in &plants {
        let ColumnData::Categorical(codes) = &columns[*col] else { unreachable!() };
        for (s, &c) in shifts.iter_mut().zip(codes) {
            *s += table[c as usize];
        }
    }
    let intercept = calibrate_intercept(&shifts, config.positive_rate);
    let mut rng = rng_from_seed(derive_seed(config.seed, LABEL_STREAM));
    let labels: Vec<u32> = shifts
        .iter()
        .map(|&s| u32::from(rng.gen::<f64>() < sigmoid(intercept + s)))
        .collect();
    columns[schema.target_index()] = ColumnData::Categorical(labels);

    if config.missing_rate > 0.0 {
        let mut rng = rng_from_seed(derive_seed(config.seed, MISSING_STREAM));
        for col in schema.feature_indices() {
            match &mut columns[col] {
                ColumnData::Categorical(codes) => {
                    for c in codes.iter_mut() {
                        if rng.gen::<f64>() < config.missing_rate {
                            *c = MISSING_CODE;
                        }
                    }
                }
                ColumnData::Numeric(values) => {
                    for v in values.iter_mut() {
                        if rng.gen::<f64>() < config.missing_rate {
                            *v = f64::NAN;
                        }
                    }
                }
            }
        }
    }
    Table::new(schema, columns)
}
