//! Categorical encoders, column scalers, and the leak-free pipeline that fits
//! every transformer on training rows only.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::classify::Classifier;
use crate::error::{Error, Result};
use crate::model::{FittedModel, ModelConfig};
use crate::tabular::{ColumnData, ColumnKind, Imputer, Role, Table, MISSING_CODE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Ordinal,
    OneHot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum EncodedColumn {
    /// Levels in code order; `retained` are the levels given an indicator
    /// column (one-hot only).
    Categorical { name: String, levels: Vec<String>, retained: Vec<String> },
    Numeric { name: String },
}

/// Fitted encoder: level maps come from the schema's sorted level lists,
/// and transformation matches columns and levels by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub kind: EncoderKind,
    pub drop_first: bool,
    columns: Vec<EncodedColumn>,
}

pub fn encoder_fit(table: &Table, kind: EncoderKind, drop_first: bool) -> Result<EncoderState> {
    let mut columns = Vec::new();
    for spec in table.schema().columns().iter().filter(|c| c.role == Role::Feature) {
        columns.push(match &spec.kind {
            ColumnKind::Categorical { levels } => {
                let skip = usize::from(drop_first && kind == EncoderKind::OneHot);
                EncodedColumn::Categorical {
                    name: spec.name.clone(),
                    levels: levels.clone(),
                    retained: levels[skip.min(levels.len())..].to_vec(),
                }
            }
            ColumnKind::Numeric => EncodedColumn::Numeric { name: spec.name.clone() },
        });
    }
    if columns.is_empty() {
        return Err(Error::usage("table has no feature columns to encode"));
    }
    Ok(EncoderState { kind, drop_first, columns })
}

impl EncoderState {
    /// Output column names: the column name for ordinal and numeric
    /// columns, `col=level` for one-hot indicators.
    pub fn output_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for col in &self.columns {
            match col {
                EncodedColumn::Categorical { name, retained, .. } if self.kind == EncoderKind::OneHot => {
                    out.extend(retained.iter().map(|l| format!("{name}={l}")));
                }
                EncodedColumn::Categorical { name, .. } | EncodedColumn::Numeric { name } => out.push(name.clone()),
            }
        }
        out
    }

    /// Raw feature column names in encoder order.
    pub fn input_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| match c {
                EncodedColumn::Categorical { name, .. } | EncodedColumn::Numeric { name } => name.clone(),
            })
            .collect()
    }

    pub fn transform(&self, table: &Table) -> Result<Array2<f64>> {
        let names = self.output_names();
        let n = table.n_rows();
        let mut out = Array2::zeros((n, names.len()));
        let mut at = 0;
        for col in &self.columns {
            let (name, is_cat) = match col {
                EncodedColumn::Categorical { name, .. } => (name, true),
                EncodedColumn::Numeric { name } => (name, false),
            };
            let idx = table
                .column_index(name)
                .ok_or_else(|| Error::data(format!("column '{name}' is missing from the table")))?;
            match (col, table.column(idx)) {
                (EncodedColumn::Categorical { levels, retained, .. }, ColumnData::Categorical(codes)) => {
                    let table_levels = table.schema().columns()[idx].levels().unwrap_or(&[]);
                    // Map the table's codes onto the fitted level positions.
                    let mut to_fitted = Vec::with_capacity(table_levels.len());
                    for level in table_levels {
                        to_fitted.push(levels.iter().position(|l| l == level));
                    }
                    let retained_pos: Vec<Option<usize>> = levels
                        .iter()
                        .map(|l| retained.iter().position(|r| r == l))
                        .collect();
                    for (r, &code) in codes.iter().enumerate() {
                        if code == MISSING_CODE {
                            return Err(Error::data(format!(
                                "missing value in column '{name}' row {} reached the encoder (enable imputation)",
                                r + 1
                            )));
                        }
                        let fitted = to_fitted[code as usize].ok_or_else(|| {
                            Error::data(format!(
                                "unseen level '{}' in column '{name}'",
                                table_levels[code as usize]
                            ))
                        })?;
                        match self.kind {
                            EncoderKind::Ordinal => out[[r, at]] = fitted as f64,
                            EncoderKind::OneHot => {
                                if let Some(k) = retained_pos[fitted] {
                                    out[[r, at + k]] = 1.0;
                                }
                            }
                        }
                    }
                    at += if self.kind == EncoderKind::OneHot { retained.len() } else { 1 };
                }
                (EncodedColumn::Numeric { .. }, ColumnData::Numeric(values)) => {
                    for (r, &v) in values.iter().enumerate() {
                        if v.is_nan() {
                            return Err(Error::data(format!(
                                "missing value in column '{name}' row {} reached the encoder (enable imputation)",
                                r + 1
                            )));
                        }
                        out[[r, at]] = v;
                    }
                    at += 1;
                }
                _ => {
                    let want = if is_cat { "categorical" } else { "numeric" };
                    return Err(Error::data(format!("column '{name}' is not {want}")));
                }
            }
        }
        Ok(out)
    }
}

pub fn encoder_fit_transform(
    table: &Table,
    kind: EncoderKind,
    drop_first: bool,
) -> Result<(EncoderState, Array2<f64>)> {
    let state = encoder_fit(table, kind, drop_first)?;
    let x = state.transform(table)?;
    Ok((state, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    Standard,
    MinMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScalerState {
    /// Per-column mean and population standard deviation.
    Standard { mean: Vec<f64>, std: Vec<f64> },
    MinMax { min: Vec<f64>, max: Vec<f64> },
}

pub fn scaler_fit(x: &Array2<f64>, kind: ScalerKind) -> Result<ScalerState> {
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(Error::usage("cannot fit a scaler on an empty matrix"));
    }
    Ok(match kind {
        ScalerKind::Standard => {
            let mut mean = Vec::with_capacity(x.ncols());
            let mut std = Vec::with_capacity(x.ncols());
            for col in x.columns() {
                let m = col.sum() / n as f64;
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
                mean.push(m);
                std.push(var.sqrt());
            }
            ScalerState::Standard { mean, std }
        }
        ScalerKind::MinMax => {
            let min = x.columns().into_iter().map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).collect();
            let max = x.columns().into_iter().map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
            ScalerState::MinMax { min, max }
        }
    })
}

impl ScalerState {
    pub fn width(&self) -> usize {
        match self {
            ScalerState::Standard { mean, .. } => mean.len(),
            ScalerState::MinMax { min, .. } => min.len(),
        }
    }
}

/// Constant columns (σ = 0 or max = min) map to 0.
pub fn scaler_transform(state: &ScalerState, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != state.width() {
        return Err(Error::usage(format!(
            "scaler fitted on {} columns, got {}",
            state.width(),
            x.ncols()
        )));
    }
    let mut out = x.clone();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let (shift, scale) = match state {
            ScalerState::Standard { mean, std } => (mean[j], std[j]),
            ScalerState::MinMax { min, max } => (min[j], max[j] - min[j]),
        };
        if scale == 0.0 {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| (v - shift) / scale);
        }
    }
    Ok(out)
}

/// Transformer recipe applied ahead of a classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub impute: bool,
    pub encoder: EncoderKind,
    pub drop_first: bool,
    pub scaler: Option<ScalerKind>,
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe { impute: true, encoder: EncoderKind::Ordinal, drop_first: false, scaler: Some(ScalerKind::Standard) }
    }
}

/// Transformers and classifier fitted on one training index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub recipe: Recipe,
    pub imputer: Option<Imputer>,
    pub encoder: EncoderState,
    pub scaler: Option<ScalerState>,
    pub model: FittedModel,
    pub train_indices: Vec<usize>,
}

/// Imputer, encoder and scaler fitted on `train`, plus the encoded,
/// scaled training matrix they produce.
pub fn fit_transformers(
    train: &Table,
    recipe: &Recipe,
) -> Result<(Option<Imputer>, EncoderState, Option<ScalerState>, Array2<f64>)> {
    let imputer = if recipe.impute { Some(Imputer::fit(train, true)?) } else { None };
    let imputed;
    let source = match &imputer {
        Some(imp) => {
            imputed = imp.transform(train)?;
            &imputed
        }
        None => train,
    };
    let (encoder, x) = encoder_fit_transform(source, recipe.encoder, recipe.drop_first)?;
    let (scaler, x) = match recipe.scaler {
        Some(kind) => {
            let state = scaler_fit(&x, kind)?;
            let scaled = scaler_transform(&state, &x)?;
            (Some(state), scaled)
        }
        None => (None, x),
    };
    Ok((imputer, encoder, scaler, x))
}

impl FittedPipeline {
    /// Fit every stage on the rows `train` of `table`.
    pub fn fit(table: &Table, train: &[usize], recipe: &Recipe, model: &ModelConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::usage("training index set is empty"));
        }
        let train_table = table.select_rows(train)?;
        let labels = train_table.labels()?;
        let (imputer, encoder, scaler, x) = fit_transformers(&train_table, recipe)?;
        let fitted = model.fit(x.view(), &labels)?;
        Ok(FittedPipeline {
            recipe: recipe.clone(),
            imputer,
            encoder,
            scaler,
            model: fitted,
            train_indices: train.to_vec(),
        })
    }

    /// Apply the fitted transformers to every row of `table`.
    pub fn transform(&self, table: &Table) -> Result<Array2<f64>> {
        let imputed;
        let source = match &self.imputer {
            Some(imp) => {
                imputed = imp.transform(table)?;
                &imputed
            }
            None => table,
        };
        let x = self.encoder.transform(source)?;
        match &self.scaler {
            Some(s) => scaler_transform(s, &x),
            None => Ok(x),
        }
    }

    pub fn score(&self, table: &Table) -> Result<Array1<f64>> {
        self.model.score(self.transform(table)?.view())
    }

    pub fn predict(&self, table: &Table) -> Result<Vec<u8>> {
        self.model.predict(self.transform(table)?.view())
    }

    /// Predictions and scores from one transform pass.
    pub fn predict_with_scores(&self, table: &Table) -> Result<(Vec<u8>, Array1<f64>)> {
        let scores = self.score(table)?;
        let t = self.model.threshold();
        Ok((scores.iter().map(|&s| u8::from(s > t)).collect(), scores))
    }
}

pub fn pipeline_fit_predict(
    table: &Table,
    train: &[usize],
    test: &[usize],
    recipe: &Recipe,
    model: &ModelConfig,
) -> Result<(FittedPipeline, Vec<u8>, Array1<f64>)> {
    let mut seen = vec![false; table.n_rows()];
    for &i in train {
        if i >= table.n_rows() {
            return Err(Error::usage(format!("train index {i} out of range")));
        }
        seen[i] = true;
    }
    if let Some(&i) = test.iter().find(|&&i| i >= table.n_rows() || seen[i]) {
        return Err(Error::usage(format!("test index {i} is out of range or also in the training set")));
    }
    let pipeline = FittedPipeline::fit(table, train, recipe, model)?;
    let (preds, scores) = pipeline.predict_with_scores(&table.select_rows(test)?)?;
    Ok((pipeline, preds, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnSpec, Schema};
    use ndarray::array;

    fn table() -> Table {
        let schema = Schema::new(vec![
            ColumnSpec::categorical("mode", Role::Feature, ["web", "phone"]).unwrap(),
            ColumnSpec::categorical("grade", Role::Feature, ["a", "b", "c"]).unwrap(),
            ColumnSpec::numeric("age", Role::Feature),
            ColumnSpec::categorical("y", Role::Target, ["0", "1"]).unwrap(),
        ])
        .unwrap();
        Table::new(
            schema,
            vec![
                ColumnData::Categorical(vec![1, 0, 1]),
                ColumnData::Categorical(vec![0, 2, 1]),
                ColumnData::Numeric(vec![50.0, 60.0, 70.0]),
                ColumnData::Categorical(vec![0, 1, 0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn ordinal_codes_are_alphabetical() {
        let (_, x) = encoder_fit_transform(&table(), EncoderKind::Ordinal, false).unwrap();
        assert_eq!(x.column(0).to_vec(), vec![1.0, 0.0, 1.0]);
        assert_eq!(x.column(2).to_vec(), vec![50.0, 60.0, 70.0]);
    }

    #[test]
    fn one_hot_drop_first() {
        let (state, x) = encoder_fit_transform(&table(), EncoderKind::OneHot, true).unwrap();
        assert_eq!(state.output_names(), vec!["mode=web", "grade=b", "grade=c", "age"]);
        assert_eq!(x.row(0).to_vec(), vec![1.0, 0.0, 0.0, 50.0]);
        assert_eq!(x.row(1).to_vec(), vec![0.0, 0.0, 1.0, 60.0]);
        let (full, _) = encoder_fit_transform(&table(), EncoderKind::OneHot, false).unwrap();
        assert_eq!(full.output_names().len(), 6);
    }

    #[test]
    fn unseen_level_is_named() {
        let state = encoder_fit(&table(), EncoderKind::Ordinal, false).unwrap();
        let other = Table::new(
            Schema::new(vec![
                ColumnSpec::categorical("mode", Role::Feature, ["fax", "web"]).unwrap(),
                ColumnSpec::categorical("grade", Role::Feature, ["a", "b", "c"]).unwrap(),
                ColumnSpec::numeric("age", Role::Feature),
                ColumnSpec::categorical("y", Role::Target, ["0", "1"]).unwrap(),
            ])
            .unwrap(),
            vec![
                ColumnData::Categorical(vec![0]),
                ColumnData::Categorical(vec![0]),
                ColumnData::Numeric(vec![1.0]),
                ColumnData::Categorical(vec![0]),
            ],
        )
        .unwrap();
        match state.transform(&other) {
            Err(Error::Data(msg)) => assert!(msg.contains("fax"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standard_scaler_numbers() {
        let x = array![[1.0], [2.0], [3.0]];
        let s = scaler_fit(&x, ScalerKind::Standard).unwrap();
        let ScalerState::Standard { mean, std } = &s else { unreachable!() };
        assert_eq!(mean[0], 2.0);
        assert!((std[0] - 0.816_496_580_927_726).abs() < 1e-12);
        let t = scaler_transform(&s, &x).unwrap();
        assert!((t[[0, 0]] + 1.224_744_871_391_589).abs() < 1e-12 && t[[1, 0]] == 0.0);
        let one = scaler_fit(&array![[4.0, 5.0]], ScalerKind::Standard).unwrap();
        assert_eq!(scaler_transform(&one, &array![[9.0, 1.0]]).unwrap(), array![[0.0, 0.0]]);
    }

    #[test]
    fn min_max_scaler_numbers() {
        let s = scaler_fit(&array![[0.0], [10.0]], ScalerKind::MinMax).unwrap();
        assert_eq!(scaler_transform(&s, &array![[5.0], [20.0]]).unwrap(), array![[0.5], [2.0]]);
        let flat = scaler_fit(&array![[2.0], [2.0], [2.0]], ScalerKind::MinMax).unwrap();
        assert_eq!(flat, ScalerState::MinMax { min: vec![2.0], max: vec![2.0] });
        assert!(matches!(scaler_transform(&flat, &array![[1.0, 2.0]]), Err(Error::Usage(_))));
    }
}
