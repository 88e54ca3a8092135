use serde::{Deserialize, Serialize};

use super::{ColumnData, Table, MISSING_CODE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Fill {
    Level(u32),
    Value(f64),
}

/// Fitted fill values for feature columns: the modal level of each
/// categorical column (ties to the lexicographically smallest level) and,
/// optionally, the median of each numeric column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    fills: Vec<Option<Fill>>,
}

impl Imputer {
    /// Fit on every row of `table`. Numeric columns are left alone unless
    /// `numeric_median` is set.
    pub fn fit(table: &Table, numeric_median: bool) -> Result<Self> {
        let features = table.schema().feature_indices();
        let mut fills = vec![None; table.schema().len()];
        for col in features {
            let spec = &table.schema().columns()[col];
            match table.column(col) {
                ColumnData::Categorical(codes) => {
                    let n_levels = spec.levels().map_or(0, <[String]>::len);
                    let mut counts = vec![0usize; n_levels];
                    for &c in codes.iter().filter(|&&c| c != MISSING_CODE) {
                        counts[c as usize] += 1;
                    }
                    if counts.iter().all(|&n| n == 0) {
                        return Err(Error::data(format!(
                            "column '{}' is entirely missing",
                            spec.name
                        )));
                    }
                    // max_by_key keeps the last maximum; scan in reverse so the
                    // smallest code wins ties.
                    let mode = (0..n_levels)
                        .rev()
                        .max_by_key(|&l| counts[l])
                        .expect("at least one level");
                    fills[col] = Some(Fill::Level(mode as u32));
                }
                ColumnData::Numeric(values) if numeric_median => {
                    let mut present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
                    if present.is_empty() {
                        return Err(Error::data(format!(
                            "column '{}' is entirely missing",
                            spec.name
                        )));
                    }
                    present.sort_by(f64::total_cmp);
                    let m = present.len();
                    let median = if m % 2 == 1 {
                        present[m / 2]
                    } else {
                        0.5 * (present[m / 2 - 1] + present[m / 2])
                    };
                    fills[col] = Some(Fill::Value(median));
                }
                ColumnData::Numeric(_) => {}
            }
        }
        Ok(Imputer { fills })
    }

    /// Replace missing cells of fitted columns with the stored fills.
    pub fn transform(&self, table: &Table) -> Result<Table> {
        if self.fills.len() != table.schema().len() {
            return Err(Error::usage("imputer was fitted on a different schema"));
        }
        let columns = table
            .columns()
            .iter()
            .zip(&self.fills)
            .map(|(data, fill)| match (data, fill) {
                (ColumnData::Categorical(codes), Some(Fill::Level(level))) => ColumnData::Categorical(
                    codes.iter().map(|&c| if c == MISSING_CODE { *level } else { c }).collect(),
                ),
                (ColumnData::Numeric(values), Some(Fill::Value(v))) => ColumnData::Numeric(
                    values.iter().map(|&x| if x.is_nan() { *v } else { x }).collect(),
                ),
                (data, _) => data.clone(),
            })
            .collect();
        Table::new(table.schema().clone(), columns)
    }
}

/// Fill every missing categorical feature cell with its column's modal level.
pub fn impute_most_frequent(table: &Table) -> Result<Table> {
    Imputer::fit(table, false)?.transform(table)
}
