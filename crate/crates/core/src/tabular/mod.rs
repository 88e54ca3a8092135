//! Dataset representation, CSV ingestion, imputation, split plans, the cohort
//! confidence-interval formula and the synthetic survey generator.

mod csv_io;
mod impute;
mod schema;
mod split;
mod synth;

pub use csv_io::{read_csv, read_csv_from_reader, write_csv, write_csv_to_writer};
pub use impute::{impute_most_frequent, Imputer};
pub use schema::{ColumnKind, ColumnSpec, Role, Schema};
pub use split::{
    proportion_ci, shuffle_split_iter, train_test_split, ProportionCi, ShuffleSplit, Split,
    SplitPlan,
};
pub use synth::{
    default_plant, synth_generate, synthetic_schema, PlantedEffect, SyntheticConfig,
    SYNTHETIC_SCHEMA_TEXT,
};

use crate::error::{Error, Result};

/// Reserved level code marking a missing categorical cell.
pub const MISSING_CODE: u32 = u32::MAX;

/// Cell storage for one column. Missing numeric cells are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Categorical(Vec<u32>),
    Numeric(Vec<f64>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Categorical(v) => v[row] == MISSING_CODE,
            ColumnData::Numeric(v) => v[row].is_nan(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&r| self.is_missing(r)).count()
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Categorical(v) => ColumnData::Categorical(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    /// Reorder cells so that cell `i` takes the value previously at `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> ColumnData {
        self.select(order)
    }
}

/// Column-major table whose cells are coded against a [`Schema`].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: Schema,
    n_rows: usize,
    columns: Vec<ColumnData>,
}

impl Table {
    /// Assemble a table, checking column count, column kinds, row counts and
    /// level codes against the schema.
    pub fn new(schema: Schema, columns: Vec<ColumnData>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::data(format!(
                "expected {} columns, got {}",
                schema.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, ColumnData::len);
        for (spec, data) in schema.columns().iter().zip(&columns) {
            if data.len() != n_rows {
                return Err(Error::data(format!(
                    "column '{}' has {} rows, expected {}",
                    spec.name,
                    data.len(),
                    n_rows
                )));
            }
            match (&spec.kind, data) {
                (ColumnKind::Categorical { levels }, ColumnData::Categorical(codes)) => {
                    if let Some(&bad) = codes
                        .iter()
                        .find(|&&c| c != MISSING_CODE && c as usize >= levels.len())
                    {
                        return Err(Error::data(format!(
                            "column '{}' holds code {bad} but has {} levels",
                            spec.name,
                            levels.len()
                        )));
                    }
                }
                (ColumnKind::Numeric, ColumnData::Numeric(_)) => {}
                _ => {
                    return Err(Error::data(format!(
                        "column '{}' data kind does not match schema",
                        spec.name
                    )))
                }
            }
        }
        Ok(Table { schema, n_rows, columns })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &ColumnData {
        &self.columns[index]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.index_of(name)
    }

    /// Binary labels read from the target column (level "0" → 0, "1" → 1).
    pub fn labels(&self) -> Result<Vec<u8>> {
        let target = self.schema.target_index();
        let ColumnData::Categorical(codes) = &self.columns[target] else {
            unreachable!("schema guarantees a categorical target");
        };
        codes
            .iter()
            .enumerate()
            .map(|(row, &c)| {
                if c == MISSING_CODE {
                    Err(Error::data(format!(
                        "row {row}: target column '{}' is missing",
                        self.schema.columns()[target].name
                    )))
                } else {
                    Ok(c as u8)
                }
            })
            .collect()
    }

    /// A new table holding `rows` (in the given order, duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Table> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows) {
            return Err(Error::usage(format!(
                "row index {bad} out of range for table with {} rows",
                self.n_rows
            )));
        }
        Ok(Table {
            schema: self.schema.clone(),
            n_rows: rows.len(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
        })
    }

    /// Replace one column's cells, keeping the schema.
    pub fn with_column(&self, index: usize, data: ColumnData) -> Result<Table> {
        let mut columns = self.columns.clone();
        columns[index] = data;
        Table::new(self.schema.clone(), columns)
    }

    /// Level text of a categorical cell, `None` when missing.
    pub fn level(&self, column: usize, row: usize) -> Option<&str> {
        match (&self.schema.columns()[column].kind, &self.columns[column]) {
            (ColumnKind::Categorical { levels }, ColumnData::Categorical(codes)) => {
                let c = codes[row];
                (c != MISSING_CODE).then(|| levels[c as usize].as_str())
            }
            _ => None,
        }
    }
}
