use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnData, ColumnKind, Schema, Table, MISSING_CODE};
use crate::error::{Error, Result};

/// Read a comma-separated, double-quote-escaped UTF-8 file whose header row
/// lists the schema's column names in order. Empty fields are missing cells.
pub fn read_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Table> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv_from_reader(file, schema)
}

pub fn read_csv_from_reader<R: Read>(reader: R, schema: &Schema) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::data("missing header row")),
    };
    let names: Vec<&str> = header.iter().collect();
    let expected: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
    if names != expected {
        return Err(Error::data(format!(
            "header {names:?} does not match schema columns {expected:?}"
        )));
    }

    let lookups: Vec<Option<HashMap<&str, u32>>> = schema
        .columns()
        .iter()
        .map(|c| {
            c.levels()
                .map(|lv| lv.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect())
        })
        .collect();
    let mut columns: Vec<ColumnData> = schema
        .columns()
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Categorical { .. } => ColumnData::Categorical(Vec::new()),
            ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
        })
        .collect();

    for (row, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != schema.len() {
            return Err(Error::data(format!(
                "row {row}: expected {} fields, found {}",
                schema.len(),
                rec.len()
            )));
        }
        for (col, field) in rec.iter().enumerate() {
            let name = &schema.columns()[col].name;
            match &mut columns[col] {
                ColumnData::Categorical(codes) => {
                    if field.is_empty() {
                        codes.push(MISSING_CODE);
                        continue;
                    }
                    let lookup = lookups[col].as_ref().expect("categorical lookup");
                    match lookup.get(field) {
                        Some(&code) => codes.push(code),
                        None => {
                            return Err(Error::data(format!(
                                "row {row}, column '{name}': unknown level '{field}'"
                            )))
                        }
                    }
                }
                ColumnData::Numeric(values) => {
                    if field.trim().is_empty() {
                        values.push(f64::NAN);
                        continue;
                    }
                    match field.trim().parse::<f64>() {
                        Ok(v) => values.push(v),
                        Err(_) => {
                            return Err(Error::data(format!(
                                "row {row}, column '{name}': '{field}' is not numeric"
                            )))
                        }
                    }
                }
            }
        }
    }
    Table::new(schema.clone(), columns)
}

pub fn write_csv(path: impl AsRef<Path>, table: &Table) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv_to_writer(file, table)
}

/// Write the table in the dialect [`read_csv`] accepts. Numbers use Rust's
/// shortest round-trip formatting; missing cells are empty fields.
pub fn write_csv_to_writer<W: Write>(writer: W, table: &Table) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let schema = table.schema();
    wtr.write_record(schema.columns().iter().map(|c| c.name.as_str()))?;
    let mut record: Vec<String> = Vec::with_capacity(schema.len());
    for row in 0..table.n_rows() {
        record.clear();
        for (col, spec) in schema.columns().iter().enumerate() {
            let cell = match (&spec.kind, table.column(col)) {
                (ColumnKind::Categorical { levels }, ColumnData::Categorical(codes)) => {
                    let c = codes[row];
                    if c == MISSING_CODE {
                        String::new()
                    } else {
                        levels[c as usize].clone()
                    }
                }
                (_, ColumnData::Numeric(values)) => {
                    let v = values[row];
                    if v.is_nan() {
                        String::new()
                    } else {
                        format!("{v}")
                    }
                }
                _ => unreachable!("table kinds are validated against the schema"),
            };
            record.push(cell);
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}
