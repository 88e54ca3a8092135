use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    /// Levels are kept sorted lexicographically; a level's code is its index.
    Categorical { levels: Vec<String> },
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Feature,
    Target,
    Id,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: Role,
}

impl ColumnSpec {
    /// Categorical column; `levels` are sorted and must be non-empty and unique.
    pub fn categorical<S: Into<String>>(name: &str, role: Role, levels: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        if levels.is_empty() {
            return Err(Error::usage(format!("column '{name}' has no levels")));
        }
        levels.sort();
        if let Some(w) = levels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::usage(format!("column '{name}' repeats level '{}'", w[0])));
        }
        Ok(ColumnSpec { name: name.to_string(), kind: ColumnKind::Categorical { levels }, role })
    }

    pub fn numeric(name: &str, role: Role) -> Self {
        ColumnSpec { name: name.to_string(), kind: ColumnKind::Numeric, role }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { levels } => Some(levels),
            ColumnKind::Numeric => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }
}

/// Ordered column list with exactly one binary target column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
    target: usize,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::usage("empty column name"));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::usage(format!("duplicate column '{}'", c.name)));
            }
            if let ColumnKind::Categorical { levels } = &c.kind {
                if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::usage(format!(
                        "column '{}' levels must be non-empty, unique and sorted",
                        c.name
                    )));
                }
            }
        }
        let targets: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Target)
            .map(|(i, _)| i)
            .collect();
        let [target] = targets[..] else {
            return Err(Error::usage(format!(
                "schema needs exactly one target column, found {}",
                targets.len()
            )));
        };
        match columns[target].levels() {
            Some(levels) if levels == ["0", "1"] => {}
            _ => {
                return Err(Error::usage(format!(
                    "target column '{}' must be categorical with levels 0|1",
                    columns[target].name
                )))
            }
        }
        Ok(Schema { columns, target })
    }

    /// Parse the schema-file format: one `name,kind,role[,l1|l2|...]` line per
    /// column. Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |msg: &str| Error::usage(format!("schema line {}: {msg}: '{line}'", lineno + 1));
            if parts.len() < 3 || parts.len() > 4 {
                return Err(bad("expected name,kind,role[,levels]"));
            }
            let role = match parts[2] {
                "feature" => Role::Feature,
                "target" => Role::Target,
                "id" => Role::Id,
                _ => return Err(bad("role must be feature, target or id")),
            };
            let spec = match (parts[1], parts.get(3)) {
                ("numeric", None) => ColumnSpec::numeric(parts[0], role),
                ("categorical", Some(levels)) => {
                    ColumnSpec::categorical(parts[0], role, levels.split('|').map(str::trim))?
                }
                ("numeric", Some(_)) => return Err(bad("numeric columns take no levels")),
                ("categorical", None) => return Err(bad("categorical columns need levels")),
                _ => return Err(bad("kind must be categorical or numeric")),
            };
            columns.push(spec);
        }
        Schema::new(columns)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Schema::parse(&text)
    }

    /// Render in the schema-file format accepted by [`Schema::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            let role = match c.role {
                Role::Feature => "feature",
                Role::Target => "target",
                Role::Id => "id",
            };
            match &c.kind {
                ColumnKind::Numeric => out.push_str(&format!("{},numeric,{role}\n", c.name)),
                ColumnKind::Categorical { levels } => {
                    out.push_str(&format!("{},categorical,{role},{}\n", c.name, levels.join("|")))
                }
            }
        }
        out
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Indices of feature-role columns in schema order.
    pub fn feature_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Feature)
            .map(|(i, _)| i)
            .collect()
    }
}
