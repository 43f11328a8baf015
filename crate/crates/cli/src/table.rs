//! CSV tables: a header row followed by numeric rows.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::CliError;

/// Names accepted for the target column.
pub const TARGET_NAMES: [&str; 2] = ["y", "label"];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// A table split into feature columns and an optional target column.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub feature_names: Vec<String>,
    pub x: Array2<f64>,
    pub target: Option<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Separates the `y`/`label` column from the features.
    pub fn into_samples(self) -> Result<Samples, CliError> {
        let targets: Vec<usize> = (0..self.header.len())
            .filter(|&j| TARGET_NAMES.contains(&self.header[j].as_str()))
            .collect();
        if targets.len() > 1 {
            return Err(CliError::Usage("both `y` and `label` columns present".into()));
        }
        let t = targets.first().copied();
        let features: Vec<usize> = (0..self.header.len()).filter(|&j| Some(j) != t).collect();
        if features.is_empty() {
            return Err(CliError::Usage("no feature columns".into()));
        }
        let n = self.rows.len();
        let x = Array2::from_shape_fn((n, features.len()), |(i, k)| self.rows[i][features[k]]);
        let target = t.map(|j| self.rows.iter().map(|r| r[j]).collect());
        Ok(Samples {
            feature_names: features.iter().map(|&j| self.header[j].clone()).collect(),
            x,
            target,
        })
    }
}

/// Header `x1..xd` plus optional extra columns.
pub fn feature_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_csv(&text).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv(text: &str) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("bad header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Usage("missing header row".into()));
    }
    if let Some(h) = header.iter().find(|h| h.is_empty()) {
        return Err(CliError::Usage(format!("empty column name in header {h:?}")));
    }
    let mut table = Table::new(header);
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Usage(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(record.len());
        for (field, name) in record.iter().zip(&table.header) {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Usage(format!("line {line}, column `{name}`: `{field}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(CliError::Usage(format!("line {line}, column `{name}`: non-finite value")));
            }
            row.push(v);
        }
        table.rows.push(row);
    }
    if table.rows.is_empty() {
        return Err(CliError::Usage("no rows".into()));
    }
    Ok(table)
}

/// Shortest representation that parses back to the same `f64`.
pub fn render_csv(table: &Table) -> String {
    let mut out = table.header.join(",");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes to `path`, or to stdout when `path` is `None` or `-`.
pub fn write_csv(path: Option<&Path>, table: &Table) -> Result<(), CliError> {
    write_text(path, &render_csv(table))
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        _ => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}
