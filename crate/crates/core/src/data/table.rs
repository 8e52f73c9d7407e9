use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;

use super::schema::{ColumnKind, ColumnSpec, DatasetSchema};
use crate::error::{Error, Result};
use crate::seed;

/// Labels treated as missing values.
pub const MISSING: &[&str] = &["", "?"];

pub type Row = Vec<f64>;

/// Immutable cleaned table. Numeric cells hold the clamped value,
/// categorical cells the category index.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Arc<Vec<ColumnSpec>>,
    target: usize,
    rows: Vec<Row>,
}

/// Counts collected while loading a raw file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub raw_rows: usize,
    pub missing_dropped: usize,
    pub duplicates_dropped: usize,
    pub clamped_cells: usize,
    pub subsampled_out: usize,
}

fn row_key(row: &[f64]) -> Vec<u64> {
    // +0.0 folds -0.0 into 0.0
    row.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl Table {
    /// Builds a table from already-encoded rows, enforcing the invariants.
    pub fn new(columns: Vec<ColumnSpec>, target: &str, rows: Vec<Row>) -> Result<Self> {
        Self::with_shared(Arc::new(columns), target, rows)
    }

    fn with_shared(columns: Arc<Vec<ColumnSpec>>, target: &str, rows: Vec<Row>) -> Result<Self> {
        let t = columns
            .iter()
            .position(|c| c.name == target)
            .ok_or_else(|| Error::Schema(format!("target `{target}` is not a column")))?;
        if columns[t].categories().map(|c| c.len()) != Some(2) {
            return Err(Error::Schema(format!("target `{target}` must have exactly 2 classes")));
        }
        let mut seen = HashSet::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(Error::Schema(format!("row {i} has {} cells, expected {}", r.len(), columns.len())));
            }
            for (v, c) in r.iter().zip(columns.iter()) {
                let ok = match &c.kind {
                    ColumnKind::Numeric { lo, hi } => *v >= *lo && *v <= *hi,
                    ColumnKind::Categorical { categories } => {
                        v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < categories.len()
                    }
                };
                if !ok {
                    return Err(Error::Schema(format!("row {i}: value {v} invalid for column {}", c.name)));
                }
            }
            if !seen.insert(row_key(r)) {
                return Err(Error::Schema(format!("row {i} duplicates an earlier row")));
            }
        }
        Ok(Self {
            columns,
            target: t,
            rows,
        })
    }

    /// Subset sharing this table's schema. Rows are assumed valid and distinct.
    pub(crate) fn derive(&self, rows: Vec<Row>) -> Self {
        Self {
            columns: Arc::clone(&self.columns),
            target: self.target,
            rows,
        }
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_name(&self) -> &str {
        &self.columns[self.target].name
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Schema(format!("no column `{name}`")))
    }

    /// Class label (0 or 1) of row `i`.
    pub fn label(&self, i: usize) -> usize {
        self.rows[i][self.target] as usize
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0usize; 2];
        for r in &self.rows {
            c[r[self.target] as usize] += 1;
        }
        c
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[col]).collect()
    }

    /// Seeded random subset of `n` rows (all rows if `n >= len`).
    pub fn subsample(&self, n: usize, seed: u64) -> Self {
        if n >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seed::rng(seed));
        idx.truncate(n);
        idx.sort_unstable();
        self.derive(idx.into_iter().map(|i| self.rows[i].clone()).collect())
    }

    /// Set of row keys, for order-insensitive comparisons.
    pub fn row_set(&self) -> HashSet<Vec<u64>> {
        self.rows.iter().map(|r| row_key(r)).collect()
    }
}

fn parse_cell(raw: &str, spec: &ColumnSpec, clamped: &mut usize) -> std::result::Result<f64, String> {
    match &spec.kind {
        ColumnKind::Numeric { lo, hi } => {
            let v: f64 = raw
                .parse()
                .map_err(|_| format!("column {}: `{raw}` is not a number", spec.name))?;
            if !v.is_finite() {
                return Err(format!("column {}: non-finite value", spec.name));
            }
            if v < *lo || v > *hi {
                *clamped += 1;
            }
            Ok(v.clamp(*lo, *hi))
        }
        ColumnKind::Categorical { categories } => categories
            .iter()
            .position(|c| c == raw)
            .map(|i| i as f64)
            .ok_or_else(|| format!("column {}: unknown category `{raw}`", spec.name)),
    }
}

/// Loads and cleans a CSV file against `schema`: drops rows with missing
/// values, clamps numerics to their declared bounds and removes duplicates.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<Table> {
    load_csv_with_report(path, schema).map(|(t, _)| t)
}

pub fn load_csv_with_report(path: &Path, schema: &DatasetSchema) -> Result<(Table, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_to_parse(path, e))?;
    let header = rdr.headers().map_err(|e| csv_to_parse(path, e))?.clone();

    let pos: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut mapping = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let i = pos.get(c.name.as_str()).ok_or_else(|| {
            Error::Schema(format!("{}: header lacks column `{}`", path.display(), c.name))
        })?;
        mapping.push(*i);
    }
    if header.len() != schema.columns.len() {
        let extra: Vec<&str> = header
            .iter()
            .filter(|h| schema.column(h).is_none())
            .collect();
        return Err(Error::Schema(format!("{}: unexpected columns {extra:?}", path.display())));
    }

    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_to_parse(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        report.raw_rows += 1;
        if mapping.iter().any(|&i| MISSING.contains(&rec.get(i).unwrap_or(""))) {
            report.missing_dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(mapping.len());
        for (spec, &i) in schema.columns.iter().zip(&mapping) {
            let v = parse_cell(&rec[i], spec, &mut report.clamped_cells).map_err(|msg| {
                if matches!(spec.kind, ColumnKind::Categorical { .. }) {
                    Error::Schema(format!("{}: line {line}: {msg}", path.display()))
                } else {
                    Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        msg,
                    }
                }
            })?;
            row.push(v);
        }
        if seen.insert(row_key(&row)) {
            rows.push(row);
        } else {
            report.duplicates_dropped += 1;
        }
    }
    let mut table = Table::new(schema.columns.clone(), &schema.target, rows)?;
    if let Some(n) = schema.subsample {
        let before = table.len();
        table = table.subsample(n, seed::derive(0, &[seed::stream::SPLIT, n as u64]));
        report.subsampled_out = before - table.len();
    }
    Ok((table, report))
}

fn csv_to_parse(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(e),
        _ => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        },
    }
}
