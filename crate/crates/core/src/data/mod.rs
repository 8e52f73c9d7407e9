//! Dataset ingestion: schema files, cleaning, balanced splits, sharding over
//! edge nodes, effect-size feature ranking and design-matrix encoding.

mod features;
mod schema;
mod split;
pub mod surrogate;
mod table;

use std::path::{Path, PathBuf};

pub use features::{rank_features, Encoder};
pub use schema::{
    builtin_schema, ColumnKind, ColumnSpec, DatasetSchema, Selection, BUILTIN_SCHEMAS, DATASETS,
};
pub use split::{balanced_split, shard, Shards, SplitSpec, MIN_CLASS_ROWS};
pub use table::{load_csv, load_csv_with_report, LoadReport, Row, Table, MISSING};

use crate::error::{Error, Result};

pub const DATA_DIR_ENV: &str = "FEDSANDBOX_DATA_DIR";

/// Datasets shipped with the repository.
pub fn bundled_data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets")
}

/// `$FEDSANDBOX_DATA_DIR` if set, else the bundled directory.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(bundled_data_dir)
}

/// Where a loaded table came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    File(PathBuf),
    /// Generated by [`surrogate::generate_csv`], not real records.
    Synthetic(PathBuf),
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::File(p) => write!(f, "{}", p.display()),
            Source::Synthetic(p) => write!(f, "{} (synthetic surrogate)", p.display()),
        }
    }
}

/// Marker file written next to a generated surrogate.
fn surrogate_marker(csv: &Path) -> PathBuf {
    csv.with_extension("synthetic")
}

/// A dataset ready for the experiments.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub table: Table,
    pub report: LoadReport,
    pub source: Source,
    /// Numeric column the t-test runs on.
    pub selected: String,
}

impl Dataset {
    /// Loads a built-in dataset, looking first in `dir`, then in the bundled
    /// directory.
    pub fn load(name: &str, dir: Option<&Path>) -> Result<Self> {
        let schema = builtin_schema(name)?;
        let candidates: Vec<PathBuf> = dir
            .map(Path::to_path_buf)
            .into_iter()
            .chain([data_dir(), bundled_data_dir()])
            .map(|d| d.join(&schema.file))
            .collect();
        let path = candidates.iter().find(|p| p.exists()).cloned().ok_or_else(|| {
            Error::Config(format!(
                "{} not found (looked in {}); set {DATA_DIR_ENV} or run `fedsandbox prepare {name} --synthetic`",
                schema.file,
                candidates
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
        Self::from_path(schema, &path)
    }

    pub fn from_path(schema: DatasetSchema, path: &Path) -> Result<Self> {
        let (table, report) = load_csv_with_report(path, &schema)?;
        let source = if surrogate_marker(path).exists() {
            Source::Synthetic(path.to_path_buf())
        } else {
            Source::File(path.to_path_buf())
        };
        let selected = match &schema.select {
            Selection::Column(c) => c.clone(),
            Selection::Auto => rank_features(&table)?
                .first()
                .map(|(n, _)| n.clone())
                .ok_or_else(|| Error::Schema("no numeric column to select".into()))?,
        };
        Ok(Self {
            schema,
            table,
            report,
            source,
            selected,
        })
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.source, Source::Synthetic(_))
    }
}

/// Writes a synthetic surrogate for `name` into `dir` and marks it as such.
pub fn write_surrogate(name: &str, dir: &Path, rows: Option<usize>, seed: u64) -> Result<PathBuf> {
    let schema = builtin_schema(name)?;
    let csv = surrogate::generate_csv(&schema, rows, seed)?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join(&schema.file);
    std::fs::write(&path, csv)?;
    std::fs::write(
        surrogate_marker(&path),
        format!("synthetic surrogate for {name}, seed {seed}; not real records\n"),
    )?;
    Ok(path)
}
