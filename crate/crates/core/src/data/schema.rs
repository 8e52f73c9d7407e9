//! Line-oriented `key = value` dataset schema files.
//!
//! ```text
//! name = heart
//! file = heart.csv
//! target = target
//! select = thalach          # or `auto`
//! delta = 1e-5
//! subsample = 20000         # optional
//! column = thalach numeric 71 202
//! column = thal categorical normal,fixed,reversible
//! surrogate.<key> = ...     # optional synthetic-data hints
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Numeric { lo: f64, hi: f64 },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn numeric(name: &str, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Schema(format!("column {name}: bounds need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self {
            name: name.to_string(),
            kind: ColumnKind::Numeric { lo, hi },
        })
    }

    pub fn categorical<S: AsRef<str>>(name: &str, categories: &[S]) -> Result<Self> {
        let categories: Vec<String> = categories.iter().map(|c| c.as_ref().to_string()).collect();
        if categories.len() < 2 {
            return Err(Error::Schema(format!("column {name}: needs at least 2 categories")));
        }
        let mut sorted = categories.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != categories.len() {
            return Err(Error::Schema(format!("column {name}: duplicate category labels")));
        }
        Ok(Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical { categories },
        })
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            ColumnKind::Numeric { lo, hi } => Some((lo, hi)),
            ColumnKind::Categorical { .. } => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric { .. })
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { categories } => Some(categories),
            ColumnKind::Numeric { .. } => None,
        }
    }
}

/// Which column the t-test runs on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Column(String),
    /// Top of the effect-size ranking.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSchema {
    pub name: String,
    pub file: String,
    pub target: String,
    pub select: Selection,
    pub delta: f64,
    pub subsample: Option<usize>,
    pub columns: Vec<ColumnSpec>,
    /// Raw `surrogate.*` hints, keyed without the prefix.
    pub surrogate: BTreeMap<String, String>,
}

impl DatasetSchema {
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut file = None;
        let mut target = None;
        let mut select = Selection::Auto;
        let mut delta = None;
        let mut subsample = None;
        let mut columns = Vec::new();
        let mut surrogate = BTreeMap::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Schema(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Schema(format!("line {}: {what}", lineno + 1));
            match key {
                "name" => name = Some(value.to_string()),
                "file" => file = Some(value.to_string()),
                "target" => target = Some(value.to_string()),
                "select" => {
                    select = if value == "auto" {
                        Selection::Auto
                    } else {
                        Selection::Column(value.to_string())
                    }
                }
                "delta" => delta = Some(value.parse::<f64>().map_err(|_| bad("bad delta"))?),
                "subsample" => {
                    let n = value.parse::<usize>().map_err(|_| bad("bad subsample"))?;
                    subsample = (n > 0).then_some(n);
                }
                "column" => {
                    let mut parts = value.split_whitespace();
                    let cname = parts.next().ok_or_else(|| bad("column needs a name"))?;
                    let spec = match parts.next() {
                        Some("numeric") => {
                            let lo = parts.next().and_then(|s| s.parse().ok());
                            let hi = parts.next().and_then(|s| s.parse().ok());
                            match (lo, hi) {
                                (Some(lo), Some(hi)) => ColumnSpec::numeric(cname, lo, hi)?,
                                _ => return Err(bad("numeric column needs `lo hi`")),
                            }
                        }
                        Some("categorical") => {
                            let cats = parts.next().ok_or_else(|| bad("categorical column needs labels"))?;
                            let labels: Vec<&str> = cats.split(',').map(str::trim).collect();
                            ColumnSpec::categorical(cname, &labels)?
                        }
                        _ => return Err(bad("column kind must be `numeric` or `categorical`")),
                    };
                    if parts.next().is_some() {
                        return Err(bad("trailing tokens after column definition"));
                    }
                    columns.push(spec);
                }
                k if k.starts_with("surrogate.") => {
                    surrogate.insert(k["surrogate.".len()..].to_string(), value.to_string());
                }
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }

        let missing = |k: &str| Error::Schema(format!("missing `{k}`"));
        let schema = Self {
            name: name.ok_or_else(|| missing("name"))?,
            file: file.ok_or_else(|| missing("file"))?,
            target: target.ok_or_else(|| missing("target"))?,
            select,
            delta: delta.ok_or_else(|| missing("delta"))?,
            subsample,
            columns,
            surrogate,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema("duplicate column names".into()));
        }
        let target = self
            .column(&self.target)
            .ok_or_else(|| Error::Schema(format!("target `{}` is not a column", self.target)))?;
        match target.categories() {
            Some(c) if c.len() == 2 => {}
            _ => {
                return Err(Error::Schema(format!(
                    "target `{}` must be categorical with exactly 2 classes",
                    self.target
                )))
            }
        }
        if let Selection::Column(c) = &self.select {
            match self.column(c) {
                Some(spec) if spec.is_numeric() => {}
                _ => return Err(Error::Schema(format!("selected column `{c}` must be numeric"))),
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Schema(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }
}

macro_rules! builtin {
    ($($name:literal),*) => {
        /// Schema files shipped with the repository.
        pub const BUILTIN_SCHEMAS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../../datasets/", $name, ".schema")))),*
        ];
    };
}
builtin!("heart", "framingham", "adult", "brfss");

/// Dataset names in the order the tables list them.
pub const DATASETS: &[&str] = &["heart", "framingham", "adult", "brfss"];

pub fn builtin_schema(name: &str) -> Result<DatasetSchema> {
    let text = BUILTIN_SCHEMAS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown dataset `{name}`")))?;
    DatasetSchema::parse(text)
}
