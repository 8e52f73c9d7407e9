//! Synthetic stand-ins for datasets that cannot be redistributed.
//!
//! Rows are drawn from the `surrogate.*` hints of a schema: a class label with
//! the given positive rate, numeric columns from a normal clamped to the
//! codebook bounds with a mean shift for the positive class, categorical
//! columns with a class-dependent probability of leaving the first level.
//! The output is labeled synthetic wherever it is used.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::schema::{ColumnKind, DatasetSchema};
use crate::error::{Error, Result};
use crate::seed;

fn hint(schema: &DatasetSchema, key: &str) -> Result<Vec<f64>> {
    let raw = schema
        .surrogate
        .get(key)
        .ok_or_else(|| Error::Schema(format!("{}: no surrogate hint for `{key}`", schema.name)))?;
    raw.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Schema(format!("{}: bad surrogate hint `{key} = {raw}`", schema.name)))
        })
        .collect()
}

fn format_value(v: f64, lo: f64, hi: f64) -> String {
    // short integer scales (ordinal codes, day counts) stay integral
    if lo.fract() == 0.0 && hi.fract() == 0.0 && hi - lo <= 30.0 {
        format!("{}", v.round())
    } else {
        format!("{:.1}", v)
    }
}

/// Generates a CSV document with `rows` records (the schema's
/// `surrogate.rows` if `None`).
pub fn generate_csv(schema: &DatasetSchema, rows: Option<usize>, seed_value: u64) -> Result<String> {
    let n = match rows {
        Some(n) => n,
        None => hint(schema, "rows")?[0] as usize,
    };
    let positive = hint(schema, "positive")?[0];
    let missing = schema
        .surrogate
        .get("missing")
        .map(|_| hint(schema, "missing").map(|v| v[0]))
        .transpose()?
        .unwrap_or(0.0);
    let mut rng = seed::rng(seed::derive(seed_value, &[0x5552_4f47]));

    let mut out = String::new();
    let header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    out.push_str(&header.join(","));
    out.push('\n');

    let mut gens = Vec::new();
    for c in &schema.columns {
        if c.name == schema.target {
            gens.push(None);
            continue;
        }
        gens.push(Some(hint(schema, &c.name)?));
    }

    for _ in 0..n {
        let y = usize::from(rng.random::<f64>() < positive);
        let mut cells = Vec::with_capacity(schema.columns.len());
        for (c, g) in schema.columns.iter().zip(&gens) {
            let cell = match (&c.kind, g) {
                (ColumnKind::Categorical { categories }, None) => categories[y].clone(),
                (ColumnKind::Numeric { lo, hi }, Some(h)) if h.len() == 3 => {
                    let mean = h[0] + h[2] * y as f64;
                    let v = Normal::new(mean, h[1].max(1e-9))
                        .map_err(|e| Error::Schema(e.to_string()))?
                        .sample(&mut rng)
                        .clamp(*lo, *hi);
                    format_value(v, *lo, *hi)
                }
                (ColumnKind::Categorical { categories }, Some(h)) if h.len() == 2 => {
                    let p = (h[0] + h[1] * y as f64).clamp(0.0, 1.0);
                    if rng.random::<f64>() < p {
                        let level = 1 + rng.random_range(0..categories.len() - 1);
                        categories[level].clone()
                    } else {
                        categories[0].clone()
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "{}: surrogate hint for `{}` has the wrong arity",
                        schema.name, c.name
                    )))
                }
            };
            let drop = c.name != schema.target && rng.random::<f64>() < missing / schema.columns.len() as f64;
            cells.push(if drop { String::new() } else { cell });
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    Ok(out)
}
