use super::schema::{ColumnKind, ColumnSpec};
use super::table::Table;
use crate::error::{Error, Result};

/// Numeric columns ranked by |Cohen's d| between the two target classes,
/// descending, ties kept in column order.
///
/// A column with no overall variance scores 0. A column whose classes are
/// internally constant but differ in mean separates perfectly and scores +∞.
pub fn rank_features(t: &Table) -> Result<Vec<(String, f64)>> {
    let numeric: Vec<usize> = t
        .columns()
        .iter()
        .enumerate()
        .filter(|(i, c)| c.is_numeric() && *i != t.target_index())
        .map(|(i, _)| i)
        .collect();
    if numeric.is_empty() {
        return Err(Error::Schema("no numeric columns to rank".into()));
    }
    let mut ranked: Vec<(usize, String, f64)> = numeric
        .into_iter()
        .map(|c| (c, t.columns()[c].name.clone(), effect_size(t, c)))
        .collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(_, n, d)| (n, d)).collect())
}

fn effect_size(t: &Table, col: usize) -> f64 {
    let mut n = [0f64; 2];
    let mut sum = [0f64; 2];
    for (i, r) in t.rows().iter().enumerate() {
        let c = t.label(i);
        n[c] += 1.0;
        sum[c] += r[col];
    }
    if n[0] < 1.0 || n[1] < 1.0 {
        return 0.0;
    }
    let m = [sum[0] / n[0], sum[1] / n[1]];
    let overall = (sum[0] + sum[1]) / (n[0] + n[1]);
    let mut ss = [0f64; 2];
    let mut ss_total = 0.0;
    for (i, r) in t.rows().iter().enumerate() {
        let c = t.label(i);
        ss[c] += (r[col] - m[c]).powi(2);
        ss_total += (r[col] - overall).powi(2);
    }
    if ss_total == 0.0 {
        return 0.0;
    }
    let dof = n[0] + n[1] - 2.0;
    let pooled = if dof > 0.0 { (ss[0] + ss[1]) / dof } else { 0.0 };
    let diff = (m[1] - m[0]).abs();
    if pooled == 0.0 {
        return if diff > 0.0 { f64::INFINITY } else { 0.0 };
    }
    diff / pooled.sqrt()
}

/// Design-matrix encoding for learning: numeric columns min–max scaled with
/// their declared bounds, categoricals one-hot with the first level dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    columns: Vec<ColumnSpec>,
    target: usize,
    names: Vec<String>,
}

impl Encoder {
    pub fn for_table(t: &Table) -> Self {
        let mut names = Vec::new();
        for (i, c) in t.columns().iter().enumerate() {
            if i == t.target_index() {
                continue;
            }
            match &c.kind {
                ColumnKind::Numeric { .. } => names.push(c.name.clone()),
                ColumnKind::Categorical { categories } => {
                    names.extend(categories[1..].iter().map(|l| format!("{}={l}", c.name)))
                }
            }
        }
        Self {
            columns: t.columns().to_vec(),
            target: t.target_index(),
            names,
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub fn encode_row(&self, row: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for (i, c) in self.columns.iter().enumerate() {
            if i == self.target {
                continue;
            }
            match &c.kind {
                ColumnKind::Numeric { lo, hi } => x.push((row[i] - lo) / (hi - lo)),
                ColumnKind::Categorical { categories } => {
                    let level = row[i] as usize;
                    x.extend((1..categories.len()).map(|l| if l == level { 1.0 } else { 0.0 }));
                }
            }
        }
        x
    }

    /// `(features, labels)` for every row.
    pub fn encode(&self, t: &Table) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if t.columns() != self.columns.as_slice() {
            return Err(Error::Schema("table schema differs from encoder schema".into()));
        }
        let xs = t.rows().iter().map(|r| self.encode_row(r)).collect();
        let ys = (0..t.len()).map(|i| t.label(i) as f64).collect();
        Ok((xs, ys))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols() -> Vec<ColumnSpec> {
        vec![
            ColumnSpec::numeric("same", 0.0, 10.0).unwrap(),
            ColumnSpec::numeric("noisy", 0.0, 10.0).unwrap(),
            ColumnSpec::numeric("copy", 0.0, 1.0).unwrap(),
            ColumnSpec::categorical("cat", &["a", "b", "c"]).unwrap(),
            ColumnSpec::categorical("y", &["0", "1"]).unwrap(),
        ]
    }

    fn table() -> Table {
        let rows = (0..40)
            .map(|i| {
                let y = (i % 2) as f64;
                vec![5.0, (i % 7) as f64 + y, y, (i % 3) as f64, y]
            })
            .collect();
        Table::new(cols(), "y", rows).unwrap()
    }

    #[test]
    fn ranking_extremes() {
        let r = rank_features(&table()).unwrap();
        assert_eq!(r[0].0, "copy");
        assert!(r[0].1.is_infinite());
        let same = r.iter().find(|(n, _)| n == "same").unwrap();
        assert_eq!(same.1, 0.0);
        assert_eq!(r.last().unwrap().0, "same");
    }

    #[test]
    fn one_hot_drops_first_level() {
        let t = table();
        let e = Encoder::for_table(&t);
        assert_eq!(e.feature_names(), &["same", "noisy", "copy", "cat=b", "cat=c"]);
        let (xs, ys) = e.encode(&t).unwrap();
        assert_eq!(xs.len(), t.len());
        assert_eq!(ys.iter().filter(|&&y| y == 1.0).count(), t.class_counts()[1]);
        assert_eq!(xs[0], vec![0.5, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(xs[2][3..], [0.0, 1.0]);
    }
}
