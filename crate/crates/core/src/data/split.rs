use rand::seq::SliceRandom;

use super::table::Table;
use crate::error::{Error, Result};
use crate::seed;

/// Minimum rows per class accepted by [`balanced_split`].
pub const MIN_CLASS_ROWS: usize = 10;

/// Balanced train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train: Table,
    pub test: Table,
    pub seed: u64,
}

/// Splits into balanced train and test sets. The majority class is
/// downsampled to the minority count `m`; each class then contributes
/// `round(m/5)` rows to test and the remainder to train.
pub fn balanced_split(t: &Table, seed: u64) -> Result<SplitSpec> {
    let counts = t.class_counts();
    if counts.iter().any(|&c| c < MIN_CLASS_ROWS) {
        return Err(Error::InsufficientData(format!(
            "each class needs at least {MIN_CLASS_ROWS} rows, got {counts:?}"
        )));
    }
    let m = counts[0].min(counts[1]);
    let n_test = ((m as f64) / 5.0).round() as usize;
    let n_train = m - n_test;

    let mut rng = seed::rng(seed::derive(seed, &[seed::stream::SPLIT]));
    let mut train = Vec::with_capacity(2 * n_train);
    let mut test = Vec::with_capacity(2 * n_test);
    for class in 0..2 {
        let mut idx: Vec<usize> = (0..t.len()).filter(|&i| t.label(i) == class).collect();
        idx.shuffle(&mut rng);
        test.extend(idx[..n_test].iter().copied());
        train.extend(idx[n_test..n_test + n_train].iter().copied());
    }
    // Restore file order so the split does not leak class blocks.
    train.sort_unstable();
    test.sort_unstable();
    let take = |ix: &[usize]| t.derive(ix.iter().map(|&i| t.rows()[i].clone()).collect());
    Ok(SplitSpec {
        train: take(&train),
        test: take(&test),
        seed,
    })
}

/// Even partition of a table over `K` edge nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Shards {
    pub node_tables: Vec<Table>,
    pub origin: Table,
}

impl Shards {
    pub fn k(&self) -> usize {
        self.node_tables.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.node_tables.iter().map(Table::len).collect()
    }
}

/// Randomly assigns rows to `k` shards whose sizes differ by at most one.
/// `k = 1` returns the table unchanged.
pub fn shard(t: &Table, k: usize, seed: u64) -> Result<Shards> {
    if k == 0 || k > t.len() {
        return Err(Error::Config(format!(
            "cannot split {} rows over {k} nodes",
            t.len()
        )));
    }
    if k == 1 {
        return Ok(Shards {
            node_tables: vec![t.clone()],
            origin: t.clone(),
        });
    }
    let mut idx: Vec<usize> = (0..t.len()).collect();
    idx.shuffle(&mut seed::rng(seed::derive(seed, &[seed::stream::SHARD, k as u64])));
    let base = t.len() / k;
    let extra = t.len() % k;
    let mut node_tables = Vec::with_capacity(k);
    let mut start = 0;
    for node in 0..k {
        let size = base + usize::from(node < extra);
        let mut ix = idx[start..start + size].to_vec();
        ix.sort_unstable();
        node_tables.push(t.derive(ix.into_iter().map(|i| t.rows()[i].clone()).collect()));
        start += size;
    }
    Ok(Shards {
        node_tables,
        origin: t.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::ColumnSpec;

    pub(crate) fn synthetic(a: usize, b: usize) -> Table {
        let cols = vec![
            ColumnSpec::numeric("x", 0.0, 1e6).unwrap(),
            ColumnSpec::categorical("y", &["a", "b"]).unwrap(),
        ];
        let rows = (0..a)
            .map(|i| vec![i as f64, 0.0])
            .chain((0..b).map(|i| vec![(a + i) as f64, 1.0]))
            .collect();
        Table::new(cols, "y", rows).unwrap()
    }

    #[test]
    fn split_counts_follow_minority_rule() {
        let s = balanced_split(&synthetic(100, 60), 1).unwrap();
        assert_eq!(s.test.class_counts(), [12, 12]);
        assert_eq!(s.train.class_counts(), [48, 48]);
    }

    #[test]
    fn split_balanced_input() {
        let s = balanced_split(&synthetic(50, 50), 3).unwrap();
        let [a, b] = s.test.class_counts();
        assert!(a.abs_diff(b) <= 1);
        let [a, b] = s.train.class_counts();
        assert!(a.abs_diff(b) <= 1);
    }

    #[test]
    fn split_deterministic_and_disjoint() {
        let t = synthetic(80, 40);
        let a = balanced_split(&t, 7).unwrap();
        assert_eq!(a, balanced_split(&t, 7).unwrap());
        assert_ne!(a, balanced_split(&t, 8).unwrap());
        assert!(a.train.row_set().is_disjoint(&a.test.row_set()));
    }

    #[test]
    fn split_needs_ten_per_class() {
        assert!(matches!(
            balanced_split(&synthetic(100, 9), 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn shard_sizes() {
        let t = synthetic(200, 103);
        let s = shard(&t, 2, 0).unwrap();
        let mut sizes = s.sizes();
        sizes.sort();
        assert_eq!(sizes, vec![151, 152]);
        let one = shard(&t, 1, 0).unwrap();
        assert_eq!(one.node_tables[0], t);
        assert!(shard(&t, 304, 0).is_err());
        assert!(shard(&t, 0, 0).is_err());
    }
}
