use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng;

use fedsandbox::data::{balanced_split, bundled_data_dir, shard, Dataset};
use fedsandbox::fedstats::{
    local_partials, merge_all, plaintext_t, run_scenario1, secure_partials, shard_partials, stats_codec, Budget,
    StatsTask,
};
use fedsandbox::secagg::{aggregate_modular, mask, root_secret, secure_sum, FixedPointCodec, PairwiseSeeds};
use fedsandbox::seed;

fn heart() -> (Dataset, StatsTask) {
    let ds = Dataset::load("heart", None).unwrap();
    let col = ds.table.column_index("thalach").unwrap();
    let task = StatsTask::for_column(&ds.table, col).unwrap();
    (ds, task)
}

#[test]
fn heart_loads_whole() {
    let (ds, _) = heart();
    assert_eq!(ds.table.len(), 303);
    assert_eq!(ds.selected, "thalach");
    assert!(!ds.is_synthetic());
    let split = balanced_split(&ds.table, 5).unwrap();
    let [a, b] = split.test.class_counts();
    assert_eq!(a, b);
}

#[test]
fn welch_t_matches_raw_scan() {
    // read the CSV directly, bypassing the loader
    let mut rdr = csv::Reader::from_path(bundled_data_dir().join("heart.csv")).unwrap();
    let head = rdr.headers().unwrap().clone();
    let xi = head.iter().position(|h| h == "thalach").unwrap();
    let yi = head.iter().position(|h| h == "target").unwrap();
    let mut groups = [Vec::new(), Vec::new()];
    for r in rdr.records() {
        let r = r.unwrap();
        let y: usize = r[yi].parse().unwrap();
        groups[y].push(r[xi].parse::<f64>().unwrap());
    }
    let stat = |g: &[f64]| {
        let n = g.len() as f64;
        let m = g.iter().sum::<f64>() / n;
        (m, g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0), n)
    };
    let (m1, v1, n1) = stat(&groups[1]);
    let (m0, v0, n0) = stat(&groups[0]);
    let want = (m1 - m0) / (v1 / n1 + v0 / n0).sqrt();
    let (ds, task) = heart();
    let got = plaintext_t(&ds.table, &task).unwrap();
    assert_relative_eq!(got.t.abs(), want.abs(), max_relative = 1e-10);
}

#[test]
fn shard_partials_add_up() {
    let (ds, task) = heart();
    let whole = local_partials(&ds.table, task.col).unwrap();
    for k in [1, 4, 16, 64] {
        let shards = shard(&ds.table, k, k as u64).unwrap();
        let merged = merge_all(&shard_partials(&shards, task.col).unwrap());
        for c in 0..2 {
            assert_eq!(merged[c].n, whole[c].n);
            assert_relative_eq!(merged[c].sum, whole[c].sum, max_relative = 1e-12);
            assert_relative_eq!(merged[c].sumsq, whole[c].sumsq, max_relative = 1e-12);
        }
        // through secure aggregation, up to quantization
        let codec = stats_codec(&shards).unwrap();
        let sec = secure_partials(&shards, &task, &codec, &root_secret(9), 0).unwrap();
        for c in 0..2 {
            assert_eq!(sec[c].n, whole[c].n);
            assert!((sec[c].sum - whole[c].sum).abs() < 131.0 * k as f64 * 2f64.powi(-15));
        }
    }
}

#[test]
fn huge_epsilon_recovers_the_truth() {
    let (ds, task) = heart();
    let truth = plaintext_t(&ds.table, &task).unwrap();
    let mut rng = seed::rng(3);
    let b = Budget::new(1e6, 1e-5).unwrap();
    let draws: Vec<f64> = (0..200)
        .map(|_| run_scenario1(&ds.table, &task, b, &mut rng).unwrap().t)
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((mean - truth.t).abs() < 0.01 * truth.t.abs(), "{mean} vs {}", truth.t);
}

#[test]
fn masks_cancel_exactly_in_the_ring() {
    let mut rng = seed::rng(41);
    let root = root_secret(41);
    for k in [2usize, 5, 17] {
        let inputs: Vec<Vec<u64>> = (0..k).map(|_| (0..32).map(|_| rng.random()).collect()).collect();
        let seeds = PairwiseSeeds::all(&root, k, 7);
        let shares: Vec<_> = inputs.iter().enumerate().map(|(i, v)| mask(v, i, &seeds, k).unwrap()).collect();
        // no share reveals its input when k > 1
        assert!(shares.iter().zip(&inputs).all(|(s, v)| &s.payload != v));
        let sum = aggregate_modular(&shares, k).unwrap();
        let want: Vec<u64> = (0..32)
            .map(|j| inputs.iter().fold(0u64, |a, v| a.wrapping_add(v[j])))
            .collect();
        assert_eq!(sum, want);
        assert!(aggregate_modular(&shares[1..], k).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn secure_sum_is_plain_sum(k in 1usize..12, dim in 1usize..20, seed_value in any::<u64>()) {
        let mut rng = seed::rng(seed_value);
        let inputs: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect()).collect();
        let codec = FixedPointCodec::new(16, 100.0).unwrap();
        let out = secure_sum(&inputs, &codec, &root_secret(seed_value), 1).unwrap();
        for j in 0..dim {
            let plain: f64 = inputs.iter().map(|v| v[j]).sum();
            prop_assert!((out.sum[j] - plain).abs() <= k as f64 * 2f64.powi(-16));
        }
    }
}
