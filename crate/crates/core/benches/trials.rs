use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use fedsandbox::data::{shard, Dataset};
use fedsandbox::fedstats::{shard_partials, Budget, LocalRelease, StatsTask};
use fedsandbox::par;
use fedsandbox::secagg::{root_secret, secure_sum, FixedPointCodec, DEFAULT_FRAC_BITS};
use fedsandbox::seed;

fn local_release() -> LocalRelease {
    let ds = Dataset::load("heart", None).expect("bundled heart data");
    let col = ds.table.column_index(&ds.selected).unwrap();
    let task = StatsTask::for_column(&ds.table, col).unwrap();
    let shards = shard(&ds.table, 16, 1).unwrap();
    let parts = shard_partials(&shards, col).unwrap();
    LocalRelease::new(&parts, &task, Budget::new(1.0, 1e-5).unwrap()).unwrap()
}

fn tstat_trials(c: &mut Criterion) {
    let release = local_release();
    let trial = |i: usize| {
        let mut rng = seed::rng(seed::derive(7, &[i as u64]));
        release.draw(&mut rng).map(|(r, _)| r.t).unwrap_or(f64::NAN)
    };
    let mut g = c.benchmark_group("tstat_trials");
    for n in [1_000usize, 10_000] {
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| black_box(par::map_indexed(n, trial)))
        });
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(par::map_indexed_seq(n, trial)))
        });
    }
    g.finish();
}

fn secure_rounds(c: &mut Criterion) {
    let codec = FixedPointCodec::new(DEFAULT_FRAC_BITS, 1e6).unwrap();
    let root = root_secret(3);
    let inputs: Vec<Vec<f64>> = (0..64)
        .map(|i| (0..128).map(|j| (i * 128 + j) as f64 * 1e-3).collect())
        .collect();
    let round = |r: usize| secure_sum(&inputs, &codec, &root, r as u64).unwrap().sum[0];
    let mut g = c.benchmark_group("secure_rounds_k64");
    g.sample_size(20);
    g.bench_function("parallel", |b| b.iter(|| black_box(par::map_indexed(32, round))));
    g.bench_function("sequential", |b| b.iter(|| black_box(par::map_indexed_seq(32, round))));
    g.finish();
}

criterion_group!(benches, tstat_trials, secure_rounds);
criterion_main!(benches);
