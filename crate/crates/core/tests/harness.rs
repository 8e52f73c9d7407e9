use rand_distr::{Distribution, StandardNormal};

use fedsandbox::data::Dataset;
use fedsandbox::fedstats::Scenario;
use fedsandbox::harness::{
    emit_figures, emit_tables, read_meta, read_stats_csv, sweep_tstat, write_stats, Band, SweepConfig,
};
use fedsandbox::par;
use fedsandbox::seed;
use fedsandbox::stats::{spearman, t_critical};

fn small_cfg() -> SweepConfig {
    let mut cfg = SweepConfig::stats("heart").desk();
    cfg.trials = 200;
    cfg.ks = vec![4, 16];
    cfg
}

#[test]
fn output_is_independent_of_worker_count() {
    let ds = Dataset::load("heart", None).unwrap();
    let cfg = small_cfg();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (w, d) in [1, 8].iter().zip(&dirs) {
        let s = par::with_workers(*w, || sweep_tstat(&cfg, &ds)).unwrap();
        write_stats(&s, d.path()).unwrap();
    }
    for f in ["stats_heart.csv", "critical_stats_heart.csv", "stats_heart.meta"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn tables_repeat_the_sweep_criticals() {
    let ds = Dataset::load("heart", None).unwrap();
    let cfg = small_cfg();
    let sweep = sweep_tstat(&cfg, &ds).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_stats(&sweep, dir.path()).unwrap();
    emit_tables(dir.path(), dir.path()).unwrap();

    let mut rdr = csv::Reader::from_path(dir.path().join("dp_stats.csv")).unwrap();
    let head = rdr.headers().unwrap().clone();
    let col = head.iter().position(|h| h == "heart").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let cell = |label: &str| rows.iter().find(|r| &r[0] == label).map(|r| r[col].to_string()).unwrap();
    assert_eq!(cell("baseline"), sweep.critical(Scenario::Central, 1).to_string());
    assert_eq!(cell("K=4"), sweep.critical(Scenario::Local, 4).to_string());
    assert_eq!(cell("K=16"), sweep.critical(Scenario::Local, 16).to_string());

    // the CSV round trip reproduces the in-memory criticals
    let file = read_stats_csv(&dir.path().join("stats_heart.csv")).unwrap();
    for (s, k) in cfg.groups() {
        assert_eq!(file.critical(s, k), sweep.critical(s, k), "{s} K={k}");
    }
    let meta = read_meta(&dir.path().join("dp_stats.csv.meta")).unwrap();
    assert!(meta.iter().any(|(k, _)| k.contains("critical_eps_tstat_rule")));

    let svgs = emit_figures(dir.path(), dir.path()).unwrap();
    assert!(!svgs.is_empty());
    let central = std::fs::read_to_string(dir.path().join("tstat_heart_central.svg")).unwrap();
    assert!(central.starts_with("<svg") && central.contains("stroke-dasharray=\"8,3,2,3\""));
}

#[test]
fn empty_input_gives_header_only_tables() {
    let dir = tempfile::tempdir().unwrap();
    emit_tables(dir.path(), dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("dp_stats.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn band_covers_analytic_quantiles() {
    // edges averaged over 20 replicates of 10^4 draws; one replicate alone
    // has a standard error of about 1.4% on each edge
    let z = 1.959_963_984_540_054 * 3.0;
    let (mut lo, mut hi) = (0.0, 0.0);
    for r in 0..20 {
        let mut rng = seed::rng(seed::derive(51, &[r]));
        let xs: Vec<f64> = (0..10_000)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                3.0 * g
            })
            .collect();
        let b = Band::from_samples(&xs);
        lo += b.lo / 20.0;
        hi += b.hi / 20.0;
    }
    assert!((hi - z).abs() < 0.02 * z && (lo + z).abs() < 0.02 * z, "{lo} {hi}");
}

#[test]
fn band_narrows_with_epsilon() {
    let ds = Dataset::load("heart", None).unwrap();
    let mut cfg = small_cfg();
    cfg.scenarios = vec![Scenario::Central, Scenario::Secure, Scenario::Local];
    cfg.ks = vec![64];
    let s = sweep_tstat(&cfg, &ds).unwrap();
    for (sc, k) in cfg.groups() {
        let cells = s.cells_for(sc, k);
        let eps: Vec<f64> = cells.iter().map(|c| c.eps).collect();
        let widths: Vec<f64> = cells.iter().map(|c| c.t.width()).collect();
        if sc == Scenario::Local {
            // clamping bounds the small-ε band, so only the end points are ordered
            assert!(widths[widths.len() - 1] < widths[0], "{sc} K={k}: {widths:?}");
        } else {
            assert!(spearman(&eps, &widths) < -0.5, "{sc} K={k}: {widths:?}");
        }
    }
}

#[test]
fn welch_critical_value_from_tables() {
    assert!((t_critical(0.05, 30.0) - 2.042).abs() < 5e-4);
    assert!((t_critical(0.05, 10.0) - 2.228).abs() < 5e-4);
}

#[test]
fn training_recovers_baseline_without_privacy() {
    let ds = Dataset::load("heart", None).unwrap();
    let mut cfg = SweepConfig::training("heart");
    cfg.eps_grid = vec![1e6];
    cfg.ks = vec![4];
    let s = fedsandbox::harness::sweep_training(&cfg, &ds).unwrap();
    for c in &s.cells {
        let p = fedsandbox::harness::welch_p(&c.accuracies, &s.baseline);
        assert!(p > 0.05, "{} K={}: p = {p}", c.scenario, c.k);
    }
}
