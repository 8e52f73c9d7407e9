//! CSV outputs, summary tables, metadata sidecars and figures.
//!
//! Sweeps write long-form per-cell files; `emit_tables` and `emit_figures`
//! only read those files back, so tables can be rebuilt without rerunning.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::critical::{critical_eps_training, critical_eps_tstat, welch_p, Critical, TStatPoint, TrainPoint};
use super::svg::{Chart, Dash, Element, PALETTE};
use super::sweep::{StatsSweep, TrainSweep};
use super::ALPHA;
use crate::data::DATASETS;
use crate::error::{Error, Result};
use crate::fedstats::Scenario;
use crate::stats::{mean, quantile_sorted, sample_var, sorted};

pub const STATS_TABLE: &str = "dp_stats.csv";
pub const TRAIN_TABLE: &str = "dp_train.csv";

/// Writes `key = value` lines.
pub fn write_meta(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn status_str(ok: bool, msg: &str) -> String {
    if ok {
        "ok".into()
    } else {
        format!("failed: {msg}")
    }
}

/// Critical value as written in CSV files.
pub fn format_critical(c: &Critical) -> String {
    c.to_string()
}

fn meta_common(source: &str, synthetic: bool, delta: f64) -> Vec<(String, String)> {
    vec![
        ("source".into(), source.into()),
        ("synthetic".into(), synthetic.to_string()),
        ("delta".into(), delta.to_string()),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
    ]
}

const STATS_HEADER: &[&str] = &[
    "dataset",
    "column",
    "scenario",
    "k",
    "eps",
    "status",
    "truth_t",
    "t_crit",
    "t_lo",
    "t_median",
    "t_hi",
    "mean_a_truth",
    "mean_a_lo",
    "mean_a_median",
    "mean_a_hi",
    "var_a_truth",
    "var_a_lo",
    "var_a_median",
    "var_a_hi",
    "variance_omitted",
    "floored",
];

/// Writes `stats_<dataset>.csv`, its `.meta` sidecar and
/// `critical_stats_<dataset>.csv` into `dir`. Returns the written paths.
pub fn write_stats(sweep: &StatsSweep, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let d = &sweep.dataset;
    let cells_path = dir.join(format!("stats_{d}.csv"));
    let mut w = csv::Writer::from_path(&cells_path)?;
    w.write_record(STATS_HEADER)?;
    let tr = &sweep.truth;
    for c in &sweep.cells {
        let msg = match &c.status {
            super::CellStatus::Failed(m) => m.as_str(),
            super::CellStatus::Ok => "",
        };
        w.write_record([
            d.clone(),
            sweep.column.clone(),
            c.scenario.to_string(),
            c.k.to_string(),
            c.eps.to_string(),
            status_str(c.status.is_ok(), msg),
            tr.t.to_string(),
            sweep.t_crit.to_string(),
            c.t.lo.to_string(),
            c.t.median.to_string(),
            c.t.hi.to_string(),
            tr.mean_a.to_string(),
            c.mean_a.lo.to_string(),
            c.mean_a.median.to_string(),
            c.mean_a.hi.to_string(),
            tr.var_a.to_string(),
            c.var_a.lo.to_string(),
            c.var_a.median.to_string(),
            c.var_a.hi.to_string(),
            c.events.variance_omitted.to_string(),
            c.events.floored.to_string(),
        ])?;
    }
    w.flush()?;

    let crit_path = dir.join(format!("critical_stats_{d}.csv"));
    let mut w = csv::Writer::from_path(&crit_path)?;
    w.write_record(["dataset", "scenario", "k", "critical_eps"])?;
    for (s, k) in sweep.config.groups() {
        w.write_record([d.clone(), s.to_string(), k.to_string(), sweep.critical(s, k).to_string()])?;
    }
    w.flush()?;

    let meta_path = dir.join(format!("stats_{d}.meta"));
    let mut meta = sweep.config.metadata();
    meta.push(("column".into(), sweep.column.clone()));
    meta.extend(meta_common(&sweep.source, sweep.synthetic, sweep.delta));
    meta.push(("plaintext_t".into(), sweep.truth.t.to_string()));
    meta.push(("plaintext_df".into(), sweep.truth.df.to_string()));
    meta.push(("t_crit".into(), sweep.t_crit.to_string()));
    write_meta(&meta_path, &meta)?;
    Ok(vec![cells_path, crit_path, meta_path])
}

/// Writes `train_<dataset>.csv` (one row per trial), `train_cells_<dataset>.csv`
/// (per-cell summary), `critical_train_<dataset>.csv` and the `.meta` sidecar.
pub fn write_training(sweep: &TrainSweep, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let d = &sweep.dataset;
    let long_path = dir.join(format!("train_{d}.csv"));
    let mut w = csv::Writer::from_path(&long_path)?;
    w.write_record(["dataset", "scenario", "k", "eps", "trial", "accuracy", "status"])?;
    for (i, a) in sweep.baseline.iter().enumerate() {
        w.write_record([d.as_str(), "baseline", "1", "inf", &i.to_string(), &a.to_string(), "ok"])?;
    }
    for c in &sweep.cells {
        match &c.status {
            super::CellStatus::Ok => {
                for (i, a) in c.accuracies.iter().enumerate() {
                    w.write_record([
                        d.clone(),
                        c.scenario.to_string(),
                        c.k.to_string(),
                        c.eps.to_string(),
                        i.to_string(),
                        a.to_string(),
                        "ok".into(),
                    ])?;
                }
            }
            super::CellStatus::Failed(m) => {
                w.write_record([
                    d.clone(),
                    c.scenario.to_string(),
                    c.k.to_string(),
                    c.eps.to_string(),
                    String::new(),
                    String::new(),
                    status_str(false, m),
                ])?;
            }
        }
    }
    w.flush()?;

    let cells_path = dir.join(format!("train_cells_{d}.csv"));
    let mut w = csv::Writer::from_path(&cells_path)?;
    w.write_record([
        "dataset",
        "scenario",
        "k",
        "eps",
        "status",
        "trials",
        "accuracy_mean",
        "accuracy_sd",
        "baseline_mean",
        "p_value",
        "achieved_eps",
        "sigma",
    ])?;
    let base_mean = mean(&sweep.baseline);
    for c in &sweep.cells {
        let ok = c.status.is_ok() && c.accuracies.len() >= 2;
        let (m, sd, p) = if ok {
            (
                mean(&c.accuracies),
                sample_var(&c.accuracies).sqrt(),
                welch_p(&c.accuracies, &sweep.baseline),
            )
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        let msg = match &c.status {
            super::CellStatus::Failed(m) => m.as_str(),
            super::CellStatus::Ok => "",
        };
        w.write_record([
            d.clone(),
            c.scenario.to_string(),
            c.k.to_string(),
            c.eps.to_string(),
            status_str(c.status.is_ok(), msg),
            c.accuracies.len().to_string(),
            m.to_string(),
            sd.to_string(),
            base_mean.to_string(),
            p.to_string(),
            c.achieved_eps.to_string(),
            c.sigma.to_string(),
        ])?;
    }
    w.flush()?;

    let crit_path = dir.join(format!("critical_train_{d}.csv"));
    let mut w = csv::Writer::from_path(&crit_path)?;
    w.write_record(["dataset", "scenario", "k", "critical_eps"])?;
    for (s, k) in sweep.config.groups() {
        w.write_record([d.clone(), s.to_string(), k.to_string(), sweep.critical(s, k).to_string()])?;
    }
    w.flush()?;

    let meta_path = dir.join(format!("train_{d}.meta"));
    let mut meta = sweep.config.metadata();
    meta.extend(meta_common(&sweep.source, sweep.synthetic, sweep.delta));
    write_meta(&meta_path, &meta)?;
    Ok(vec![long_path, cells_path, crit_path, meta_path])
}

/// One row of a `stats_<dataset>.csv` file.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub scenario: Scenario,
    pub k: usize,
    pub eps: f64,
    pub ok: bool,
    pub t: (f64, f64, f64),
    pub mean_a: (f64, f64, f64),
    pub var_a: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsFile {
    pub dataset: String,
    pub column: String,
    pub truth_t: f64,
    pub t_crit: f64,
    pub mean_a_truth: f64,
    pub var_a_truth: f64,
    pub rows: Vec<StatsRow>,
}

impl StatsFile {
    pub fn groups(&self) -> BTreeSet<(Scenario, usize)> {
        self.rows.iter().map(|r| (r.scenario, r.k)).collect()
    }

    pub fn series(&self, scenario: Scenario, k: usize) -> Vec<&StatsRow> {
        let mut v: Vec<&StatsRow> = self.rows.iter().filter(|r| r.scenario == scenario && r.k == k).collect();
        v.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        v
    }

    pub fn critical(&self, scenario: Scenario, k: usize) -> Critical {
        let pts: Vec<TStatPoint> = self
            .series(scenario, k)
            .into_iter()
            .map(|r| TStatPoint {
                eps: r.eps,
                band: r.ok.then_some((r.t.0, r.t.2)),
            })
            .collect();
        critical_eps_tstat(&pts, self.truth_t, self.t_crit)
    }
}

fn parse_f64(s: &str, path: &Path, line: u64) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("bad number `{s}`"),
    })
}

fn field<'a>(rec: &'a csv::StringRecord, idx: &BTreeMap<String, usize>, name: &str, path: &Path) -> Result<&'a str> {
    idx.get(name)
        .and_then(|&i| rec.get(i))
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: rec.position().map_or(0, |p| p.line()),
            msg: format!("missing column `{name}`"),
        })
}

fn header_index(r: &mut csv::Reader<fs::File>) -> Result<BTreeMap<String, usize>> {
    Ok(r.headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect())
}

pub fn read_stats_csv(path: &Path) -> Result<StatsFile> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = header_index(&mut r)?;
    let mut out = StatsFile {
        dataset: String::new(),
        column: String::new(),
        truth_t: f64::NAN,
        t_crit: f64::NAN,
        mean_a_truth: f64::NAN,
        var_a_truth: f64::NAN,
        rows: vec![],
    };
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |name: &str| field(&rec, &idx, name, path);
        let num = |name: &str| parse_f64(f(name)?, path, line);
        let triple = |p: &str| -> Result<(f64, f64, f64)> {
            Ok((num(&format!("{p}_lo"))?, num(&format!("{p}_median"))?, num(&format!("{p}_hi"))?))
        };
        out.dataset = f("dataset")?.to_string();
        out.column = f("column")?.to_string();
        out.truth_t = num("truth_t")?;
        out.t_crit = num("t_crit")?;
        out.mean_a_truth = num("mean_a_truth")?;
        out.var_a_truth = num("var_a_truth")?;
        out.rows.push(StatsRow {
            scenario: f("scenario")?.parse()?,
            k: num("k")? as usize,
            eps: num("eps")?,
            ok: f("status")? == "ok",
            t: triple("t")?,
            mean_a: triple("mean_a")?,
            var_a: triple("var_a")?,
        });
    }
    Ok(out)
}

/// `(ε, accuracies)`, accuracies `None` for a failed cell.
pub type TrainCellRow = (f64, Option<Vec<f64>>);

#[derive(Debug, Clone, PartialEq)]
pub struct TrainFile {
    pub dataset: String,
    pub baseline: Vec<f64>,
    /// Keyed by `(scenario, k, ε bits)`.
    pub cells: BTreeMap<(Scenario, usize, u64), TrainCellRow>,
}

impl TrainFile {
    pub fn groups(&self) -> BTreeSet<(Scenario, usize)> {
        self.cells.keys().map(|(s, k, _)| (*s, *k)).collect()
    }

    /// `(eps, accuracies)` sorted by ε.
    pub fn series(&self, scenario: Scenario, k: usize) -> Vec<(f64, Option<&[f64]>)> {
        let mut v: Vec<(f64, Option<&[f64]>)> = self
            .cells
            .iter()
            .filter(|((s, kk, _), _)| *s == scenario && *kk == k)
            .map(|(_, (e, a))| (*e, a.as_deref()))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    pub fn critical(&self, scenario: Scenario, k: usize) -> Critical {
        let pts: Vec<TrainPoint> = self
            .series(scenario, k)
            .into_iter()
            .map(|(eps, accuracies)| TrainPoint { eps, accuracies })
            .collect();
        critical_eps_training(&pts, &self.baseline, ALPHA)
    }
}

pub fn read_train_csv(path: &Path) -> Result<TrainFile> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = header_index(&mut r)?;
    let mut out = TrainFile {
        dataset: String::new(),
        baseline: vec![],
        cells: BTreeMap::new(),
    };
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |name: &str| field(&rec, &idx, name, path);
        out.dataset = f("dataset")?.to_string();
        let scen = f("scenario")?;
        let ok = f("status")? == "ok";
        if scen == "baseline" {
            out.baseline.push(parse_f64(f("accuracy")?, path, line)?);
            continue;
        }
        let scenario: Scenario = scen.parse()?;
        let k = parse_f64(f("k")?, path, line)? as usize;
        let eps = parse_f64(f("eps")?, path, line)?;
        let entry = out
            .cells
            .entry((scenario, k, eps.to_bits()))
            .or_insert_with(|| (eps, Some(vec![])));
        if !ok {
            entry.1 = None;
        } else if let Some(v) = entry.1.as_mut() {
            v.push(parse_f64(f("accuracy")?, path, line)?);
        }
    }
    Ok(out)
}

fn files_with_prefix(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(prefix))
        })
        .collect();
    v.sort();
    Ok(v)
}

fn dataset_order(names: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut v: Vec<String> = names.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    v.sort_by_key(|n| (DATASETS.iter().position(|d| d == n).unwrap_or(usize::MAX), n.clone()));
    v
}

/// Rows `baseline, K=…` by columns `datasets`. Baseline is the central
/// value, else the secure value at the smallest K; K rows are the local
/// scenario.
fn wide_table(
    path: &Path,
    datasets: &[String],
    per_dataset: &BTreeMap<String, BTreeMap<(Scenario, usize), Critical>>,
) -> Result<()> {
    let mut ks: BTreeSet<usize> = BTreeSet::new();
    for m in per_dataset.values() {
        ks.extend(m.keys().filter(|(s, k)| *s == Scenario::Local && *k > 1).map(|(_, k)| *k));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["setting".to_string()];
    header.extend(datasets.iter().cloned());
    w.write_record(&header)?;
    if datasets.is_empty() {
        w.flush()?;
        return Ok(());
    }
    let cell = |d: &String, key: Option<(Scenario, usize)>| -> String {
        key.and_then(|k| per_dataset.get(d).and_then(|m| m.get(&k)))
            .map_or_else(|| "n/a".to_string(), Critical::to_string)
    };
    let mut row = vec!["baseline".to_string()];
    for d in datasets {
        let m = &per_dataset[d];
        let key = if m.contains_key(&(Scenario::Central, 1)) {
            Some((Scenario::Central, 1))
        } else {
            m.keys().find(|(s, _)| *s == Scenario::Secure).copied()
        };
        row.push(cell(d, key));
    }
    w.write_record(&row)?;
    for k in ks {
        let mut row = vec![format!("K={k}")];
        for d in datasets {
            row.push(cell(d, Some((Scenario::Local, k))));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn table_meta(in_dir: &Path, kind: &str, datasets: &[String]) -> Result<Vec<(String, String)>> {
    let mut meta = vec![
        ("table".to_string(), format!("critical epsilon ({kind})")),
        (
            "rows".into(),
            "baseline = central scenario (secure scenario if central absent); K=n = local-DP scenario with n nodes".into(),
        ),
        ("cells".into(), "2 significant digits; >x = no grid point qualifies; n/a = missing or not applicable".into()),
    ];
    for d in datasets {
        let p = in_dir.join(format!("{kind}_{d}.meta"));
        if p.exists() {
            for (k, v) in read_meta(&p)? {
                meta.push((format!("{d}.{k}"), v));
            }
        }
    }
    Ok(meta)
}

/// Builds `dp_stats.csv` and `dp_train.csv` (with `.meta` sidecars) in
/// `out_dir` from the sweep files in `in_dir`.
pub fn emit_tables(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut stats = BTreeMap::new();
    for p in files_with_prefix(in_dir, "stats_")? {
        let f = read_stats_csv(&p)?;
        let m: BTreeMap<_, _> = f.groups().into_iter().map(|(s, k)| ((s, k), f.critical(s, k))).collect();
        stats.insert(f.dataset.clone(), m);
    }
    let names = dataset_order(stats.keys().cloned());
    let path = out_dir.join(STATS_TABLE);
    wide_table(&path, &names, &stats)?;
    write_meta(&out_dir.join(format!("{STATS_TABLE}.meta")), &table_meta(in_dir, "stats", &names)?)?;
    written.push(path);

    let mut train = BTreeMap::new();
    for p in files_with_prefix(in_dir, "train_")?
        .into_iter()
        .filter(|p| !p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("train_cells_")))
    {
        let f = read_train_csv(&p)?;
        let m: BTreeMap<_, _> = f.groups().into_iter().map(|(s, k)| ((s, k), f.critical(s, k))).collect();
        train.insert(f.dataset.clone(), m);
    }
    let names = dataset_order(train.keys().cloned());
    let path = out_dir.join(TRAIN_TABLE);
    wide_table(&path, &names, &train)?;
    write_meta(&out_dir.join(format!("{TRAIN_TABLE}.meta")), &table_meta(in_dir, "train", &names)?)?;
    written.push(path);
    Ok(written)
}

fn color(i: usize) -> String {
    PALETTE[i % PALETTE.len()].to_string()
}

fn group_label(s: Scenario, k: usize) -> String {
    match s {
        Scenario::Central => "central".into(),
        _ => format!("{s} K={k}"),
    }
}

fn tstat_chart(f: &StatsFile, scenario: Scenario) -> Chart {
    let mut c = Chart::new(
        &format!("{}: disclosed t of {} ({scenario})", f.dataset, f.column),
        "epsilon",
        "t statistic",
    );
    let y = (3.0 * f.truth_t.abs()).max(3.0 * f.t_crit);
    c.y_range = Some((-y, y));
    for (i, (s, k)) in f.groups().into_iter().filter(|(s, _)| *s == scenario).enumerate() {
        let rows = f.series(s, k);
        let ok: Vec<&&StatsRow> = rows.iter().filter(|r| r.ok).collect();
        c.elements.push(Element::Band {
            xs: ok.iter().map(|r| r.eps).collect(),
            lo: ok.iter().map(|r| r.t.0).collect(),
            hi: ok.iter().map(|r| r.t.2).collect(),
            color: color(i),
            label: format!("{} 95% band", group_label(s, k)),
        });
        c.elements.push(Element::Line {
            xs: ok.iter().map(|r| r.eps).collect(),
            ys: ok.iter().map(|r| r.t.1).collect(),
            color: color(i),
            dash: Dash::Dashed,
            label: String::new(),
        });
    }
    c.elements.push(Element::HLine {
        y: f.truth_t,
        color: "black".into(),
        dash: Dash::Solid,
        label: "plaintext t".into(),
    });
    let sign = if f.truth_t < 0.0 { -1.0 } else { 1.0 };
    c.elements.push(Element::HLine {
        y: sign * f.t_crit,
        color: "#444444".into(),
        dash: Dash::DashDot,
        label: "critical t".into(),
    });
    c
}

fn moment_chart(f: &StatsFile, which: &str) -> Chart {
    let (title, truth) = if which == "mean" {
        ("disclosed mean", f.mean_a_truth)
    } else {
        ("disclosed variance", f.var_a_truth)
    };
    let mut c = Chart::new(
        &format!("{}: {title} of {} (central, class 0)", f.dataset, f.column),
        "epsilon",
        which,
    );
    let rows: Vec<&StatsRow> = f.series(Scenario::Central, 1).into_iter().filter(|r| r.ok).collect();
    let pick = |r: &StatsRow| if which == "mean" { r.mean_a } else { r.var_a };
    let spread = rows
        .iter()
        .map(|r| (pick(r).1 - truth).abs())
        .fold(truth.abs() * 0.5, f64::max);
    c.y_range = Some(if which == "mean" {
        (truth - 4.0 * spread, truth + 4.0 * spread)
    } else {
        (0.0, truth + 4.0 * spread)
    });
    c.elements.push(Element::Band {
        xs: rows.iter().map(|r| r.eps).collect(),
        lo: rows.iter().map(|r| pick(r).0).collect(),
        hi: rows.iter().map(|r| pick(r).2).collect(),
        color: color(0),
        label: "95% band".into(),
    });
    c.elements.push(Element::HLine {
        y: truth,
        color: "black".into(),
        dash: Dash::Solid,
        label: "plaintext".into(),
    });
    c
}

fn accuracy_chart(f: &TrainFile) -> Chart {
    let mut c = Chart::new(&format!("{}: test accuracy", f.dataset), "epsilon", "accuracy");
    c.y_range = Some((0.3, 1.0));
    for (i, (s, k)) in f.groups().into_iter().enumerate() {
        let pts: Vec<(f64, &[f64])> = f
            .series(s, k)
            .into_iter()
            .filter_map(|(e, a)| a.filter(|a| !a.is_empty()).map(|a| (e, a)))
            .collect();
        if s == Scenario::Central {
            let q = |a: &[f64], p: f64| quantile_sorted(&sorted(a), p);
            c.elements.push(Element::Band {
                xs: pts.iter().map(|p| p.0).collect(),
                lo: pts.iter().map(|p| q(p.1, 0.025)).collect(),
                hi: pts.iter().map(|p| q(p.1, 0.975)).collect(),
                color: color(i),
                label: "central 95% band".into(),
            });
        }
        c.elements.push(Element::Line {
            xs: pts.iter().map(|p| p.0).collect(),
            ys: pts.iter().map(|p| mean(p.1)).collect(),
            color: color(i),
            dash: if s == Scenario::Local { Dash::Dashed } else { Dash::Solid },
            label: group_label(s, k),
        });
    }
    if !f.baseline.is_empty() {
        c.elements.push(Element::HLine {
            y: mean(&f.baseline),
            color: "black".into(),
            dash: Dash::DashDot,
            label: "non-private".into(),
        });
    }
    c
}

/// Writes SVG band plots for every sweep file in `in_dir` into `out_dir`.
pub fn emit_figures(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, chart: Chart| -> Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, chart.render())?;
        written.push(p);
        Ok(())
    };
    for p in files_with_prefix(in_dir, "stats_")? {
        let f = read_stats_csv(&p)?;
        let scenarios: BTreeSet<Scenario> = f.groups().into_iter().map(|(s, _)| s).collect();
        for s in &scenarios {
            put(format!("tstat_{}_{s}.svg", f.dataset), tstat_chart(&f, *s))?;
        }
        if scenarios.contains(&Scenario::Central) {
            put(format!("mean_{}.svg", f.dataset), moment_chart(&f, "mean"))?;
            put(format!("variance_{}.svg", f.dataset), moment_chart(&f, "variance"))?;
        }
    }
    for p in files_with_prefix(in_dir, "train_")? {
        if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("train_cells_")) {
            continue;
        }
        let f = read_train_csv(&p)?;
        put(format!("accuracy_{}.svg", f.dataset), accuracy_chart(&f))?;
    }
    Ok(written)
}
