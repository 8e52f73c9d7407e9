//! Secure aggregation × differential privacy: the four combinations measured
//! side by side on one dataset.

use std::path::{Path, PathBuf};

use super::critical::Critical;
use super::sweep::{sweep_training, sweep_tstat};
use super::{log_grid, SweepConfig, EPS_MAX, EPS_MIN};
use crate::data::Dataset;
use crate::error::Result;
use crate::fedlearn::TrainConfig;
use crate::fedstats::Scenario;
use crate::stats::{mean, sample_var};

#[derive(Debug, Clone, PartialEq)]
pub struct PetConfig {
    pub k: usize,
    /// ε of the measured accuracy and t in the DP quadrants.
    pub eps: f64,
    pub train_trials: usize,
    pub stats_trials: usize,
    /// Grid for the critical-ε columns.
    pub grid: Vec<f64>,
    pub master_seed: u64,
    pub train: TrainConfig,
}

impl Default for PetConfig {
    fn default() -> Self {
        Self {
            k: 16,
            eps: 1.0,
            train_trials: 50,
            stats_trials: 2000,
            grid: log_grid(EPS_MIN, EPS_MAX, 9).expect("static grid"),
            master_seed: 0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PetRow {
    pub secure: bool,
    pub dp: bool,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
    /// Median disclosed t (exact without DP).
    pub t: f64,
    pub critical_train: Critical,
    pub critical_tstat: Critical,
}

impl PetRow {
    pub fn label(&self) -> &'static str {
        match (self.secure, self.dp) {
            (false, false) => "plaintext aggregation",
            (true, false) => "secure aggregation",
            (false, true) => "local DP, plaintext aggregation",
            (true, true) => "secure aggregation + central DP",
        }
    }
}

fn sweep_cfg(ds: &Dataset, cfg: &PetConfig, scenarios: Vec<Scenario>, grid: Vec<f64>, trials: usize) -> SweepConfig {
    SweepConfig {
        eps_grid: grid,
        ks: vec![cfg.k],
        trials,
        scenarios,
        master_seed: cfg.master_seed,
        train: cfg.train.clone(),
        ..SweepConfig::training(&ds.schema.name)
    }
}

/// Measures the four quadrants. Rows: plaintext, secure, local DP, secure + DP.
pub fn pet_grid(ds: &Dataset, cfg: &PetConfig) -> Result<Vec<PetRow>> {
    let dp_scen = vec![Scenario::Local, Scenario::Secure];

    // accuracy and t at the chosen ε
    let at_eps = sweep_cfg(ds, cfg, dp_scen.clone(), vec![cfg.eps], cfg.train_trials);
    let train_eps = sweep_training(&at_eps, ds)?;
    let stats_eps = sweep_tstat(&SweepConfig { trials: cfg.stats_trials, ..at_eps.clone() }, ds)?;

    // critical ε over the grid
    let grid = sweep_cfg(ds, cfg, dp_scen, cfg.grid.clone(), cfg.train_trials);
    let train_grid = sweep_training(&grid, ds)?;
    let stats_grid = sweep_tstat(&SweepConfig { trials: cfg.stats_trials, ..grid.clone() }, ds)?;

    // secure aggregation without DP: no noise, clipping as in the baseline
    let mut plain_train = cfg.train.clone();
    if !plain_train.baseline_clip {
        plain_train.clip_norm = f64::INFINITY;
    }
    let secure_plain = sweep_training(
        &SweepConfig {
            train: plain_train,
            ..sweep_cfg(ds, cfg, vec![Scenario::Secure], vec![f64::INFINITY], cfg.train_trials)
        },
        ds,
    )?;
    let secure_plain_t = sweep_tstat(
        &sweep_cfg(ds, cfg, vec![Scenario::Secure], vec![f64::INFINITY], 50),
        ds,
    )?;

    let summarize = |a: &[f64]| (mean(a), sample_var(a).sqrt());
    let mut rows = Vec::with_capacity(4);
    let (bm, bs) = summarize(&train_eps.baseline);
    rows.push(PetRow {
        secure: false,
        dp: false,
        accuracy_mean: bm,
        accuracy_sd: bs,
        t: stats_eps.truth.t,
        critical_train: Critical::NotApplicable,
        critical_tstat: Critical::NotApplicable,
    });
    let sp = &secure_plain.cells[0];
    let (sm, ss) = summarize(&sp.accuracies);
    rows.push(PetRow {
        secure: true,
        dp: false,
        accuracy_mean: sm,
        accuracy_sd: ss,
        t: secure_plain_t.cells[0].t.median,
        critical_train: Critical::NotApplicable,
        critical_tstat: Critical::NotApplicable,
    });
    for s in [Scenario::Local, Scenario::Secure] {
        let tc = train_eps.cells_for(s, cfg.k)[0];
        let sc = stats_eps.cells_for(s, cfg.k)[0];
        let (m, sd) = summarize(&tc.accuracies);
        rows.push(PetRow {
            secure: s == Scenario::Secure,
            dp: true,
            accuracy_mean: m,
            accuracy_sd: sd,
            t: sc.t.median,
            critical_train: train_grid.critical(s, cfg.k),
            critical_tstat: stats_grid.critical(s, cfg.k),
        });
    }
    Ok(rows)
}

/// Writes `petgrid_<dataset>.csv` into `dir`.
pub fn write_pet_grid(rows: &[PetRow], ds: &Dataset, cfg: &PetConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("petgrid_{}.csv", ds.schema.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "quadrant",
        "secure_aggregation",
        "differential_privacy",
        "k",
        "eps",
        "accuracy_mean",
        "accuracy_sd",
        "t_disclosed",
        "critical_eps_train",
        "critical_eps_tstat",
    ])?;
    for r in rows {
        w.write_record([
            r.label().to_string(),
            if r.secure { "yes" } else { "no" }.into(),
            if r.dp { "yes" } else { "no" }.into(),
            cfg.k.to_string(),
            if r.dp { cfg.eps.to_string() } else { "inf".into() },
            r.accuracy_mean.to_string(),
            r.accuracy_sd.to_string(),
            r.t.to_string(),
            r.critical_train.to_string(),
            r.critical_tstat.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}
