//! Experiment orchestration: ε sweeps over repeated trials, percentile
//! bands, critical-ε estimation, CSV tables, SVG figures and the PET grid.
//!
//! All randomness flows from the master seed through [`seed::derive`] with
//! the cell and trial index in the path, so results do not depend on the
//! order or the number of workers that run them.

mod critical;
mod petgrid;
mod report;
mod sweep;
pub mod svg;

use std::fmt;

pub use critical::{critical_eps_training, critical_eps_tstat, sig2, welch_p, Critical, TStatPoint, TrainPoint};
pub use petgrid::{pet_grid, write_pet_grid, PetConfig, PetRow};
pub use report::{
    emit_figures, emit_tables, format_critical, read_meta, read_stats_csv, read_train_csv, StatsFile, StatsRow, TrainFile,
    write_meta, write_stats, write_training, STATS_TABLE, TRAIN_TABLE,
};
pub use sweep::{sweep_training, sweep_tstat, Band, CellStatus, StatsCell, StatsSweep, TrainCell, TrainSweep};

use crate::error::{Error, Result};
use crate::fedlearn::TrainConfig;
use crate::fedstats::{LogVarBound, Scenario, TStatVariant, V_FLOOR_FRACTION};
use crate::seed;

/// Two-sided significance level of every test in the harness.
pub const ALPHA: f64 = 0.05;
/// Lower end of the default grid.
pub const EPS_MIN: f64 = 0.01;
/// Upper end of the default grid; also the "> max" sentinel.
pub const EPS_MAX: f64 = 100.0;
/// Default `T` of the direct Laplace t-stat variant.
pub const DEFAULT_T_RANGE: f64 = 20.0;

/// Federation sizes of the full-scale sweeps.
pub const FULL_KS: &[usize] = &[1, 2, 4, 8, 16, 32, 64];
/// Federation sizes of the desk-scale presets.
pub const DESK_KS: &[usize] = &[1, 4, 16, 64];

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::Config(format!("bad grid {lo}:{hi}:{n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// Parses `lo:hi:n`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("expected lo:hi:n, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    log_grid(lo, hi, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub dataset: String,
    pub eps_grid: Vec<f64>,
    pub ks: Vec<usize>,
    pub trials: usize,
    pub scenarios: Vec<Scenario>,
    pub master_seed: u64,
    /// Overrides the dataset's δ.
    pub delta: Option<f64>,
    pub variant: TStatVariant,
    pub v_floor_fraction: f64,
    pub log_bound: LogVarBound,
    /// Post-process releases into their feasible ranges.
    pub clamp: bool,
    /// Template for training cells; ε, scenario and K are set per cell.
    pub train: TrainConfig,
}

impl SweepConfig {
    /// Full-scale t-stat sweep: 25 grid points, 10000 trials.
    pub fn stats(dataset: &str) -> Self {
        Self {
            dataset: dataset.into(),
            eps_grid: log_grid(EPS_MIN, EPS_MAX, 25).expect("static grid"),
            ks: FULL_KS.to_vec(),
            trials: 10_000,
            scenarios: Scenario::ALL.to_vec(),
            master_seed: 0,
            delta: None,
            variant: TStatVariant::Combined,
            v_floor_fraction: V_FLOOR_FRACTION,
            log_bound: LogVarBound::Log1p,
            clamp: true,
            train: TrainConfig::default(),
        }
    }

    /// Full-scale training sweep: 25 grid points, 50 trials.
    pub fn training(dataset: &str) -> Self {
        Self {
            trials: 50,
            ..Self::stats(dataset)
        }
    }

    /// Shrinks to 9 grid points and K ∈ {1, 4, 16, 64}.
    pub fn desk(self) -> Self {
        Self {
            eps_grid: log_grid(EPS_MIN, EPS_MAX, 9).expect("static grid"),
            ks: DESK_KS.to_vec(),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() || self.eps_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("ε grid must be non-empty and strictly increasing".into()));
        }
        if self.eps_grid[0] <= 0.0 {
            return Err(Error::Config("ε grid must be positive".into()));
        }
        if self.trials < 50 {
            return Err(Error::Config(format!("at least 50 trials per cell, got {}", self.trials)));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::Config("federation sizes must be ≥ 1".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenario selected".into()));
        }
        if !(self.v_floor_fraction > 0.0) {
            return Err(Error::Config("variance floor fraction must be > 0".into()));
        }
        Ok(())
    }

    /// `(scenario, K)` pairs in output order. The central scenario has no
    /// federation and runs once with K = 1.
    pub fn groups(&self) -> Vec<(Scenario, usize)> {
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        let mut scen = self.scenarios.clone();
        scen.sort();
        scen.dedup();
        let mut out = Vec::new();
        for s in scen {
            match s {
                Scenario::Central => out.push((s, 1)),
                _ => out.extend(ks.iter().map(|&k| (s, k))),
            }
        }
        out
    }

    fn cell_seed(&self, path: &[u64]) -> u64 {
        seed::derive(self.master_seed, path)
    }

    /// Defaults in force, as `key = value` pairs for the metadata sidecars.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let t = &self.train;
        let list = |v: &[String]| v.join(",");
        let mut m = vec![
            ("dataset".to_string(), self.dataset.clone()),
            ("master_seed".into(), self.master_seed.to_string()),
            ("trials".into(), self.trials.to_string()),
            (
                "eps_grid".into(),
                list(&self.eps_grid.iter().map(|e| e.to_string()).collect::<Vec<_>>()),
            ),
            (
                "ks".into(),
                list(&self.ks.iter().map(|k| k.to_string()).collect::<Vec<_>>()),
            ),
            (
                "scenarios".into(),
                list(&self.scenarios.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            ),
            ("alpha".into(), ALPHA.to_string()),
            ("band".into(), "empirical 2.5% and 97.5% percentiles".into()),
            (
                "tstat_budget_split".into(),
                "equal: eps/4 and delta/4 for each of mean_a, var_a, mean_b, var_b".into(),
            ),
        ];
        match self.variant {
            TStatVariant::Combined => m.push((
                "tstat_mechanism".into(),
                "combined: gaussian means, log-normal variances, t recomputed".into(),
            )),
            TStatVariant::DirectLaplace { t_range } => {
                m.push(("tstat_mechanism".into(), "direct-laplace: clipped t plus laplace noise".into()));
                m.push(("tstat_t_range".into(), t_range.to_string()));
            }
        }
        m.extend([
            (
                "v_floor".into(),
                format!("{} * (hi - lo)^2", self.v_floor_fraction),
            ),
            (
                "logvar_sensitivity".into(),
                match self.log_bound {
                    LogVarBound::Linear => "dvar / v_floor",
                    LogVarBound::Log1p => "ln(1 + dvar / v_floor)",
                }
                .into(),
            ),
            (
                "post_processing".into(),
                if self.clamp {
                    "released means clamped to [lo, hi], variances to [v_floor, (hi - lo)^2 / 4]"
                } else {
                    "none"
                }
                .into(),
            ),
            (
                "local_pooling".into(),
                "n-weighted noisy means and variances; single-row node classes send the mean only; pooled variance floored at v_floor".into(),
            ),
            (
                "critical_eps_tstat_rule".into(),
                "sign-aware: first grid eps whose band edge nearest zero clears the plaintext critical t; log-eps linear interpolation".into(),
            ),
            (
                "critical_eps_train_rule".into(),
                "smallest grid eps whose welch test against the baseline does not reject and stays non-rejecting at all larger eps".into(),
            ),
            ("train_lr".into(), t.lr.to_string()),
            ("train_max_batch".into(), t.max_batch.to_string()),
            ("train_epochs".into(), t.epochs.to_string()),
            ("train_min_steps".into(), t.min_steps.to_string()),
            ("train_clip_norm".into(), t.clip_norm.to_string()),
            (
                "train_baseline".into(),
                if t.baseline_clip {
                    "same steps and sampling, per-example clipping, no noise"
                } else {
                    "same steps and sampling, no clipping, no noise"
                }
                .into(),
            ),
            (
                "train_local_budget".into(),
                "each node targets the full eps with q_local = min(1, max_batch/(K*n_local)) and the global step count".into(),
            ),
            (
                "train_secure_noise".into(),
                "each node adds N(0, sigma^2 C^2 / K) before secure aggregation".into(),
            ),
            ("train_secure_masking".into(), if t.full_masking { "pairwise masks" } else { "quantization only" }.into()),
            ("features".into(), "min-max by codebook bounds, one-hot with first level dropped".into()),
        ]);
        if let Some(d) = self.delta {
            m.push(("delta_override".into(), d.to_string()));
        }
        m
    }
}

impl fmt::Display for SweepConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} eps points in [{}, {}], K {:?}, {} trials, seed {}",
            self.dataset,
            self.eps_grid.len(),
            self.eps_grid.first().unwrap_or(&0.0),
            self.eps_grid.last().unwrap_or(&0.0),
            self.ks,
            self.trials,
            self.master_seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid() {
        let g = log_grid(0.01, 100.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[1] - 0.1).abs() < 1e-12 && (g[2] - 1.0).abs() < 1e-12);
        assert_eq!(g[4], 100.0);
        assert_eq!(parse_grid("0.01:100:9").unwrap().len(), 9);
        assert!(parse_grid("1:0.1:3").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn presets_and_groups() {
        let c = SweepConfig::stats("heart");
        assert_eq!(c.eps_grid.len(), 25);
        assert_eq!(c.trials, 10_000);
        c.validate().unwrap();
        let d = SweepConfig::training("heart").desk();
        assert_eq!(d.eps_grid.len(), 9);
        assert_eq!(d.trials, 50);
        let g = d.groups();
        assert_eq!(g[0], (Scenario::Central, 1));
        assert_eq!(g.len(), 1 + 4 + 4);
        let mut bad = d.clone();
        bad.trials = 10;
        assert!(bad.validate().is_err());
        bad.trials = 50;
        bad.eps_grid = vec![1.0, 1.0];
        assert!(bad.validate().is_err());
    }
}
