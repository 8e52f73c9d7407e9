use super::critical::{critical_eps_training, critical_eps_tstat, Critical, TStatPoint, TrainPoint};
use super::{SweepConfig, ALPHA};
use crate::data::{balanced_split, shard, Dataset, Encoder, Shards, Table};
use crate::error::Result;
use crate::fedlearn::{evaluate, train, train_baseline, Examples, TrainConfig};
use crate::fedstats::{
    self, plaintext_t, shard_partials, stats_codec, Budget, GlobalRelease, LocalRelease, PoolingEvents,
    Scenario, StatsTask, TTestResult,
};
use crate::par;
use crate::secagg;
use crate::seed::{self, stream};
use crate::stats::{quantile_sorted, sorted, t_critical};

/// Empirical 2.5% / 50% / 97.5% percentiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub median: f64,
    pub hi: f64,
}

impl Band {
    pub fn from_samples(xs: &[f64]) -> Self {
        let s = sorted(xs);
        Self {
            lo: quantile_sorted(&s, 0.025),
            median: quantile_sorted(&s, 0.5),
            hi: quantile_sorted(&s, 0.975),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

impl CellStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, CellStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsCell {
    pub scenario: Scenario,
    pub k: usize,
    pub eps: f64,
    pub status: CellStatus,
    pub t: Band,
    pub mean_a: Band,
    pub var_a: Band,
    /// Disclosed t of every trial.
    pub samples: Vec<f64>,
    pub events: PoolingEvents,
}

#[derive(Debug, Clone)]
pub struct StatsSweep {
    pub dataset: String,
    pub column: String,
    pub source: String,
    pub synthetic: bool,
    pub delta: f64,
    pub truth: TTestResult,
    /// Two-sided critical t at the plaintext Welch df.
    pub t_crit: f64,
    pub cells: Vec<StatsCell>,
    pub config: SweepConfig,
}

impl StatsSweep {
    pub fn cells_for(&self, scenario: Scenario, k: usize) -> Vec<&StatsCell> {
        let mut v: Vec<&StatsCell> = self
            .cells
            .iter()
            .filter(|c| c.scenario == scenario && c.k == k)
            .collect();
        v.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        v
    }

    pub fn critical(&self, scenario: Scenario, k: usize) -> Critical {
        let pts: Vec<TStatPoint> = self
            .cells_for(scenario, k)
            .into_iter()
            .map(|c| TStatPoint {
                eps: c.eps,
                band: c.status.is_ok().then_some((c.t.lo, c.t.hi)),
            })
            .collect();
        critical_eps_tstat(&pts, self.truth.t, self.t_crit)
    }
}

fn failed_stats_cell(scenario: Scenario, k: usize, eps: f64, msg: String) -> StatsCell {
    let nan = Band {
        lo: f64::NAN,
        median: f64::NAN,
        hi: f64::NAN,
    };
    StatsCell {
        scenario,
        k,
        eps,
        status: CellStatus::Failed(msg),
        t: nan,
        mean_a: nan,
        var_a: nan,
        samples: vec![],
        events: PoolingEvents::default(),
    }
}

enum Release {
    Global(Box<GlobalRelease>),
    Local(LocalRelease),
}

fn run_stats_cell(
    cfg: &SweepConfig,
    release: &Release,
    eps_idx: usize,
    scenario: Scenario,
    k: usize,
    eps: f64,
) -> StatsCell {
    let draws: Vec<Result<(TTestResult, PoolingEvents)>> = par::map_indexed(cfg.trials, |i| {
        let mut rng = seed::rng(cfg.cell_seed(&[stream::NOISE, eps_idx as u64, i as u64]));
        match release {
            Release::Global(r) => r.draw(&mut rng).map(|t| (t, PoolingEvents::default())),
            Release::Local(r) => r.draw(&mut rng),
        }
    });
    let mut ts = Vec::with_capacity(cfg.trials);
    let mut means = Vec::with_capacity(cfg.trials);
    let mut vars = Vec::with_capacity(cfg.trials);
    let mut events = PoolingEvents::default();
    for d in draws {
        match d {
            Ok((r, ev)) => {
                ts.push(r.t);
                means.push(r.mean_a);
                vars.push(r.var_a);
                events.variance_omitted += ev.variance_omitted;
                events.floored += ev.floored;
            }
            Err(e) => return failed_stats_cell(scenario, k, eps, e.to_string()),
        }
    }
    StatsCell {
        scenario,
        k,
        eps,
        status: CellStatus::Ok,
        t: Band::from_samples(&ts),
        mean_a: Band::from_samples(&means),
        var_a: Band::from_samples(&vars),
        samples: ts,
        events,
    }
}

fn shards_for(cfg: &SweepConfig, t: &Table, k: usize, extra: &[u64]) -> Result<Shards> {
    let mut path = vec![stream::SHARD];
    path.extend_from_slice(extra);
    path.push(k as u64);
    shard(t, k, cfg.cell_seed(&path))
}

/// Draws `cfg.trials` disclosed t-stats for every (ε, K, scenario) cell.
///
/// Exact and securely aggregated partials are computed once per K; only the
/// DP noise is redrawn per trial. Trial seeds depend on the ε index and the
/// trial index only, so all scenarios share common random numbers.
pub fn sweep_tstat(cfg: &SweepConfig, ds: &Dataset) -> Result<StatsSweep> {
    cfg.validate()?;
    let col = ds.table.column_index(&ds.selected)?;
    let mut task = StatsTask::for_column(&ds.table, col)?;
    let range = task.bounds.1 - task.bounds.0;
    task.v_floor = cfg.v_floor_fraction * range * range;
    task.variant = cfg.variant;
    task.log_bound = cfg.log_bound;
    task.clamp = cfg.clamp;
    let delta = cfg.delta.unwrap_or(ds.schema.delta);
    let truth = plaintext_t(&ds.table, &task)?;
    let t_crit = t_critical(ALPHA, truth.df);
    let root = secagg::root_secret(cfg.cell_seed(&[stream::MASK]));

    let mut cells = Vec::new();
    for (scenario, k) in cfg.groups() {
        // per-K inputs shared by every ε
        let prepared: Result<Vec<[fedstats::PartialStat; 2]>> = match scenario {
            Scenario::Central => fedstats::local_partials(&ds.table, col).map(|p| vec![p]),
            Scenario::Local => shards_for(cfg, &ds.table, k, &[]).and_then(|s| shard_partials(&s, col)),
            Scenario::Secure => shards_for(cfg, &ds.table, k, &[]).and_then(|s| {
                let codec = stats_codec(&s)?;
                fedstats::secure_partials(&s, &task, &codec, &root, k as u64).map(|p| vec![p])
            }),
        };
        for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
            let release = prepared.as_ref().map_err(ToString::to_string).and_then(|parts| {
                let build = || -> Result<Release> {
                    let budget = Budget::new(eps, delta)?;
                    Ok(match scenario {
                        Scenario::Local => Release::Local(LocalRelease::new(parts, &task, budget)?),
                        _ => Release::Global(Box::new(GlobalRelease::new(parts[0], &task, budget, scenario)?)),
                    })
                };
                build().map_err(|e| e.to_string())
            });
            cells.push(match release {
                Ok(r) => run_stats_cell(cfg, &r, ei, scenario, k, eps),
                Err(msg) => failed_stats_cell(scenario, k, eps, msg),
            });
        }
    }
    Ok(StatsSweep {
        dataset: ds.schema.name.clone(),
        column: ds.selected.clone(),
        source: ds.source.to_string(),
        synthetic: ds.is_synthetic(),
        delta,
        truth,
        t_crit,
        cells,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainCell {
    pub scenario: Scenario,
    pub k: usize,
    pub eps: f64,
    pub status: CellStatus,
    pub accuracies: Vec<f64>,
    /// Largest accountant ε over the trials.
    pub achieved_eps: f64,
    /// Mean noise multiplier over the trials.
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct TrainSweep {
    pub dataset: String,
    pub source: String,
    pub synthetic: bool,
    pub delta: f64,
    /// Non-private accuracy per trial.
    pub baseline: Vec<f64>,
    pub cells: Vec<TrainCell>,
    pub config: SweepConfig,
}

impl TrainSweep {
    pub fn cells_for(&self, scenario: Scenario, k: usize) -> Vec<&TrainCell> {
        let mut v: Vec<&TrainCell> = self
            .cells
            .iter()
            .filter(|c| c.scenario == scenario && c.k == k)
            .collect();
        v.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        v
    }

    pub fn critical(&self, scenario: Scenario, k: usize) -> Critical {
        let cells = self.cells_for(scenario, k);
        let pts: Vec<TrainPoint> = cells
            .iter()
            .map(|c| TrainPoint {
                eps: c.eps,
                accuracies: c.status.is_ok().then_some(c.accuracies.as_slice()),
            })
            .collect();
        critical_eps_training(&pts, &self.baseline, ALPHA)
    }
}

/// Encoded train/test data of one trial.
struct TrialData {
    train: Table,
    test: Examples,
}

fn trial_data(cfg: &SweepConfig, ds: &Dataset, enc: &Encoder, trial: usize) -> Result<TrialData> {
    let split = balanced_split(&ds.table, cfg.cell_seed(&[stream::SPLIT, trial as u64]))?;
    let (xs, ys) = enc.encode(&split.test)?;
    Ok(TrialData {
        train: split.train,
        test: Examples::new(xs, ys)?,
    })
}

fn encode(enc: &Encoder, t: &Table) -> Result<Examples> {
    let (xs, ys) = enc.encode(t)?;
    Examples::new(xs, ys)
}

/// Trains `cfg.trials` models per (ε, K, scenario) cell plus one
/// non-private baseline per trial.
///
/// Trial `i` uses the same train/test split in every cell and in the
/// baseline.
pub fn sweep_training(cfg: &SweepConfig, ds: &Dataset) -> Result<TrainSweep> {
    cfg.validate()?;
    let delta = cfg.delta.unwrap_or(ds.schema.delta);
    let enc = Encoder::for_table(&ds.table);
    let template = TrainConfig {
        delta,
        ..cfg.train.clone()
    };

    let baseline: Vec<Result<f64>> = par::map_indexed(cfg.trials, |i| {
        let d = trial_data(cfg, ds, &enc, i)?;
        let m = train_baseline(&[encode(&enc, &d.train)?], &template, cfg.cell_seed(&[stream::BASELINE, i as u64]))?;
        Ok(evaluate(&m, &d.test))
    });
    let baseline = baseline.into_iter().collect::<Result<Vec<f64>>>()?;

    let groups = cfg.groups();
    let n_eps = cfg.eps_grid.len();
    let jobs = groups.len() * n_eps * cfg.trials;
    let results: Vec<Result<(f64, f64, f64)>> = par::map_indexed(jobs, |j| {
        let trial = j % cfg.trials;
        let ei = (j / cfg.trials) % n_eps;
        let (scenario, k) = groups[j / (cfg.trials * n_eps)];
        let d = trial_data(cfg, ds, &enc, trial)?;
        let nodes = if k == 1 {
            vec![encode(&enc, &d.train)?]
        } else {
            shards_for(cfg, &d.train, k, &[trial as u64])?
                .node_tables
                .iter()
                .map(|t| encode(&enc, t))
                .collect::<Result<Vec<_>>>()?
        };
        let tc = TrainConfig {
            target_eps: cfg.eps_grid[ei],
            scenario,
            k,
            ..template.clone()
        };
        let out = train(&nodes, &tc, cfg.cell_seed(&[stream::TRAIN, trial as u64]))?;
        Ok((evaluate(&out.model, &d.test), out.achieved_eps, out.sigma))
    });

    let mut cells = Vec::with_capacity(groups.len() * n_eps);
    let mut it = results.into_iter();
    for &(scenario, k) in &groups {
        for &eps in &cfg.eps_grid {
            let mut accs = Vec::with_capacity(cfg.trials);
            let mut achieved = 0f64;
            let mut sigma = 0.0;
            let mut status = CellStatus::Ok;
            for r in it.by_ref().take(cfg.trials) {
                match r {
                    Ok((a, e, s)) => {
                        accs.push(a);
                        achieved = achieved.max(e);
                        sigma += s;
                    }
                    Err(e) => {
                        if status.is_ok() {
                            status = CellStatus::Failed(e.to_string());
                        }
                    }
                }
            }
            if !status.is_ok() {
                accs.clear();
            }
            let n = accs.len().max(1) as f64;
            cells.push(TrainCell {
                scenario,
                k,
                eps,
                status,
                accuracies: accs,
                achieved_eps: achieved,
                sigma: sigma / n,
            });
        }
    }
    Ok(TrainSweep {
        dataset: ds.schema.name.clone(),
        source: ds.source.to_string(),
        synthetic: ds.is_synthetic(),
        delta,
        baseline,
        cells,
        config: cfg.clone(),
    })
}
