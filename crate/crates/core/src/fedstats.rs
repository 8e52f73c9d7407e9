//! Distributed Welch t-test under the three protection scenarios.
//!
//! Each node reduces its shard to per-class `(n, Σx, Σx²)`. What leaves the
//! node, and where DP noise is added, depends on the scenario:
//!
//! * **central**: all rows in one place; the four released statistics
//!   (mean and variance per class) are noised once with global `n`;
//! * **local**: every node noises its own per-class mean and variance with
//!   local `n` and shares them in plaintext; the server pools the noisy values;
//! * **secure**: exact partials are summed under secure aggregation and the
//!   global statistics are noised once, exactly as in the central case.
//!
//! Means go through the Gaussian mechanism and variances through the
//! log-normal mechanism. The total budget is split evenly over the four
//! releases.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::data::{Shards, Table};
use crate::error::{Error, Result};
use crate::mech::{
    laplace, logvar_sensitivity, logvar_sensitivity_log1p, mean_sensitivity, GaussianMechanism,
    LogNormalMechanism, PrivacyParams,
};
use crate::secagg::{self, FixedPointCodec};
use crate::stats::welch_test;

/// Releases protecting one t-test: mean and variance for each class.
pub const RELEASES_PER_TEST: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Central,
    Local,
    Secure,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Central, Scenario::Local, Scenario::Secure];

    pub fn number(self) -> u8 {
        match self {
            Scenario::Central => 1,
            Scenario::Local => 2,
            Scenario::Secure => 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Central => "central",
            Scenario::Local => "local",
            Scenario::Secure => "secure",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central" | "1" => Ok(Scenario::Central),
            "local" | "2" => Ok(Scenario::Local),
            "secure" | "3" => Ok(Scenario::Secure),
            _ => Err(Error::Config(format!("unknown scenario `{s}`"))),
        }
    }
}

/// Total privacy budget of one disclosed result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub epsilon: f64,
    pub delta: f64,
}

impl Budget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        PrivacyParams::new(epsilon, delta, 0.0)?;
        if delta == 0.0 {
            return Err(Error::Parameter("delta must be > 0".into()));
        }
        Ok(Self { epsilon, delta })
    }

    /// No noise at all.
    pub fn unlimited(delta: f64) -> Self {
        Self {
            epsilon: f64::INFINITY,
            delta,
        }
    }

    fn per_release(&self, sensitivity: f64) -> Result<PrivacyParams> {
        let k = RELEASES_PER_TEST as f64;
        PrivacyParams::new(self.epsilon / k, self.delta / k, sensitivity)
    }
}

/// Per-node, per-class sufficient statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PartialStat {
    pub n: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl PartialStat {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sumsq: self.sumsq + o.sumsq,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Population variance, never negative.
    pub fn pop_var(&self) -> f64 {
        let m = self.mean();
        (self.sumsq / self.n as f64 - m * m).max(0.0)
    }

    pub fn sample_var(&self) -> f64 {
        self.pop_var() * self.n as f64 / (self.n as f64 - 1.0)
    }
}

/// Group summary fed to the t statistic: count, mean, sample variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSummary {
    pub n: f64,
    pub mean: f64,
    pub var: f64,
}

impl From<PartialStat> for GroupSummary {
    fn from(p: PartialStat) -> Self {
        Self {
            n: p.n as f64,
            mean: p.mean(),
            var: p.sample_var(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub scenario: Scenario,
    pub epsilon: f64,
}

/// Welch's t for group `a` (class 0) against group `b` (class 1).
pub fn welch_t(a: GroupSummary, b: GroupSummary) -> Result<TTestResult> {
    if a.n < 2.0 || b.n < 2.0 {
        return Err(Error::Degenerate(format!(
            "each group needs at least 2 rows (got {} and {})",
            a.n, b.n
        )));
    }
    if a.var <= 0.0 && b.var <= 0.0 {
        return Err(Error::Degenerate("both groups have zero variance".into()));
    }
    let (t, df, _) = welch_test(a.mean, a.var, a.n, b.mean, b.var, b.n);
    Ok(TTestResult {
        t,
        df,
        mean_a: a.mean,
        mean_b: b.mean,
        var_a: a.var,
        var_b: b.var,
        n_a: a.n,
        n_b: b.n,
        scenario: Scenario::Central,
        epsilon: f64::INFINITY,
    })
}

/// Exact per-class partials of column `col` on one shard.
pub fn local_partials(shard: &Table, col: usize) -> Result<[PartialStat; 2]> {
    if !shard.columns()[col].is_numeric() {
        return Err(Error::Schema(format!("column `{}` is not numeric", shard.columns()[col].name)));
    }
    let mut p = [PartialStat::default(); 2];
    for (i, r) in shard.rows().iter().enumerate() {
        p[shard.label(i)].push(r[col]);
    }
    Ok(p)
}

/// Element-wise sum of per-node partials.
pub fn merge_all(parts: &[[PartialStat; 2]]) -> [PartialStat; 2] {
    parts.iter().fold([PartialStat::default(); 2], |acc, p| {
        [acc[0].merge(p[0]), acc[1].merge(p[1])]
    })
}

/// How the t statistic is protected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TStatVariant {
    /// Noisy means (Gaussian) and variances (log-normal), t recomputed.
    Combined,
    /// t clipped to `[−T, T]` plus Laplace noise of sensitivity `2T`.
    /// Only meaningful where a single party sees the exact t (central, secure).
    DirectLaplace { t_range: f64 },
}

/// Sensitivity used for the log-variance release.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogVarBound {
    /// `Δvar / v_floor`.
    Linear,
    /// `ln(1 + Δvar / v_floor)`.
    Log1p,
}

/// Column-level constants of the task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsTask {
    pub col: usize,
    pub bounds: (f64, f64),
    /// Lower bound applied to every variance before release.
    pub v_floor: f64,
    pub variant: TStatVariant,
    pub log_bound: LogVarBound,
    /// Clamp released means to the bounds and variances to
    /// `[v_floor, (hi − lo)²/4]` before recombining.
    pub clamp: bool,
}

impl StatsTask {
    fn logvar_sensitivity(&self, n: usize) -> Result<f64> {
        match self.log_bound {
            LogVarBound::Linear => logvar_sensitivity(self.bounds, n, self.v_floor),
            LogVarBound::Log1p => logvar_sensitivity_log1p(self.bounds, n, self.v_floor),
        }
    }

    fn post_mean(&self, m: f64) -> f64 {
        if self.clamp {
            m.clamp(self.bounds.0, self.bounds.1)
        } else {
            m
        }
    }

    fn post_var(&self, v: f64) -> f64 {
        if self.clamp {
            let r = self.bounds.1 - self.bounds.0;
            v.clamp(self.v_floor, (0.25 * r * r).max(self.v_floor))
        } else {
            v
        }
    }
}

/// Default variance floor as a fraction of the squared column range.
pub const V_FLOOR_FRACTION: f64 = 1e-4;

impl StatsTask {
    pub fn for_column(t: &Table, col: usize) -> Result<Self> {
        let bounds = t.columns()[col].bounds().ok_or_else(|| {
            Error::Schema(format!("column `{}` is not numeric", t.columns()[col].name))
        })?;
        let range = bounds.1 - bounds.0;
        Ok(Self {
            col,
            bounds,
            v_floor: V_FLOOR_FRACTION * range * range,
            variant: TStatVariant::Combined,
            log_bound: LogVarBound::Log1p,
            clamp: true,
        })
    }
}

/// Exact plaintext t-test on the whole table.
pub fn plaintext_t(t: &Table, task: &StatsTask) -> Result<TTestResult> {
    let [a, b] = local_partials(t, task.col)?;
    welch_t(a.into(), b.into())
}

/// Mechanisms for one class released from global statistics.
#[derive(Debug, Clone, Copy)]
struct ClassRelease {
    n: f64,
    mean: f64,
    pop_var: f64,
    mean_mech: GaussianMechanism,
    var_mech: LogNormalMechanism,
    task: StatsTask,
}

impl ClassRelease {
    fn new(p: PartialStat, task: &StatsTask, budget: &Budget) -> Result<Self> {
        let n = p.n as usize;
        if n < 2 {
            return Err(Error::Degenerate(format!("class with {n} rows")));
        }
        Ok(Self {
            n: p.n as f64,
            mean: p.mean(),
            pop_var: p.pop_var().max(task.v_floor),
            mean_mech: GaussianMechanism::new(&budget.per_release(mean_sensitivity(task.bounds, n)?)?)?,
            var_mech: LogNormalMechanism::new(&budget.per_release(task.logvar_sensitivity(n)?)?)?,
            task: *task,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupSummary {
        let mean = self.task.post_mean(self.mean_mech.release(self.mean, rng));
        let pop = self.task.post_var(self.var_mech.release(self.pop_var, rng));
        GroupSummary {
            n: self.n,
            mean,
            var: pop * self.n / (self.n - 1.0),
        }
    }
}

/// Noise calibrated to the global statistics (scenarios 1 and 3). Built once
/// per `(statistics, budget)`, then sampled per trial.
#[derive(Debug, Clone)]
pub struct GlobalRelease {
    classes: [ClassRelease; 2],
    exact: TTestResult,
    task: StatsTask,
    budget: Budget,
    scenario: Scenario,
}

impl GlobalRelease {
    pub fn new(global: [PartialStat; 2], task: &StatsTask, budget: Budget, scenario: Scenario) -> Result<Self> {
        let exact = welch_t(global[0].into(), global[1].into())?;
        Ok(Self {
            classes: [
                ClassRelease::new(global[0], task, &budget)?,
                ClassRelease::new(global[1], task, &budget)?,
            ],
            exact,
            task: *task,
            budget,
            scenario,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TTestResult> {
        let mut r = match self.task.variant {
            TStatVariant::Combined => {
                let a = self.classes[0].draw(rng);
                let b = self.classes[1].draw(rng);
                welch_t(a, b)?
            }
            TStatVariant::DirectLaplace { t_range } => {
                let p = PrivacyParams::new(self.budget.epsilon, 0.0, 2.0 * t_range)?;
                let clipped = self.exact.t.clamp(-t_range, t_range);
                TTestResult {
                    t: laplace(clipped, &p, rng)?,
                    ..self.exact
                }
            }
        };
        r.scenario = self.scenario;
        r.epsilon = self.budget.epsilon;
        Ok(r)
    }
}

/// Per-node mechanisms for scenario 2.
#[derive(Debug, Clone)]
struct NodeRelease {
    classes: [Option<(PartialStat, GaussianMechanism, Option<LogNormalMechanism>)>; 2],
}

/// Local-DP release: every node noises its own partial means and variances.
#[derive(Debug, Clone)]
pub struct LocalRelease {
    nodes: Vec<NodeRelease>,
    totals: [u64; 2],
    task: StatsTask,
    budget: Budget,
}

/// Bookkeeping of scenario-2 pooling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PoolingEvents {
    /// Node-class pairs with a single row: mean shared, variance omitted.
    pub variance_omitted: usize,
    /// Pooled variances raised to the floor.
    pub floored: usize,
}

impl LocalRelease {
    pub fn new(parts: &[[PartialStat; 2]], task: &StatsTask, budget: Budget) -> Result<Self> {
        let mut nodes = Vec::with_capacity(parts.len());
        for p in parts {
            let mut classes = [None, None];
            for c in 0..2 {
                let n = p[c].n as usize;
                if n == 0 {
                    continue;
                }
                let mean = GaussianMechanism::new(&budget.per_release(mean_sensitivity(task.bounds, n)?)?)?;
                let var = if n >= 2 {
                    Some(LogNormalMechanism::new(&budget.per_release(task.logvar_sensitivity(n)?)?)?)
                } else {
                    None
                };
                classes[c] = Some((p[c], mean, var));
            }
            nodes.push(NodeRelease { classes });
        }
        let totals = merge_all(parts).map(|p| p.n);
        if totals.iter().any(|&n| n < 2) {
            return Err(Error::Degenerate(format!("class sizes {totals:?}")));
        }
        Ok(Self {
            nodes,
            totals,
            task: *task,
            budget,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(TTestResult, PoolingEvents)> {
        let mut ev = PoolingEvents::default();
        let mut groups = [GroupSummary { n: 0.0, mean: 0.0, var: 0.0 }; 2];
        for (c, slot) in groups.iter_mut().enumerate() {
            // (n_i, noisy mean, noisy population variance)
            let mut shared: Vec<(f64, f64, Option<f64>)> = Vec::new();
            for node in &self.nodes {
                if let Some((p, mm, vm)) = &node.classes[c] {
                    let m = self.task.post_mean(mm.release(p.mean(), rng));
                    let v = match vm {
                        Some(vm) => Some(self.task.post_var(vm.release(p.pop_var().max(self.task.v_floor), rng))),
                        None => {
                            ev.variance_omitted += 1;
                            None
                        }
                    };
                    shared.push((p.n as f64, m, v));
                }
            }
            let n_total = self.totals[c] as f64;
            let pooled_mean = shared.iter().map(|(n, m, _)| n * m).sum::<f64>() / n_total;
            let (wn, wv) = shared
                .iter()
                .filter_map(|(n, _, v)| v.map(|v| (*n, n * v)))
                .fold((0.0, 0.0), |(a, b), (n, v)| (a + n, b + v));
            let within = if wn > 0.0 { wv / wn } else { 0.0 };
            let between = shared
                .iter()
                .map(|(n, m, _)| n * (m - pooled_mean).powi(2))
                .sum::<f64>()
                / n_total;
            let mut pop = within + between;
            if pop < self.task.v_floor {
                ev.floored += 1;
                pop = self.task.v_floor;
            }
            *slot = GroupSummary {
                n: n_total,
                mean: pooled_mean,
                var: pop * n_total / (n_total - 1.0),
            };
        }
        let mut r = welch_t(groups[0], groups[1])?;
        r.scenario = Scenario::Local;
        r.epsilon = self.budget.epsilon;
        Ok((r, ev))
    }
}

/// Partials of every node.
pub fn shard_partials(shards: &Shards, col: usize) -> Result<Vec<[PartialStat; 2]>> {
    shards.node_tables.iter().map(|t| local_partials(t, col)).collect()
}

/// Codec for a secure-aggregation round over `shards`: values are affinely
/// mapped to `[0, 1]` before encoding, so every element of a node's vector is
/// bounded by its row count.
pub fn stats_codec(shards: &Shards) -> Result<FixedPointCodec> {
    let max_rows = shards.sizes().into_iter().max().unwrap_or(1).max(1);
    let codec = FixedPointCodec::new(secagg::DEFAULT_FRAC_BITS, max_rows as f64)?;
    codec.check_capacity(shards.k())?;
    Ok(codec)
}

/// Global per-class partials obtained through secure aggregation.
pub fn secure_partials(
    shards: &Shards,
    task: &StatsTask,
    codec: &FixedPointCodec,
    root: &[u8; 32],
    round_id: u64,
) -> Result<[PartialStat; 2]> {
    let (lo, hi) = task.bounds;
    let w = hi - lo;
    let parts = shard_partials(shards, task.col)?;
    let vectors: Vec<Vec<f64>> = parts
        .iter()
        .map(|p| {
            let mut v = Vec::with_capacity(6);
            for s in p {
                // Σu and Σu² of u = (x − lo)/w, both within [0, n]
                let n = s.n as f64;
                let su = (s.sum - n * lo) / w;
                let suu = (s.sumsq - 2.0 * lo * s.sum + n * lo * lo) / (w * w);
                v.extend([n, su, suu]);
            }
            v
        })
        .collect();
    let out = secagg::secure_sum(&vectors, codec, root, round_id)?;
    let s = out.sum;
    let class = |o: usize| {
        let n = s[o].round();
        let (su, suu) = (s[o + 1], s[o + 2]);
        PartialStat {
            n: n as u64,
            sum: n * lo + w * su,
            sumsq: n * lo * lo + 2.0 * lo * w * su + w * w * suu,
        }
    };
    Ok([class(0), class(3)])
}

/// Scenario 1: centralized table, DP on the global statistics.
pub fn run_scenario1<R: Rng + ?Sized>(t: &Table, task: &StatsTask, budget: Budget, rng: &mut R) -> Result<TTestResult> {
    let global = local_partials(t, task.col)?;
    GlobalRelease::new(global, task, budget, Scenario::Central)?.draw(rng)
}

/// Scenario 2: local DP on each node's partials, plaintext pooling.
pub fn run_scenario2<R: Rng + ?Sized>(shards: &Shards, task: &StatsTask, budget: Budget, rng: &mut R) -> Result<TTestResult> {
    let parts = shard_partials(shards, task.col)?;
    Ok(LocalRelease::new(&parts, task, budget)?.draw(rng)?.0)
}

/// Scenario 3: secure aggregation of exact partials, DP on the global result.
pub fn run_scenario3<R: Rng + ?Sized>(
    shards: &Shards,
    task: &StatsTask,
    budget: Budget,
    codec: &FixedPointCodec,
    root: &[u8; 32],
    rng: &mut R,
) -> Result<TTestResult> {
    let global = secure_partials(shards, task, codec, root, 0)?;
    GlobalRelease::new(global, task, budget, Scenario::Secure)?.draw(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{shard, ColumnSpec};
    use crate::seed;
    use approx::assert_relative_eq;

    fn table(values: &[(f64, usize)]) -> Table {
        let cols = vec![
            ColumnSpec::numeric("x", 0.0, 100.0).unwrap(),
            ColumnSpec::numeric("id", 0.0, 1e9).unwrap(),
            ColumnSpec::categorical("y", &["a", "b"]).unwrap(),
        ];
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| vec![x, i as f64, y as f64])
            .collect();
        Table::new(cols, "y", rows).unwrap()
    }

    #[test]
    fn partials_arithmetic() {
        let t = table(&[(1.0, 0), (2.0, 0), (3.0, 0), (10.0, 1)]);
        let [a, b] = local_partials(&t, 0).unwrap();
        assert_eq!((a.n, a.sum, a.sumsq), (3, 6.0, 14.0));
        assert_eq!((b.n, b.sum, b.sumsq), (1, 10.0, 100.0));
        let empty = t.derive(vec![]);
        assert_eq!(local_partials(&empty, 0).unwrap(), [PartialStat::default(); 2]);
    }

    #[test]
    fn welch_closed_form_and_errors() {
        let a = GroupSummary { n: 2.0, mean: 1.0, var: 1.0 };
        let b = GroupSummary { n: 2.0, mean: 0.0, var: 1.0 };
        let r = welch_t(a, b).unwrap();
        assert_relative_eq!(r.t, 1.0);
        assert_relative_eq!(r.df, 2.0);
        assert_eq!(welch_t(a, a).unwrap().t, 0.0);
        assert_relative_eq!(welch_t(b, a).unwrap().t, -r.t);
        let z = GroupSummary { var: 0.0, ..a };
        assert!(matches!(welch_t(z, z), Err(Error::Degenerate(_))));
        assert!(welch_t(GroupSummary { n: 1.0, ..a }, b).is_err());
    }

    fn sample_table() -> Table {
        let mut rng = seed::rng(4);
        let v: Vec<(f64, usize)> = (0..400)
            .map(|i| {
                let y = i % 2;
                let x: f64 = 45.0 + 10.0 * y as f64 + rng.random_range(-40.0..40.0);
                (x, y)
            })
            .collect();
        table(&v)
    }

    #[test]
    fn no_privacy_limit_matches_plaintext() {
        let t = sample_table();
        let task = StatsTask::for_column(&t, 0).unwrap();
        let truth = plaintext_t(&t, &task).unwrap();
        let mut rng = seed::rng(1);
        let b = Budget::new(1e12, 1e-5).unwrap();
        let s1 = run_scenario1(&t, &task, b, &mut rng).unwrap();
        assert!((s1.t - truth.t).abs() < 1e-3, "{} vs {}", s1.t, truth.t);
        let shards = shard(&t, 8, 0).unwrap();
        let s2 = run_scenario2(&shards, &task, b, &mut rng).unwrap();
        assert!((s2.t - truth.t).abs() < 1e-2, "{} vs {}", s2.t, truth.t);
    }

    #[test]
    fn secure_quantization_only() {
        let t = sample_table();
        let task = StatsTask::for_column(&t, 0).unwrap();
        let truth = plaintext_t(&t, &task).unwrap();
        for k in [1, 4, 64] {
            let shards = shard(&t, k, 3).unwrap();
            let codec = stats_codec(&shards).unwrap();
            let r = run_scenario3(
                &shards,
                &task,
                Budget::unlimited(1e-5),
                &codec,
                &secagg::root_secret(k as u64),
                &mut seed::rng(0),
            )
            .unwrap();
            assert!((r.t - truth.t).abs() <= 64.0 * 2f64.powi(-16), "K={k}: {} vs {}", r.t, truth.t);
        }
    }

    #[test]
    fn all_zero_column_is_degenerate() {
        let v: Vec<(f64, usize)> = (0..128).map(|i| (0.0, i % 2)).collect();
        let t = table(&v);
        let task = StatsTask::for_column(&t, 0).unwrap();
        let shards = shard(&t, 64, 0).unwrap();
        let codec = stats_codec(&shards).unwrap();
        let r = run_scenario3(
            &shards,
            &task,
            Budget::new(1.0, 1e-5).unwrap(),
            &codec,
            &secagg::root_secret(0),
            &mut seed::rng(0),
        );
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn single_row_classes_omit_variance() {
        let t = sample_table();
        let task = StatsTask::for_column(&t, 0).unwrap();
        let shards = shard(&t, 256, 0).unwrap();
        let parts = shard_partials(&shards, 0).unwrap();
        let rel = LocalRelease::new(&parts, &task, Budget::new(10.0, 1e-5).unwrap()).unwrap();
        let (_, ev) = rel.draw(&mut seed::rng(2)).unwrap();
        assert!(ev.variance_omitted > 0);
    }

    #[test]
    fn direct_laplace_variant() {
        let t = sample_table();
        let mut task = StatsTask::for_column(&t, 0).unwrap();
        task.variant = TStatVariant::DirectLaplace { t_range: 20.0 };
        let truth = plaintext_t(&t, &task).unwrap();
        let r = run_scenario1(&t, &task, Budget::new(1e7, 1e-5).unwrap(), &mut seed::rng(0)).unwrap();
        assert!((r.t - truth.t.clamp(-20.0, 20.0)).abs() < 1e-3);
    }
}
