//! Logistic regression trained with DP-SGD, centrally or over a federation.
//!
//! Every step draws a Poisson sample at rate `q`, clips each per-example
//! gradient to norm `C`, sums, adds Gaussian noise and divides by the expected
//! batch size. Where the noise is added depends on the scenario:
//!
//! * **central**: once, `N(0, σ²C²)`, on the pooled data;
//! * **local**: each node adds its own `N(0, σ_l²C²)` before sharing its
//!   gradient sum in plaintext;
//! * **secure**: each node adds `N(0, σ²C²/K)` and the sums are combined by
//!   secure aggregation, so the total noise matches the central case.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fedstats::Scenario;
use crate::rdp;
use crate::secagg::{self, FixedPointCodec};
use crate::seed::{self, stream};

/// Encoded design matrix and 0/1 labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Examples {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl Examples {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Parameter(format!("{} rows but {} labels", xs.len(), ys.len())));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn concat(parts: &[Examples]) -> Self {
        let mut out = Examples::default();
        for p in parts {
            out.xs.extend(p.xs.iter().cloned());
            out.ys.extend(p.ys.iter().copied());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Model {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Mean binary cross-entropy.
    pub fn loss(&self, data: &Examples) -> f64 {
        let total: f64 = data
            .xs
            .iter()
            .zip(&data.ys)
            .map(|(x, &y)| {
                let z = self.logit(x);
                // log(1 + e^z) − y·z, stable for large |z|
                z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
            })
            .sum();
        total / data.len() as f64
    }

    /// Applies `θ ← θ − lr·g` with the bias as the last coordinate of `g`.
    pub fn step(&mut self, g: &[f64], lr: f64) {
        let d = self.dim();
        for (w, gi) in self.weights.iter_mut().zip(&g[..d]) {
            *w -= lr * gi;
        }
        self.bias -= lr * g[d];
    }

    /// One `name value` line per coefficient, bias last.
    pub fn to_text(&self, names: &[String]) -> Result<String> {
        if names.len() != self.dim() {
            return Err(Error::Parameter(format!(
                "{} feature names for {} weights",
                names.len(),
                self.dim()
            )));
        }
        let mut out = String::new();
        for (n, w) in names.iter().zip(&self.weights) {
            let _ = writeln!(out, "{n} {w:e}");
        }
        let _ = writeln!(out, "bias {:e}", self.bias);
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<(Vec<String>, Self)> {
        let mut names = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (n, v) = line.trim().rsplit_once(' ').ok_or_else(|| Error::Parse {
                path: "<model>".into(),
                line: i as u64 + 1,
                msg: "expected `name value`".into(),
            })?;
            let v: f64 = v.parse().map_err(|_| Error::Parse {
                path: "<model>".into(),
                line: i as u64 + 1,
                msg: format!("bad number `{v}`"),
            })?;
            names.push(n.to_string());
            values.push(v);
        }
        match names.last().map(String::as_str) {
            Some("bias") => {
                let bias = values.pop().unwrap_or(0.0);
                names.pop();
                Ok((names, Model { weights: values, bias }))
            }
            _ => Err(Error::Parse {
                path: "<model>".into(),
                line: names.len() as u64,
                msg: "last line must be the bias".into(),
            }),
        }
    }
}

/// Per-example log-loss gradient; the bias coordinate comes last.
pub fn grad_logloss(m: &Model, x: &[f64], y: f64) -> Result<Vec<f64>> {
    if x.len() != m.dim() {
        return Err(Error::Parameter(format!("row has {} features, model {}", x.len(), m.dim())));
    }
    if !x.iter().all(|v| v.is_finite()) || !y.is_finite() {
        return Err(Error::Numeric("non-finite input to gradient".into()));
    }
    let r = m.predict_proba(x) - y;
    let mut g: Vec<f64> = x.iter().map(|v| r * v).collect();
    g.push(r);
    Ok(g)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `g` in place to norm at most `c`.
pub fn clip_in_place(g: &mut [f64], c: f64) {
    let n = l2_norm(g);
    if n > c {
        let s = c / n;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

/// Sum of clipped per-example gradients over `idx`.
pub fn clipped_sum(m: &Model, data: &Examples, idx: &[usize], clip: f64) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; m.dim() + 1];
    for &i in idx {
        let mut g = grad_logloss(m, &data.xs[i], data.ys[i])?;
        clip_in_place(&mut g, clip);
        acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok(acc)
}

fn add_noise<R: Rng + ?Sized>(v: &mut [f64], sd: f64, rng: &mut R) {
    if sd > 0.0 {
        for x in v.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += sd * z;
        }
    }
}

/// Poisson sample: each index kept independently with probability `q`.
pub fn poisson_sample<R: Rng + ?Sized>(n: usize, q: f64, rng: &mut R) -> Vec<usize> {
    if q >= 1.0 {
        return (0..n).collect();
    }
    (0..n).filter(|_| rng.random::<f64>() < q).collect()
}

/// Default number of passes over the data.
pub const DEFAULT_EPOCHS: u64 = 20;
/// Default lower bound on the number of optimizer steps.
pub const DEFAULT_MIN_STEPS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_batch: usize,
    pub epochs: u64,
    /// Floor on the step count for datasets smaller than one batch.
    pub min_steps: u64,
    pub clip_norm: f64,
    pub target_eps: f64,
    pub delta: f64,
    pub scenario: Scenario,
    pub k: usize,
    /// Run secure aggregation with pairwise masks (true) or just the
    /// fixed-point quantization it introduces (false). Outputs are identical.
    pub full_masking: bool,
    /// The non-private baseline keeps per-example clipping (true) or runs
    /// plain SGD (false). Neither adds noise.
    pub baseline_clip: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            max_batch: 242,
            epochs: DEFAULT_EPOCHS,
            min_steps: DEFAULT_MIN_STEPS,
            clip_norm: 1.0,
            target_eps: 1.0,
            delta: 1e-5,
            scenario: Scenario::Central,
            k: 1,
            full_masking: true,
            baseline_clip: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.max_batch == 0 || !(self.clip_norm > 0.0) || self.k == 0 {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        if !(self.target_eps > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!(
                "need ε > 0 and δ in (0, 1), got ({}, {})",
                self.target_eps, self.delta
            )));
        }
        Ok(())
    }

    /// Sampling rate for `n` rows.
    pub fn rate(&self, n: usize) -> f64 {
        (self.max_batch as f64 / n.max(1) as f64).min(1.0)
    }

    /// Number of optimizer steps for `n` rows.
    pub fn steps(&self, n: usize) -> u64 {
        let per_epoch = n.max(1).div_ceil(self.max_batch) as u64;
        (self.epochs * per_epoch).max(self.min_steps)
    }

    fn noise_multiplier(&self, q: f64, steps: u64) -> Result<f64> {
        if self.target_eps.is_infinite() {
            Ok(0.0)
        } else {
            rdp::calibrate_sigma(self.target_eps, self.delta, q, steps)
        }
    }
}

/// One central DP-SGD step on `batch` (indices into `data`).
pub fn dp_sgd_step<R: Rng + ?Sized>(
    m: &Model,
    data: &Examples,
    batch: &[usize],
    cfg: &TrainConfig,
    sigma: f64,
    expected_batch: f64,
    rng: &mut R,
) -> Result<Model> {
    let mut g = clipped_sum(m, data, batch, cfg.clip_norm)?;
    add_noise(&mut g, sigma * cfg.clip_norm, rng);
    g.iter_mut().for_each(|x| *x /= expected_batch);
    let mut out = m.clone();
    out.step(&g, cfg.lr);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    /// Privacy loss per the accountant (worst node for local DP).
    pub achieved_eps: f64,
    /// Noise multiplier (largest node value for local DP).
    pub sigma: f64,
    pub steps: u64,
    pub q: f64,
    /// Nodes whose expected batch `q·n_l` is below one row.
    pub small_nodes: usize,
}

fn accountant(sigma: f64, q: f64, steps: u64, delta: f64) -> Result<f64> {
    if sigma == 0.0 {
        Ok(f64::INFINITY)
    } else {
        rdp::epsilon_for(sigma, q, steps, delta)
    }
}

/// Codec for gradient sums; the bound leaves ample headroom over any
/// clipped sum plus noise.
pub fn gradient_codec(k: usize) -> Result<FixedPointCodec> {
    let c = FixedPointCodec::new(secagg::DEFAULT_FRAC_BITS, (1u64 << 30) as f64)?;
    c.check_capacity(k)?;
    Ok(c)
}

/// Trains one model. `nodes` holds one example set per node; the central
/// scenario pools them.
pub fn train(nodes: &[Examples], cfg: &TrainConfig, seed_value: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dim = nodes
        .iter()
        .find_map(|e| e.xs.first().map(Vec::len))
        .ok_or_else(|| Error::InsufficientData("no training rows".into()))?;
    let n: usize = nodes.iter().map(Examples::len).sum();
    let q = cfg.rate(n);
    let steps = cfg.steps(n);
    let expected = q * n as f64;
    let mut model = Model::zeros(dim);
    let node_rng = |l: u64, s: u64| seed::rng(seed::derive(seed_value, &[stream::TRAIN, l, s]));

    match cfg.scenario {
        Scenario::Central => {
            let pooled;
            let data = if nodes.len() == 1 {
                &nodes[0]
            } else {
                pooled = Examples::concat(nodes);
                &pooled
            };
            let sigma = cfg.noise_multiplier(q, steps)?;
            let mut rng = node_rng(0, 0);
            for _ in 0..steps {
                let batch = poisson_sample(n, q, &mut rng);
                model = dp_sgd_step(&model, data, &batch, cfg, sigma, expected, &mut rng)?;
            }
            Ok(TrainOutcome {
                model,
                achieved_eps: accountant(sigma, q, steps, cfg.delta)?,
                sigma,
                steps,
                q,
                small_nodes: 0,
            })
        }
        Scenario::Local => {
            let k = nodes.len();
            let mut sigmas = Vec::with_capacity(k);
            let mut rates = Vec::with_capacity(k);
            for e in nodes {
                let ql = (cfg.max_batch as f64 / (k * e.len().max(1)) as f64).min(1.0);
                sigmas.push(cfg.noise_multiplier(ql, steps)?);
                rates.push(ql);
            }
            let mut rngs: Vec<_> = (0..k as u64).map(|l| node_rng(l, 0)).collect();
            for _ in 0..steps {
                let mut g = vec![0.0; dim + 1];
                for (l, e) in nodes.iter().enumerate() {
                    let batch = poisson_sample(e.len(), q, &mut rngs[l]);
                    let mut gl = clipped_sum(&model, e, &batch, cfg.clip_norm)?;
                    add_noise(&mut gl, sigmas[l] * cfg.clip_norm, &mut rngs[l]);
                    g.iter_mut().zip(&gl).for_each(|(a, b)| *a += b);
                }
                g.iter_mut().for_each(|x| *x /= expected);
                model.step(&g, cfg.lr);
            }
            let mut worst = 0f64;
            for (s, ql) in sigmas.iter().zip(&rates) {
                worst = worst.max(accountant(*s, *ql, steps, cfg.delta)?);
            }
            Ok(TrainOutcome {
                model,
                achieved_eps: worst,
                sigma: sigmas.iter().cloned().fold(0.0, f64::max),
                steps,
                q,
                small_nodes: nodes.iter().filter(|e| q * (e.len() as f64) < 1.0).count(),
            })
        }
        Scenario::Secure => {
            let k = nodes.len();
            let sigma = cfg.noise_multiplier(q, steps)?;
            let node_sd = sigma * cfg.clip_norm / (k as f64).sqrt();
            let codec = gradient_codec(k)?;
            let root = secagg::root_secret(seed::derive(seed_value, &[stream::MASK]));
            let mut rngs: Vec<_> = (0..k as u64).map(|l| node_rng(l, 0)).collect();
            for step in 0..steps {
                let mut inputs = Vec::with_capacity(k);
                for (l, e) in nodes.iter().enumerate() {
                    let batch = poisson_sample(e.len(), q, &mut rngs[l]);
                    let mut gl = clipped_sum(&model, e, &batch, cfg.clip_norm)?;
                    add_noise(&mut gl, node_sd, &mut rngs[l]);
                    inputs.push(gl);
                }
                let out = if cfg.full_masking {
                    secagg::secure_sum(&inputs, &codec, &root, step)?
                } else {
                    secagg::quantized_sum(&inputs, &codec)?
                };
                let g: Vec<f64> = out.sum.iter().map(|x| x / expected).collect();
                model.step(&g, cfg.lr);
            }
            Ok(TrainOutcome {
                model,
                achieved_eps: accountant(sigma, q, steps, cfg.delta)?,
                sigma,
                steps,
                q,
                small_nodes: nodes.iter().filter(|e| q * (e.len() as f64) < 1.0).count(),
            })
        }
    }
}

/// Non-private reference: same sampling and step count, no noise. Clipping
/// follows `cfg.baseline_clip`.
pub fn train_baseline(nodes: &[Examples], cfg: &TrainConfig, seed_value: u64) -> Result<Model> {
    let data = Examples::concat(nodes);
    if data.is_empty() {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    let n = data.len();
    let q = cfg.rate(n);
    let plain = TrainConfig {
        clip_norm: if cfg.baseline_clip { cfg.clip_norm } else { f64::INFINITY },
        ..cfg.clone()
    };
    let mut rng = seed::rng(seed::derive(seed_value, &[stream::BASELINE]));
    let mut model = Model::zeros(data.xs[0].len());
    for _ in 0..cfg.steps(n) {
        let batch = poisson_sample(n, q, &mut rng);
        model = dp_sgd_step(&model, &data, &batch, &plain, 0.0, q * n as f64, &mut rng)?;
    }
    Ok(model)
}

/// Fraction of correct predictions at threshold 0.5.
pub fn evaluate(m: &Model, test: &Examples) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let correct = test
        .xs
        .iter()
        .zip(&test.ys)
        .filter(|(x, &y)| (m.predict_proba(x) >= 0.5) == (y >= 0.5))
        .count();
    correct as f64 / test.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy(n: usize, seed_value: u64) -> Examples {
        let mut rng = seed::rng(seed_value);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = (i % 2) as f64;
            let x0: f64 = rng.random::<f64>() * 0.5 + 0.5 * y;
            let x1: f64 = rng.random();
            xs.push(vec![x0, x1]);
            ys.push(y);
        }
        Examples::new(xs, ys).unwrap()
    }

    #[test]
    fn gradient_at_zero_model() {
        let m = Model::zeros(3);
        let x = [0.3, -1.0, 2.0];
        let g1 = grad_logloss(&m, &x, 1.0).unwrap();
        assert_eq!(g1, vec![-0.15, 0.5, -1.0, -0.5]);
        let g0 = grad_logloss(&m, &x, 0.0).unwrap();
        let sum: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| a + b).collect();
        assert_eq!(sum, vec![0.0; 4]);
        assert!(grad_logloss(&m, &[f64::NAN, 0.0, 0.0], 1.0).is_err());
        assert!(grad_logloss(&m, &[0.0], 1.0).is_err());
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        clip_in_place(&mut g, 1.0);
        assert_relative_eq!(l2_norm(&g), 1.0, epsilon = 1e-12);
        let mut small = vec![0.1, 0.2];
        clip_in_place(&mut small, 1.0);
        assert_eq!(small, vec![0.1, 0.2]);
    }

    #[test]
    fn noiseless_unclipped_step_is_plain_sgd() {
        let d = toy(20, 1);
        let m = Model {
            weights: vec![0.4, -0.2],
            bias: 0.1,
        };
        let cfg = TrainConfig {
            clip_norm: f64::INFINITY,
            ..Default::default()
        };
        let idx: Vec<usize> = (0..20).collect();
        let out = dp_sgd_step(&m, &d, &idx, &cfg, 0.0, 20.0, &mut seed::rng(0)).unwrap();
        let mut expect = m.clone();
        let mut g = vec![0.0; 3];
        for i in 0..20 {
            let gi = grad_logloss(&m, &d.xs[i], d.ys[i]).unwrap();
            g.iter_mut().zip(&gi).for_each(|(a, b)| *a += b / 20.0);
        }
        expect.step(&g, 0.01);
        for (a, b) in out.weights.iter().zip(&expect.weights) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn step_is_reproducible() {
        let d = toy(50, 2);
        let cfg = TrainConfig::default();
        let idx: Vec<usize> = (0..50).step_by(3).collect();
        let m = Model::zeros(2);
        let a = dp_sgd_step(&m, &d, &idx, &cfg, 1.3, 17.0, &mut seed::rng(9)).unwrap();
        let b = dp_sgd_step(&m, &d, &idx, &cfg, 1.3, 17.0, &mut seed::rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_basics() {
        let d = toy(40, 3);
        assert_eq!(evaluate(&Model::zeros(2), &d), 0.5);
        let sep = Examples::new(vec![vec![0.0], vec![0.2], vec![0.8], vec![1.0]], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let m = Model {
            weights: vec![10.0],
            bias: -5.0,
        };
        assert_eq!(evaluate(&m, &sep), 1.0);
    }

    #[test]
    fn export_round_trip() {
        let m = Model {
            weights: vec![0.25, -1.5e-7],
            bias: 3.0,
        };
        let names = vec!["age".to_string(), "sex=1".to_string()];
        let text = m.to_text(&names).unwrap();
        assert_eq!(text.lines().count(), 3);
        let (n2, m2) = Model::from_text(&text).unwrap();
        assert_eq!((n2, m2), (names, m));
    }

    #[test]
    fn secure_matches_central_accounting() {
        let d = toy(400, 4);
        let parts: Vec<Examples> = (0..4)
            .map(|l| Examples {
                xs: d.xs[l * 100..(l + 1) * 100].to_vec(),
                ys: d.ys[l * 100..(l + 1) * 100].to_vec(),
            })
            .collect();
        let mut cfg = TrainConfig {
            target_eps: 2.0,
            min_steps: 50,
            epochs: 1,
            ..Default::default()
        };
        let c = train(std::slice::from_ref(&d), &cfg, 1).unwrap();
        cfg.scenario = Scenario::Secure;
        let s = train(&parts, &cfg, 1).unwrap();
        assert!((c.achieved_eps - s.achieved_eps).abs() < 1e-3);
        assert!(c.achieved_eps <= 2.0);
        cfg.full_masking = false;
        let s2 = train(&parts, &cfg, 1).unwrap();
        assert_eq!(s.model, s2.model);
    }

    #[test]
    fn learns_separable_toy() {
        let d = toy(400, 5);
        let cfg = TrainConfig {
            target_eps: f64::INFINITY,
            min_steps: 20_000,
            ..Default::default()
        };
        let out = train(std::slice::from_ref(&d), &cfg, 0).unwrap();
        assert!(evaluate(&out.model, &d) > 0.85);
        let base = train_baseline(std::slice::from_ref(&d), &cfg, 0).unwrap();
        assert!(evaluate(&base, &d) > 0.85);
    }
}
