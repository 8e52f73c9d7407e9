//! Critical-ε estimation for the two tasks.

use std::fmt;

use crate::stats::welch_test;

/// Smallest privacy parameter at which the disclosed result is still useful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Critical {
    Eps(f64),
    /// No grid point qualifies; carries the largest grid value.
    Above(f64),
    /// The plaintext result is not significant, so nothing to preserve.
    NotApplicable,
}

impl Critical {
    /// Value for ordering comparisons: `Above` maps to +∞.
    pub fn value(&self) -> Option<f64> {
        match *self {
            Critical::Eps(e) => Some(e),
            Critical::Above(_) => Some(f64::INFINITY),
            Critical::NotApplicable => None,
        }
    }
}

/// Two significant digits, trailing zeros dropped.
pub fn sig2(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (1 - mag).max(0) as usize;
    let scale = 10f64.powi(1 - mag);
    let r = (x * scale).round() / scale;
    format!("{r:.decimals$}")
}

impl fmt::Display for Critical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Critical::Eps(e) => f.write_str(&sig2(*e)),
            Critical::Above(m) => write!(f, ">{}", sig2(*m)),
            Critical::NotApplicable => f.write_str("n/a"),
        }
    }
}

/// Band of the disclosed t at one grid point; `None` for a failed cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TStatPoint {
    pub eps: f64,
    pub band: Option<(f64, f64)>,
}

/// Critical ε of a t-stat sweep (points sorted by ε).
///
/// The margin at each point is the band edge nearest zero, taken on the side
/// of the plaintext t, minus the critical value. The answer is the first
/// grid point with positive margin, interpolated linearly in log ε against
/// the previous point.
pub fn critical_eps_tstat(points: &[TStatPoint], truth: f64, t_crit: f64) -> Critical {
    if !(truth.abs() > t_crit) {
        return Critical::NotApplicable;
    }
    let Some(max) = points.last().map(|p| p.eps) else {
        return Critical::NotApplicable;
    };
    let margin = |p: &TStatPoint| match p.band {
        Some((lo, _)) if truth > 0.0 => lo - t_crit,
        Some((_, hi)) => -hi - t_crit,
        None => f64::NEG_INFINITY,
    };
    for (i, p) in points.iter().enumerate() {
        let g = margin(p);
        if g > 0.0 {
            if i == 0 {
                return Critical::Eps(p.eps);
            }
            let prev = &points[i - 1];
            let g0 = margin(prev);
            if !g0.is_finite() {
                return Critical::Eps(p.eps);
            }
            let (l0, l1) = (prev.eps.ln(), p.eps.ln());
            let f = (0.0 - g0) / (g - g0);
            return Critical::Eps((l0 + f * (l1 - l0)).exp());
        }
    }
    Critical::Above(max)
}

/// Accuracies of one training cell; `None` for a failed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPoint<'a> {
    pub eps: f64,
    pub accuracies: Option<&'a [f64]>,
}

/// Two-sided Welch p-value of `a` against `b`, with the degenerate
/// zero-variance cases resolved by comparing means.
pub fn welch_p(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = (crate::stats::mean(a), crate::stats::sample_var(a));
    let (mb, vb) = (crate::stats::mean(b), crate::stats::sample_var(b));
    if va == 0.0 && vb == 0.0 {
        return if ma == mb { 1.0 } else { 0.0 };
    }
    welch_test(ma, va, a.len() as f64, mb, vb, b.len() as f64).2
}

/// Critical ε of a training sweep (points sorted by ε): the smallest grid ε
/// from which on the DP accuracies are never significantly different from
/// the baseline.
pub fn critical_eps_training(points: &[TrainPoint<'_>], baseline: &[f64], alpha: f64) -> Critical {
    let Some(max) = points.last().map(|p| p.eps) else {
        return Critical::NotApplicable;
    };
    if baseline.len() < 2 {
        return Critical::NotApplicable;
    }
    let mut answer = None;
    for p in points.iter().rev() {
        let keeps = match p.accuracies {
            Some(a) if a.len() >= 2 => welch_p(a, baseline) >= alpha,
            _ => false,
        };
        if !keeps {
            break;
        }
        answer = Some(p.eps);
    }
    match answer {
        Some(e) => Critical::Eps(e),
        None => Critical::Above(max),
    }
}
