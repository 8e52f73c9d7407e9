//! Rényi-DP accountant for the Poisson-subsampled Gaussian mechanism.
//!
//! At integer order α one step has RDP
//!
//! ```text
//! ε(α) = 1/(α−1) · ln Σ_{k=0..α} C(α,k) (1−q)^(α−k) q^k exp((k²−k)/(2σ²))
//! ```
//!
//! evaluated here in log space. Composition is additive in the number of
//! steps and the conversion to (ε, δ) takes the best order.

use crate::error::{Error, Result};

pub const SIGMA_MIN: f64 = 0.3;
pub const SIGMA_MAX: f64 = 1e4;

/// `{2, …, 64} ∪ {128, 256}`.
pub fn default_orders() -> Vec<u32> {
    (2..=64).chain([128, 256]).collect()
}

fn ln_binomial(n: u32, k: u32, ln_fact: &[f64]) -> f64 {
    ln_fact[n as usize] - ln_fact[k as usize] - ln_fact[(n - k) as usize]
}

fn ln_factorials(max: u32) -> Vec<f64> {
    let mut v = Vec::with_capacity(max as usize + 1);
    v.push(0.0);
    let mut acc = 0.0;
    for i in 1..=max {
        acc += (i as f64).ln();
        v.push(acc);
    }
    v
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn check_step(q: f64, sigma: f64, alpha: u32) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Parameter(format!("sampling rate must lie in (0, 1], got {q}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("noise multiplier must be > 0, got {sigma}")));
    }
    if alpha < 2 {
        return Err(Error::Parameter(format!("order must be an integer > 1, got {alpha}")));
    }
    Ok(())
}

fn rdp_step_unchecked(q: f64, sigma: f64, alpha: u32, ln_fact: &[f64]) -> f64 {
    let a = alpha as f64;
    if q == 1.0 {
        return a / (2.0 * sigma * sigma);
    }
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let terms: Vec<f64> = (0..=alpha)
        .map(|k| {
            let kf = k as f64;
            ln_binomial(alpha, k, ln_fact) + (a - kf) * l1q + kf * lq + (kf * kf - kf) * inv2s2
        })
        .collect();
    (log_sum_exp(&terms) / (a - 1.0)).max(0.0)
}

/// RDP of one Poisson-subsampled Gaussian step at integer order `alpha`.
pub fn rdp_subsampled_gaussian(q: f64, sigma: f64, alpha: u32) -> Result<f64> {
    check_step(q, sigma, alpha)?;
    Ok(rdp_step_unchecked(q, sigma, alpha, &ln_factorials(alpha)))
}

/// RDP values across orders after `steps` compositions.
#[derive(Debug, Clone, PartialEq)]
pub struct RdpCurve {
    pub orders: Vec<u32>,
    pub values: Vec<f64>,
    pub steps: u64,
    pub q: f64,
    pub sigma: f64,
}

impl RdpCurve {
    /// One step of the subsampled Gaussian at every order.
    pub fn subsampled_gaussian(q: f64, sigma: f64, orders: &[u32]) -> Result<Self> {
        let max = orders.iter().copied().max().unwrap_or(2);
        let ln_fact = ln_factorials(max);
        let mut values = Vec::with_capacity(orders.len());
        for &a in orders {
            check_step(q, sigma, a)?;
            values.push(rdp_step_unchecked(q, sigma, a, &ln_fact));
        }
        Ok(Self {
            orders: orders.to_vec(),
            values,
            steps: 1,
            q,
            sigma,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// `steps`-fold composition of `curve` (RDP adds up).
pub fn compose(curve: &RdpCurve, steps: u64) -> RdpCurve {
    RdpCurve {
        orders: curve.orders.clone(),
        values: curve.values.iter().map(|v| v * steps as f64).collect(),
        steps: curve.steps * steps,
        q: curve.q,
        sigma: curve.sigma,
    }
}

/// `min_α ε(α) + ln(1/δ)/(α−1)`.
pub fn to_eps_delta(curve: &RdpCurve, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if curve.is_empty() {
        return Err(Error::Domain("empty RDP curve".into()));
    }
    let l = (1.0 / delta).ln();
    Ok(curve
        .orders
        .iter()
        .zip(&curve.values)
        .map(|(&a, &v)| v + l / (a as f64 - 1.0))
        .fold(f64::INFINITY, f64::min))
}

/// (ε, δ) spent by `steps` subsampled Gaussian steps.
pub fn epsilon_for(sigma: f64, q: f64, steps: u64, delta: f64) -> Result<f64> {
    if steps == 0 {
        return Ok(0.0);
    }
    let one = RdpCurve::subsampled_gaussian(q, sigma, &default_orders())?;
    to_eps_delta(&compose(&one, steps), delta)
}

/// Smallest noise multiplier in `[SIGMA_MIN, SIGMA_MAX]` whose composed
/// privacy loss stays within `target_eps`.
pub fn calibrate_sigma(target_eps: f64, delta: f64, q: f64, steps: u64) -> Result<f64> {
    if !(target_eps > 0.0) {
        return Err(Error::Parameter(format!("target epsilon must be > 0, got {target_eps}")));
    }
    let eps = |s: f64| epsilon_for(s, q, steps, delta);
    if eps(SIGMA_MAX)? > target_eps {
        return Err(Error::Calibration(format!(
            "epsilon {target_eps} unreachable with sigma <= {SIGMA_MAX} (q = {q}, steps = {steps})"
        )));
    }
    if eps(SIGMA_MIN)? <= target_eps {
        return Ok(SIGMA_MIN);
    }
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if eps(mid)? > target_eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-3 && eps(hi)? >= 0.999 * target_eps {
            break;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unsubsampled_closed_form() {
        assert_eq!(rdp_subsampled_gaussian(1.0, 2.0, 8).unwrap(), 1.0);
        for a in [2u32, 5, 64, 256] {
            assert_eq!(
                rdp_subsampled_gaussian(1.0, 1.7, a).unwrap(),
                a as f64 / (2.0 * 1.7 * 1.7)
            );
        }
    }

    #[test]
    fn subsampling_never_hurts() {
        let full = rdp_subsampled_gaussian(1.0, 1.0, 2).unwrap();
        assert_eq!(full, 1.0);
        assert!(rdp_subsampled_gaussian(0.01, 1.0, 2).unwrap() <= full);
    }

    #[test]
    fn parameter_errors() {
        assert!(rdp_subsampled_gaussian(0.0, 1.0, 2).is_err());
        assert!(rdp_subsampled_gaussian(1.5, 1.0, 2).is_err());
        assert!(rdp_subsampled_gaussian(0.5, 0.0, 2).is_err());
        assert!(rdp_subsampled_gaussian(0.5, 1.0, 1).is_err());
    }

    #[test]
    fn composition() {
        let one = RdpCurve::subsampled_gaussian(0.1, 1.5, &default_orders()).unwrap();
        assert!(compose(&one, 0).values.iter().all(|&v| v == 0.0));
        let two = compose(&one, 2);
        for (a, b) in one.values.iter().zip(&two.values) {
            assert_eq!(*b, 2.0 * a);
        }
        let c = RdpCurve::subsampled_gaussian(1.0, 4.0, &[16]).unwrap();
        assert_eq!(compose(&c, 1000).values[0], 500.0);
    }

    #[test]
    fn conversion_single_order() {
        let c = RdpCurve {
            orders: vec![2],
            values: vec![1.0],
            steps: 1,
            q: 1.0,
            sigma: 1.0,
        };
        assert_relative_eq!(to_eps_delta(&c, (-1.0f64).exp()).unwrap(), 2.0, epsilon = 1e-12);
        let empty = RdpCurve {
            orders: vec![],
            values: vec![],
            steps: 1,
            q: 1.0,
            sigma: 1.0,
        };
        assert!(to_eps_delta(&empty, 1e-5).is_err());
    }

    #[test]
    fn more_orders_never_increase_eps() {
        let few = RdpCurve::subsampled_gaussian(0.05, 1.1, &[2, 4, 8]).unwrap();
        let many = RdpCurve::subsampled_gaussian(0.05, 1.1, &default_orders()).unwrap();
        let f = to_eps_delta(&compose(&few, 100), 1e-5).unwrap();
        let m = to_eps_delta(&compose(&many, 100), 1e-5).unwrap();
        assert!(m <= f);
    }

    #[test]
    fn agrees_with_classic_gaussian_calibration() {
        // σ from the classic Gaussian calibration at ε = 1, δ = 1e-5.
        let eps = epsilon_for(4.84, 1.0, 1, 1e-5).unwrap();
        assert!(eps <= 1.05, "{eps}");
    }

    #[test]
    fn calibration_round_trip_and_monotone() {
        let q = 0.05;
        let steps = 400;
        let mut prev = f64::INFINITY;
        for target in [0.1, 0.5, 1.0, 4.0, 16.0] {
            let s = calibrate_sigma(target, 1e-5, q, steps).unwrap();
            let e = epsilon_for(s, q, steps, 1e-5).unwrap();
            assert!(e <= target && e >= 0.999 * target, "target {target}: got {e}");
            assert!(s < prev);
            prev = s;
        }
        assert!(calibrate_sigma(1e-9, 1e-5, 1.0, 1000).is_err());
        assert_eq!(calibrate_sigma(1e6, 1e-5, 0.1, 10).unwrap(), SIGMA_MIN);
    }

    #[test]
    fn decreasing_in_delta() {
        let one = RdpCurve::subsampled_gaussian(0.02, 1.2, &default_orders()).unwrap();
        let c = compose(&one, 500);
        let e1 = to_eps_delta(&c, 1e-6).unwrap();
        let e2 = to_eps_delta(&c, 1e-5).unwrap();
        assert!(e2 < e1);
    }
}
