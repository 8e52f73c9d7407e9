//! Calibrated noise mechanisms and the sensitivity calculus for bounded
//! means and variances under the replace-one neighbouring relation.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed;
use crate::stats::{ln_norm_cdf, norm_cdf};

/// `(ε, δ, Δ)` for one release. `epsilon = +∞` means no noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub sensitivity: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, sensitivity: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Parameter(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Parameter(format!("delta must lie in [0, 1), got {delta}")));
        }
        if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
            return Err(Error::Parameter(format!(
                "sensitivity must be finite and >= 0, got {sensitivity}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            sensitivity,
        })
    }

    pub fn with_sensitivity(self, sensitivity: f64) -> Result<Self> {
        Self::new(self.epsilon, self.delta, sensitivity)
    }

    /// Equal split of the budget over `parts` releases (basic composition).
    pub fn split(self, parts: usize) -> Result<Self> {
        let k = parts as f64;
        Self::new(self.epsilon / k, self.delta / k, self.sensitivity)
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.epsilon, self.delta, self.sensitivity).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    Laplace,
    Gaussian,
    LogNormal,
}

/// A single reproducible draw: identical `(mechanism, params, seed, input)`
/// always yield the identical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSample {
    pub value: f64,
    pub mechanism: Mechanism,
    pub params: PrivacyParams,
    pub seed: u64,
}

impl NoiseSample {
    pub fn draw(mechanism: Mechanism, x: f64, params: PrivacyParams, seed: u64) -> Result<Self> {
        let mut rng = seed::rng(seed);
        let value = match mechanism {
            Mechanism::Laplace => laplace(x, &params, &mut rng)?,
            Mechanism::Gaussian => gaussian(x, &params, &mut rng)?,
            Mechanism::LogNormal => lognormal_variance(x, &params, &mut rng)?,
        };
        Ok(Self {
            value,
            mechanism,
            params,
            seed,
        })
    }
}

/// Standard Laplace(0, 1) draw by inversion.
fn standard_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // u in (-1/2, 1/2); reject the endpoint that would give ln(0).
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let a = 1.0 - 2.0 * u.abs();
        if a > 0.0 {
            return -u.signum() * a.ln();
        }
    }
}

/// `x + Laplace(Δ/ε)`.
pub fn laplace<R: Rng + ?Sized>(x: f64, p: &PrivacyParams, rng: &mut R) -> Result<f64> {
    p.validate()?;
    let scale = p.sensitivity / p.epsilon;
    if scale == 0.0 {
        return Ok(x);
    }
    Ok(x + scale * standard_laplace(rng))
}

/// Privacy loss `δ(σ)` of the Gaussian mechanism at unit sensitivity
/// (exact characterisation of the Gaussian mechanism's (ε, δ) profile).
fn gaussian_delta(eps: f64, s: f64) -> f64 {
    let a = 0.5 / s - eps * s;
    let b = -0.5 / s - eps * s;
    norm_cdf(a) - (eps + ln_norm_cdf(b)).exp()
}

/// Smallest σ/Δ with `gaussian_delta(eps, σ/Δ) <= delta`, by bisection in log space.
fn analytic_gaussian_unit_sigma(eps: f64, delta: f64) -> f64 {
    let (mut lo, mut hi) = (1e-8f64, 1.0f64);
    while gaussian_delta(eps, hi) > delta {
        hi *= 2.0;
    }
    while gaussian_delta(eps, lo) <= delta {
        lo *= 0.5;
        if lo < 1e-300 {
            return lo;
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if gaussian_delta(eps, mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    hi
}

/// Noise scale of the Gaussian mechanism.
///
/// For `ε ≤ 1` the classic `Δ·sqrt(2 ln(1.25/δ))/ε`; above that the classic
/// bound no longer holds and the exact (analytic) calibration is used.
pub fn gaussian_sigma(p: &PrivacyParams) -> Result<f64> {
    p.validate()?;
    if p.delta <= 0.0 {
        return Err(Error::Parameter(
            "the Gaussian mechanism requires delta > 0".into(),
        ));
    }
    if p.sensitivity == 0.0 || p.epsilon.is_infinite() {
        return Ok(0.0);
    }
    if p.epsilon <= 1.0 {
        Ok(p.sensitivity * (2.0 * (1.25 / p.delta).ln()).sqrt() / p.epsilon)
    } else {
        Ok(p.sensitivity * analytic_gaussian_unit_sigma(p.epsilon, p.delta))
    }
}

/// `x + N(0, σ²)`.
pub fn gaussian<R: Rng + ?Sized>(x: f64, p: &PrivacyParams, rng: &mut R) -> Result<f64> {
    let sigma = gaussian_sigma(p)?;
    Ok(GaussianMechanism { sigma }.release(x, rng))
}

/// Log-normal release of a variance: `v · exp(g)`, `g ~ N(−σ²/2, σ²)`.
/// `p.sensitivity` is the sensitivity of `ln v`.
pub fn lognormal_variance<R: Rng + ?Sized>(v: f64, p: &PrivacyParams, rng: &mut R) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("variance must be > 0, got {v}")));
    }
    let sigma = gaussian_sigma(p)?;
    Ok(LogNormalMechanism { sigma }.release(v, rng))
}

/// Gaussian mechanism with its σ computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMechanism {
    pub sigma: f64,
}

impl GaussianMechanism {
    pub fn new(p: &PrivacyParams) -> Result<Self> {
        Ok(Self {
            sigma: gaussian_sigma(p)?,
        })
    }

    pub fn release<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return x;
        }
        let z: f64 = rng.sample(StandardNormal);
        x + self.sigma * z
    }
}

/// Log-normal mechanism with its σ computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalMechanism {
    pub sigma: f64,
}

impl LogNormalMechanism {
    pub fn new(p: &PrivacyParams) -> Result<Self> {
        Ok(Self {
            sigma: gaussian_sigma(p)?,
        })
    }

    pub fn release<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return v;
        }
        let z: f64 = rng.sample(StandardNormal);
        let g = -0.5 * self.sigma * self.sigma + self.sigma * z;
        v * g.exp()
    }
}

fn check_bounds(bounds: (f64, f64)) -> Result<f64> {
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("invalid bounds [{lo}, {hi}]")));
    }
    Ok(hi - lo)
}

/// Replace-one sensitivity of the mean of `n` values in `[lo, hi]`.
pub fn mean_sensitivity(bounds: (f64, f64), n: usize) -> Result<f64> {
    let range = check_bounds(bounds)?;
    if n == 0 {
        return Err(Error::Domain("mean sensitivity needs n >= 1".into()));
    }
    Ok(range / n as f64)
}

/// Replace-one sensitivity of the population variance of `n` values in
/// `[lo, hi]`: `(hi − lo)² (n − 1) / n²`.
pub fn variance_sensitivity(bounds: (f64, f64), n: usize) -> Result<f64> {
    let range = check_bounds(bounds)?;
    if n < 2 {
        return Err(Error::Domain("variance sensitivity needs n >= 2".into()));
    }
    let n = n as f64;
    Ok(range * range * (n - 1.0) / (n * n))
}

/// Sensitivity of `ln max(var, v_floor)`: variance sensitivity over the floor.
pub fn logvar_sensitivity(bounds: (f64, f64), n: usize, v_floor: f64) -> Result<f64> {
    if !(v_floor > 0.0 && v_floor.is_finite()) {
        return Err(Error::Domain(format!("v_floor must be > 0, got {v_floor}")));
    }
    let range = check_bounds(bounds)?;
    let dvar = variance_sensitivity(bounds, n)?;
    Ok((range * range / n as f64).min(dvar) / v_floor)
}

/// Exact bound on `|ln v − ln v'|` for neighbouring variances floored at
/// `v_floor`: `ln(1 + Δvar / v_floor)`. Never larger than
/// [`logvar_sensitivity`].
pub fn logvar_sensitivity_log1p(bounds: (f64, f64), n: usize, v_floor: f64) -> Result<f64> {
    Ok(logvar_sensitivity(bounds, n, v_floor)?.ln_1p())
}
