use approx::assert_relative_eq;
use rand::Rng;

use fedsandbox::rdp::{calibrate_sigma, epsilon_for, rdp_subsampled_gaussian};
use fedsandbox::seed;

/// RDP of the Poisson-subsampled Gaussian at integer order `alpha` by
/// quadrature: `ln E_{z~N(0,σ²)}[(1 − q + q·exp((2z − 1)/(2σ²)))^α] / (α − 1)`.
/// The integrand is evaluated in log space on a Simpson grid.
pub fn rdp_quadrature(q: f64, sigma: f64, alpha: u32) -> f64 {
    let a = alpha as f64;
    let s2 = sigma * sigma;
    // the mass of the integrand sits near z ≈ α for small σ, so widen to cover it
    let lo = -40.0 * sigma;
    let hi = 40.0 * sigma + a + 1.0;
    let n = 200_000usize;
    let h = (hi - lo) / n as f64;
    let log_f = |z: f64| {
        let ln_ratio = {
            let t = (2.0 * z - 1.0) / (2.0 * s2);
            // ln(1 − q + q e^t)
            let (x, y) = ((1.0 - q).ln(), q.ln() + t);
            let m = x.max(y);
            m + ((x - m).exp() + (y - m).exp()).ln()
        };
        a * ln_ratio - z * z / (2.0 * s2) - 0.5 * (2.0 * std::f64::consts::PI * s2).ln()
    };
    let logs: Vec<f64> = (0..=n).map(|i| log_f(lo + i as f64 * h)).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * (l - m).exp()
        })
        .sum();
    (m + (sum * h / 3.0).ln()) / (a - 1.0)
}

#[test]
fn matches_quadrature_at_random_points() {
    let mut rng = seed::rng(21);
    for _ in 0..20 {
        let q = rng.random_range(0.001..0.5);
        let sigma = rng.random_range(0.6..5.0);
        let alpha = rng.random_range(2..=32u32);
        let got = rdp_subsampled_gaussian(q, sigma, alpha).unwrap();
        let want = rdp_quadrature(q, sigma, alpha);
        assert_relative_eq!(got, want, max_relative = 0.01);
    }
}

#[test]
fn full_batch_is_the_gaussian_closed_form() {
    for (sigma, alpha) in [(1.0, 2), (0.7, 5), (3.0, 64)] {
        let got = rdp_subsampled_gaussian(1.0, sigma, alpha).unwrap();
        assert_eq!(got, alpha as f64 / (2.0 * sigma * sigma));
    }
}

#[test]
fn calibration_hits_target() {
    for (eps, q, steps) in [(1.0, 0.01, 1000u64), (8.0, 0.1, 500), (0.5, 1.0, 100)] {
        let s = calibrate_sigma(eps, 1e-5, q, steps).unwrap();
        let got = epsilon_for(s, q, steps, 1e-5).unwrap();
        assert!(got <= eps && got > 0.99 * eps, "{eps}: {got}");
    }
}
