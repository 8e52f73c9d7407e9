use approx::assert_relative_eq;
use statrs::distribution::{ContinuousCDF, Normal};

use fedsandbox::mech::{
    gaussian, gaussian_sigma, laplace, logvar_sensitivity, logvar_sensitivity_log1p, mean_sensitivity,
    variance_sensitivity, LogNormalMechanism, PrivacyParams,
};
use fedsandbox::seed;

/// Largest gap between the empirical CDF of `xs` and `cdf`.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

// critical value of the KS distance at α = 0.001
fn ks_crit(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

#[test]
fn laplace_matches_its_cdf() {
    let p = PrivacyParams::new(0.5, 0.0, 2.0).unwrap();
    let b = 4.0;
    let mut rng = seed::rng(11);
    let xs: Vec<f64> = (0..20_000).map(|_| laplace(3.0, &p, &mut rng).unwrap()).collect();
    let cdf = |x: f64| {
        let z = (x - 3.0) / b;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    };
    assert!(ks_distance(xs, cdf) < ks_crit(20_000));
}

#[test]
fn gaussian_matches_classic_sigma_below_one() {
    let p = PrivacyParams::new(0.8, 1e-5, 1.5).unwrap();
    let sigma = 1.5 * (2.0 * (1.25f64 / 1e-5).ln()).sqrt() / 0.8;
    assert_relative_eq!(gaussian_sigma(&p).unwrap(), sigma, max_relative = 1e-12);
    let norm = Normal::new(-2.0, sigma).unwrap();
    let mut rng = seed::rng(12);
    let xs: Vec<f64> = (0..20_000).map(|_| gaussian(-2.0, &p, &mut rng).unwrap()).collect();
    assert!(ks_distance(xs, |x| norm.cdf(x)) < ks_crit(20_000));
}

#[test]
fn analytic_gaussian_meets_delta_exactly() {
    // δ(σ) of the Gaussian mechanism at unit sensitivity, from statrs
    let n = Normal::new(0.0, 1.0).unwrap();
    for (eps, delta) in [(2.0, 1e-5), (5.0, 1e-6), (20.0, 1e-5)] {
        let s = gaussian_sigma(&PrivacyParams::new(eps, delta, 1.0).unwrap()).unwrap();
        let d = n.cdf(0.5 / s - eps * s) - eps.exp() * n.cdf(-0.5 / s - eps * s);
        assert_relative_eq!(d, delta, max_relative = 1e-6);
    }
}

#[test]
fn lognormal_mean_and_log_quantiles() {
    let mut rng = seed::rng(13);
    for sigma in [0.1, 0.5, 1.0] {
        let m = LogNormalMechanism { sigma };
        let xs: Vec<f64> = (0..200_000).map(|_| m.release(2.5, &mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean / 2.5 - 1.0).abs() < 0.01, "σ = {sigma}: mean {mean}");
        let logs: Vec<f64> = xs.iter().map(|x| (x / 2.5).ln()).collect();
        let norm = Normal::new(-0.5 * sigma * sigma, sigma).unwrap();
        assert!(ks_distance(logs, |x| norm.cdf(x)) < ks_crit(200_000));
    }
}

fn pop_var(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

#[test]
fn variance_sensitivity_is_tight_on_three_points() {
    // exhaustive replace-one search over a grid of 3-element datasets in [0, 1]
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let mut worst_var = 0f64;
    let mut worst_mean = 0f64;
    for &a in &grid {
        for &b in &grid {
            for &c in &grid {
                let d = [a, b, c];
                for &r in &grid {
                    let e = [r, b, c];
                    worst_var = worst_var.max((pop_var(&d) - pop_var(&e)).abs());
                    worst_mean = worst_mean.max(((a - r) / 3.0).abs());
                }
            }
        }
    }
    let bound = variance_sensitivity((0.0, 1.0), 3).unwrap();
    assert!(worst_var <= bound + 1e-12);
    assert_relative_eq!(worst_var, bound, max_relative = 1e-9);
    assert_relative_eq!(worst_mean, mean_sensitivity((0.0, 1.0), 3).unwrap(), max_relative = 1e-12);
}

#[test]
fn log_variance_bounds_cover_floored_neighbours() {
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let floor = 0.01;
    let mut worst = 0f64;
    for &a in &grid {
        for &b in &grid {
            for &c in &grid {
                for &r in &grid {
                    let v = pop_var(&[a, b, c]).max(floor);
                    let w = pop_var(&[r, b, c]).max(floor);
                    worst = worst.max((v.ln() - w.ln()).abs());
                }
            }
        }
    }
    let tight = logvar_sensitivity_log1p((0.0, 1.0), 3, floor).unwrap();
    let loose = logvar_sensitivity((0.0, 1.0), 3, floor).unwrap();
    assert!(worst <= tight + 1e-12 && tight <= loose);
}
