//! Closed-form expected maximum against direct numerical integration.

use adds_core::stochastics::{expected_max, SortingModel};

fn density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `E[max(X, t)] = t + sigma * int_{z0}^inf (z - z0) phi(z) dz` with
/// `z0 = (t - mu) / sigma`; the integrand is negligible beyond 14.
fn by_quadrature(mu: f64, sigma: f64, t: f64) -> f64 {
    let z0 = (t - mu) / sigma;
    let f = |z: f64| (z - z0) * density(z);
    let (a, b) = (z0.max(-14.0), 14.0);
    if a >= b {
        return t;
    }
    // unit panels, so a panel starting at the zero of the integrand cannot
    // pass the error test on flat samples
    let panels = (b - a).ceil() as usize;
    let tail: f64 = (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64, (a + i as f64 + 1.0).min(b));
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            adaptive(&f, lo, hi, fa, fm, fb, simpson(lo, hi, fa, fm, fb), 1e-13, 50)
        })
        .sum();
    t + sigma * tail
}

#[test]
fn closed_form_matches_quadrature() {
    let mut worst: f64 = 0.0;
    for sigma in [0.1, 1.0, 5.0, 10.0, 15.0] {
        for mu in (1..=50).step_by(7) {
            for t in (0..=100).step_by(3) {
                let (mu, t) = (f64::from(mu), f64::from(t));
                let model = SortingModel::new(mu, sigma).unwrap();
                let err = (expected_max(&model, t).unwrap() - by_quadrature(mu, sigma, t)).abs();
                worst = worst.max(err);
            }
        }
    }
    assert!(worst < 1e-6, "worst deviation {worst}");
}

#[test]
fn deterministic_sorting_is_exact() {
    for mu in 1..=50 {
        for t in 0..=100 {
            let (mu, t) = (f64::from(mu), f64::from(t));
            let model = SortingModel::deterministic(mu).unwrap();
            assert_eq!(expected_max(&model, t).unwrap(), mu.max(t));
        }
    }
}
