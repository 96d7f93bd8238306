//! Standard normal CDF and quantile.

use std::f64::consts::{PI, SQRT_2};

/// Φ(x), accurate in both tails.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Φ⁻¹(q) for q in (0, 1). Returns ±∞ at the endpoints.
///
/// A rational starting point is polished by Halley steps on the lower tail,
/// where Φ keeps full relative precision.
pub fn quantile(q: f64) -> f64 {
    if q.is_nan() {
        return f64::NAN;
    }
    if q <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if q >= 1.0 {
        return f64::INFINITY;
    }
    if q > 0.5 {
        return -quantile(1.0 - q);
    }
    if q == 0.5 {
        return 0.0;
    }
    // Abramowitz–Stegun 26.2.23, |error| < 4.5e-4
    let t = (-2.0 * q.ln()).sqrt();
    let mut x = -(t - (2.515_517 + 0.802_853 * t + 0.010_328 * t * t)
        / (1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t));
    for _ in 0..4 {
        let r = (cdf(x) - q) / density(x);
        if !r.is_finite() {
            break;
        }
        let step = r / (1.0 + 0.5 * x * r);
        x -= step;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    x
}
