//! Certified summation of slowly decaying positive series.
//!
//! Every infinite family exposes `ln p(x)` as a smooth function of `ln x`, and
//! every functional we need (mass, power sums, entropy-type sums) is a sum of
//! nonnegative terms `exp(φ(ln i))`. The sum is split as
//!
//! ```text
//! Σ_{i ≥ k} f(i) = Σ_{k ≤ i < N} f(i) + ∫_N^∞ f + f(N)/2 − f'(N)/12 + R_N
//! ```
//!
//! with the integral evaluated by exp-sinh quadrature after the substitution
//! `x = N·e^u`, so the whole computation stays in log space and never
//! underflows on heavy tails. `N` is doubled until the estimated remainder
//! `|f'''(N)|/720` falls below the requested relative tolerance.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

/// First switch point from direct summation to the asymptotic tail.
const MIN_SWITCH: u64 = 64;
/// Past this many direct terms the sum is declared uncertifiable.
const MAX_SWITCH: u64 = 1 << 24;

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `∫_0^∞ g(w) dw` by the exp-sinh rule. Returns the estimate and the
/// difference between the last two refinement levels.
pub(crate) fn exp_sinh<G: Fn(f64) -> f64>(g: G) -> (f64, f64) {
    const T_MAX: f64 = 6.5;
    let node = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let w = s.exp();
        let v = g(w) * w * FRAC_PI_2 * t.cosh();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    let mut h = 0.5;
    let k_max = (T_MAX / h) as i64;
    let mut acc: CompensatedSum = (-k_max..=k_max).map(|k| node(k as f64 * h)).collect();
    let mut estimate = h * acc.value();
    let mut delta = f64::INFINITY;
    for level in 1..=9 {
        h *= 0.5;
        let k_max = (T_MAX / h) as i64;
        let mut k = -k_max + if k_max % 2 == 0 { 1 } else { 0 };
        while k <= k_max {
            acc.add(node(k as f64 * h));
            k += 2;
        }
        let refined = h * acc.value();
        delta = (refined - estimate).abs();
        estimate = refined;
        if level >= 3 && delta <= 1e-15 * estimate.abs() {
            break;
        }
    }
    (estimate, delta)
}

/// Five-point central derivative.
fn derivative<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Euler–Maclaurin tail `Σ_{i ≥ n} exp(φ(ln i))` and an error estimate.
fn asymptotic_tail<P: Fn(f64) -> f64>(phi: &P, n: u64) -> (f64, f64) {
    let ln_n = (n as f64).ln();
    let f_n = phi(ln_n).exp();
    if f_n == 0.0 {
        return (0.0, 0.0);
    }
    // log-log slope of f at N; f'(N) = f(N)·slope/N
    let slope = derivative(phi, ln_n, 1e-3);
    let f_prime = f_n * slope / n as f64;

    let rate = -(slope + 1.0);
    let rate = if rate.is_finite() && rate > 1e-6 { rate } else { 1.0 };
    let (integral, quad_err) = exp_sinh(|w| {
        let u = w / rate;
        (phi(ln_n + u) + ln_n + u).exp() / rate
    });

    let s = (-slope).max(0.0);
    let nf = n as f64;
    let em_err = f_prime.abs() / 12.0 * (s + 1.0) * (s + 2.0) / (60.0 * nf * nf);
    (integral + f_n / 2.0 - f_prime / 12.0, em_err + quad_err)
}

/// `Σ_{i ≥ start} exp(φ(ln i))` to relative tolerance `tol`.
///
/// `phi` must be smooth and eventually decreasing on `[start, ∞)`, and the
/// caller is responsible for having checked convergence.
pub(crate) fn sum_from<P: Fn(f64) -> f64>(phi: P, start: u64, tol: f64) -> Result<f64> {
    let start = start.max(1);
    let mut n = start.max(MIN_SWITCH);
    let mut direct: CompensatedSum = (start..n).map(|i| phi((i as f64).ln()).exp()).collect();
    loop {
        let (tail, err) = asymptotic_tail(&phi, n);
        let total = direct.value() + tail;
        if !total.is_finite() {
            return Err(Error::Uncertified { tolerance: tol });
        }
        if err <= tol * total || total == 0.0 {
            return Ok(total);
        }
        if n >= MAX_SWITCH {
            return Err(Error::Uncertified { tolerance: tol });
        }
        for i in n..2 * n {
            direct.add(phi((i as f64).ln()).exp());
        }
        n *= 2;
    }
}
