//! Exact sampling laws of estimators on small finite alphabets.
//!
//! Every count vector `(y_1, …, y_k)` with `Σ y_i = n` is enumerated and
//! weighted by its multinomial probability, computed in log space.

use crate::error::{Error, Result};
use crate::estimators::{jackknife_parts, Estimator};
use crate::indices::{self, IndexSpec};
use crate::normal;
use crate::series::CompensatedSum;
use crate::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};


pub const MAX_K: usize = 6;
pub const MAX_N: u64 = 30;
/// Values closer than this are merged into one atom.
pub const MERGE_TOLERANCE: f64 = 1e-12;

fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// A finitely supported law: `(value, probability)` pairs, values strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicLaw {
    pub atoms: Vec<(f64, f64)>,
}

impl AtomicLaw {
    /// Sort and merge raw `(value, weight)` pairs. Zero weights are dropped.
    pub fn from_weighted(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|&(_, w)| w > 0.0);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut group_start = f64::NAN;
        let mut acc = CompensatedSum::default();
        for (v, w) in raw {
            if !atoms.is_empty() && v - group_start <= MERGE_TOLERANCE {
                acc.add(w);
                atoms.last_mut().expect("nonempty").1 = acc.value();
            } else {
                group_start = v;
                acc = CompensatedSum::default();
                acc.add(w);
                atoms.push((v, w));
            }
        }
        AtomicLaw { atoms }
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|&(_, p)| p).collect::<CompensatedSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| v * p).collect::<CompensatedSum>().value()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .map(|&(v, p)| p * (v - m).powi(2))
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }
}

fn check_guard(probs: &[f64], n: u64) -> Result<()> {
    if probs.len() > MAX_K || n > MAX_N {
        return Err(Error::EnumerationGuard {
            k: probs.len(),
            n,
            max_k: MAX_K,
            max_n: MAX_N,
        });
    }
    if n == 0 {
        return Err(Error::SampleTooSmall { min: 1, got: 0 });
    }
    // reuse the finite-law validation
    Distribution::finite(probs.to_vec())?;
    Ok(())
}

/// Visit every composition of `n` into `k` parts with the first part fixed.
fn for_each_composition<F: FnMut(&[u64])>(first: u64, k: usize, n: u64, mut visit: F) {
    let mut y = vec![0u64; k];
    y[0] = first;
    if k == 1 {
        if first == n {
            visit(&y);
        }
        return;
    }
    fn rec<F: FnMut(&[u64])>(y: &mut [u64], pos: usize, left: u64, visit: &mut F) {
        if pos == y.len() - 1 {
            y[pos] = left;
            visit(y);
            return;
        }
        for v in 0..=left {
            y[pos] = v;
            rec(y, pos + 1, left - v, visit);
        }
    }
    rec(&mut y, 1, n - first, &mut visit);
}

/// Exact law of `stat(positive counts, n)` under multinomial sampling.
pub fn law_of<F>(probs: &[f64], n: u64, stat: F) -> Result<AtomicLaw>
where
    F: Fn(&[u64], u64) -> f64 + Sync,
{
    check_guard(probs, n)?;
    let k = probs.len();
    let ln_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let ln_n_fact = ln_factorial(n);
    let firsts: Vec<u64> = if k == 1 { vec![n] } else { (0..=n).collect() };
    let chunks: Vec<Vec<(f64, f64)>> = firsts
        .into_par_iter()
        .map(|first| {
            let mut out = Vec::new();
            let mut positive = Vec::with_capacity(k);
            for_each_composition(first, k, n, |y| {
                let mut ln_w = ln_n_fact;
                for (i, &c) in y.iter().enumerate() {
                    if c > 0 {
                        ln_w += c as f64 * ln_p[i] - ln_factorial(c);
                    }
                }
                let w = ln_w.exp();
                if w > 0.0 {
                    positive.clear();
                    positive.extend(y.iter().copied().filter(|&c| c > 0));
                    out.push((stat(&positive, n), w));
                }
            });
            out
        })
        .collect();
    Ok(AtomicLaw::from_weighted(chunks.into_iter().flatten().collect()))
}

/// Exact law of an estimator for `n` draws from `probs`.
pub fn exact_estimator_law(probs: &[f64], n: u64, estimator: &Estimator) -> Result<AtomicLaw> {
    law_of(probs, n, |y, n| estimator.value(y, n))
}

/// sup_x |F(x) − Φ(x)| for the law standardized as `(X − center)/scale`.
pub fn exact_kolmogorov(law: &AtomicLaw, center: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
    }
    let mut below = 0.0;
    let mut acc = CompensatedSum::default();
    let mut d: f64 = 0.0;
    for &(v, p) in &law.atoms {
        let phi = normal::cdf((v - center) / scale);
        acc.add(p);
        let at = acc.value().min(1.0);
        d = d.max((below - phi).abs()).max((at - phi).abs());
        below = at;
    }
    Ok(d.min(1.0))
}

/// Population value the estimator targets: H for entropy, θ for power indices.
pub fn target_value(probs: &[f64], index: &IndexSpec) -> Result<f64> {
    let dist = Distribution::finite(probs.to_vec())?;
    indices::theta(&dist, index)
}

/// Kolmogorov distance of `√n(θ̂ − θ)/σ` from the standard normal, using the
/// population σ of the index.
pub fn exact_standardized_kolmogorov(probs: &[f64], n: u64, estimator: &Estimator) -> Result<f64> {
    let dist = Distribution::finite(probs.to_vec())?;
    let truth = indices::theta(&dist, &estimator.index)?;
    let var = indices::sigma_sq(&dist, &estimator.index)?;
    if var.degenerate {
        return Err(Error::DegenerateVariance(format!(
            "{} has zero asymptotic variance on {probs:?}",
            estimator.index
        )));
    }
    let law = exact_estimator_law(probs, n, estimator)?;
    exact_kolmogorov(&law, truth, var.sigma() / (n as f64).sqrt())
}

/// Both sides of `E|p̂ − p|^{β+1} ≤ 4 p n^{−β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluate the absolute-moment bound by an exact binomial sum.
pub fn verify_moment_bound(p: f64, n: u64, beta: f64) -> Result<MomentBound> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    if n == 0 {
        return Err(Error::SampleTooSmall { min: 1, got: 0 });
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {beta}")));
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let ln_n_fact = ln_factorial(n);
    let nf = n as f64;
    let lhs = (0..=n)
        .map(|j| {
            let ln_w = ln_n_fact - ln_factorial(j) - ln_factorial(n - j) + j as f64 * ln_p + (n - j) as f64 * ln_q;
            ln_w.exp() * (j as f64 / nf - p).abs().powf(beta + 1.0)
        })
        .collect::<CompensatedSum>()
        .value();
    let rhs = 4.0 * p * nf.powf(-beta);
    Ok(MomentBound {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Exact bias `E θ̂_n − θ`.
pub fn exact_bias(probs: &[f64], n: u64, estimator: &Estimator) -> Result<f64> {
    let law = exact_estimator_law(probs, n, estimator)?;
    Ok(law.mean() - target_value(probs, &estimator.index)?)
}

/// Exact check of `E B̂_JK = (n−1)(B_n − B_{n−1})` for the plug-in entropy
/// bias `B_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JackknifeIdentity {
    pub n: u64,
    pub bias_n: f64,
    pub bias_n_minus_1: f64,
    pub expected_bias_term: f64,
    pub rhs: f64,
}

impl JackknifeIdentity {
    pub fn discrepancy(&self) -> f64 {
        (self.expected_bias_term - self.rhs).abs()
    }
}

pub fn jackknife_identity(probs: &[f64], n: u64) -> Result<JackknifeIdentity> {
    if n < 2 {
        return Err(Error::SampleTooSmall { min: 2, got: n });
    }
    let plugin = Estimator::new(IndexSpec::Shannon, crate::EstimatorKind::Plugin)?;
    let bias_n = exact_bias(probs, n, &plugin)?;
    let bias_n_minus_1 = exact_bias(probs, n - 1, &plugin)?;
    let expected_bias_term = law_of(probs, n, |y, n| jackknife_parts(y, n).1)?.mean();
    Ok(JackknifeIdentity {
        n,
        bias_n,
        bias_n_minus_1,
        expected_bias_term,
        rhs: (n - 1) as f64 * (bias_n - bias_n_minus_1),
    })
}
