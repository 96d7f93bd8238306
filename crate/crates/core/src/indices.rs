//! Diversity indices `θ(P) = Σ g(p_i)` and their asymptotic variances.
//!
//! Two kinds are supported: the power family `g(x) = x^μ (1−x)^ν` (Simpson is
//! `μ = 2, ν = 0`) and Shannon entropy `g(x) = −x ln x`. The power family
//! carries a Hölder exponent β for `g′` and a rate exponent γ derived from it;
//! Shannon has neither since its `g′` is unbounded near zero.

use crate::dist::{Distribution, Family};
use crate::error::{Error, Result};
use crate::series::CompensatedSum;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A diversity index, serialized as `{"kind":"power","mu":2,"nu":0}` or
/// `{"kind":"shannon"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IndexSpec {
    Power { mu: f64, nu: f64 },
    Shannon,
}

/// Population variance of the influence function together with a flag for
/// the exactly-zero case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variance {
    pub sigma_sq: f64,
    pub degenerate: bool,
}

impl Variance {
    fn new(sigma_sq: f64) -> Self {
        let sigma_sq = sigma_sq.max(0.0);
        Variance {
            sigma_sq,
            degenerate: sigma_sq == 0.0,
        }
    }

    fn zero() -> Self {
        Variance {
            sigma_sq: 0.0,
            degenerate: true,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }
}

/// Hölder exponent of `g′` for `g(x) = x^μ (1−x)^ν`.
///
/// Defined for `μ ≥ 1` and `ν ∈ {0} ∪ [1, ∞)`; `None` elsewhere.
pub fn holder_beta(mu: f64, nu: f64) -> Option<f64> {
    if !(mu.is_finite() && nu.is_finite()) || mu < 1.0 || !(nu == 0.0 || nu >= 1.0) {
        return None;
    }
    let beta = match (mu > 1.0, nu > 1.0) {
        (true, true) => (mu - 1.0).min(nu - 1.0).min(1.0),
        (true, false) => (mu - 1.0).min(1.0),
        (false, true) => (nu - 1.0).min(1.0),
        (false, false) => 1.0,
    };
    (beta > 0.0).then_some(beta)
}

/// Rate exponent: `β/2` for `β ≤ 1/2`, else `β − 1/2`.
pub fn gamma_of(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {beta}")));
    }
    Ok(if beta <= 0.5 { beta / 2.0 } else { beta - 0.5 })
}

impl IndexSpec {
    pub const SIMPSON: IndexSpec = IndexSpec::Power { mu: 2.0, nu: 0.0 };

    pub fn power(mu: f64, nu: f64) -> Result<Self> {
        let spec = IndexSpec::Power { mu, nu };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            IndexSpec::Power { mu, nu } => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
                }
                if !(nu.is_finite() && nu >= 0.0) {
                    return Err(Error::InvalidParameter(format!("nu must be nonnegative, got {nu}")));
                }
                Ok(())
            }
            IndexSpec::Shannon => Ok(()),
        }
    }

    pub fn is_shannon(&self) -> bool {
        matches!(self, IndexSpec::Shannon)
    }

    /// g(x), with g(0) = 0.
    pub fn g(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            IndexSpec::Power { mu, nu } => power_g(x, mu, nu),
            IndexSpec::Shannon => -x * x.ln(),
        }
    }

    /// g′(x). For Shannon this is `−ln x − 1`, infinite at 0.
    pub fn g_prime(&self, x: f64) -> f64 {
        match *self {
            IndexSpec::Power { mu, nu } => power_g_prime(x, mu, nu),
            IndexSpec::Shannon => -x.ln() - 1.0,
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            IndexSpec::Power { mu, nu } => holder_beta(mu, nu),
            IndexSpec::Shannon => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        self.beta().and_then(|b| gamma_of(b).ok())
    }
}

impl fmt::Display for IndexSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexSpec::Power { mu, nu } => write!(f, "power:{mu},{nu}"),
            IndexSpec::Shannon => f.write_str("shannon"),
        }
    }
}

impl FromStr for IndexSpec {
    type Err = Error;

    /// Accepts `shannon`, `simpson` or `power:μ,ν`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidParameter(format!("index `{s}`: {reason}"));
        match s.trim() {
            "shannon" => Ok(IndexSpec::Shannon),
            "simpson" => Ok(IndexSpec::SIMPSON),
            other => {
                let params = other
                    .strip_prefix("power:")
                    .ok_or_else(|| bad("expected shannon, simpson or power:MU,NU"))?;
                let (mu, nu) = params.split_once(',').ok_or_else(|| bad("expected power:MU,NU"))?;
                let mu: f64 = mu.trim().parse().map_err(|_| bad("mu is not a number"))?;
                let nu: f64 = nu.trim().parse().map_err(|_| bad("nu is not a number"))?;
                IndexSpec::power(mu, nu)
            }
        }
    }
}

pub(crate) fn power_g(x: f64, mu: f64, nu: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let head = x.powf(mu);
    if nu == 0.0 {
        head
    } else {
        head * (1.0 - x).powf(nu)
    }
}

pub(crate) fn power_g_prime(x: f64, mu: f64, nu: f64) -> f64 {
    let first = if mu == 1.0 { 1.0 } else { mu * x.powf(mu - 1.0) };
    let first = if nu == 0.0 { first } else { first * (1.0 - x).powf(nu) };
    if nu == 0.0 {
        return first;
    }
    let second = if nu == 1.0 { 1.0 } else { (1.0 - x).powf(nu - 1.0) };
    first - nu * x.powf(mu) * second
}

/// ln of `p^a (1−p)^b` from `ln p`.
fn ln_power_term(lp: f64, a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a * lp
    } else {
        a * lp + b * (-lp.exp_m1()).ln()
    }
}

/// Signed Σ p^a(1−p)^b: the caller checks convergence.
fn power_sum(dist: &Distribution, a: f64, b: f64) -> Result<f64> {
    dist.log_series(1, |lp| ln_power_term(lp, a, b))
}

fn require_power_convergence(dist: &Distribution, a: f64) -> Result<()> {
    if dist.power_sum_converges(a) {
        Ok(())
    } else {
        Err(Error::Divergent(format!("sum of p^{a} diverges for {:?}", dist.family())))
    }
}

/// θ(P) = Σ g(p_i). Shannon is delegated to [`shannon_entropy`].
pub fn theta(dist: &Distribution, spec: &IndexSpec) -> Result<f64> {
    spec.validate()?;
    let (mu, nu) = match *spec {
        IndexSpec::Shannon => return shannon_entropy(dist),
        IndexSpec::Power { mu, nu } => (mu, nu),
    };
    if let Some(p) = dist.finite_probs() {
        return Ok(p.iter().map(|&x| power_g(x, mu, nu)).collect::<CompensatedSum>().value());
    }
    require_power_convergence(dist, mu)?;
    power_sum(dist, mu, nu)
}

/// Variance of `g′(p(X))` for a power index within the Hölder table.
pub fn sigma_sq(dist: &Distribution, spec: &IndexSpec) -> Result<Variance> {
    spec.validate()?;
    let (mu, nu) = match *spec {
        IndexSpec::Shannon => return shannon_sigma_sq(dist),
        IndexSpec::Power { mu, nu } => (mu, nu),
    };
    if holder_beta(mu, nu).is_none() {
        return Err(Error::Unsupported(format!(
            "{spec} has an unbounded or non-Hölder derivative; its variance is not defined here"
        )));
    }
    let gp = |x: f64| power_g_prime(x, mu, nu);
    if let Some(p) = dist.finite_probs() {
        return Ok(centered_variance(p, gp));
    }
    require_power_convergence(dist, mu)?;
    // mean of g′(p(X)) = μ S(μ, ν) − ν S(μ+1, ν−1)
    let mut mean = mu * power_sum(dist, mu, nu)?;
    if nu > 0.0 {
        mean -= nu * power_sum(dist, mu + 1.0, nu - 1.0)?;
    }
    let var = dist.log_series(1, |lp| {
        let d = (gp(lp.exp()) - mean).abs();
        let v = lp + 2.0 * d.ln();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    })?;
    Ok(Variance::new(var))
}

/// Σ p (f(p) − m)² with m = Σ p f(p), exactly zero when f is constant on the
/// support.
fn centered_variance<F: Fn(f64) -> f64>(probs: &[f64], f: F) -> Variance {
    let support: Vec<(f64, f64)> = probs.iter().filter(|&&x| x > 0.0).map(|&x| (x, f(x))).collect();
    let first = support[0].1;
    if support.iter().all(|&(_, v)| v == first) {
        return Variance::zero();
    }
    let mean = support.iter().map(|&(p, v)| p * v).collect::<CompensatedSum>().value();
    let var = support
        .iter()
        .map(|&(p, v)| p * (v - mean).powi(2))
        .collect::<CompensatedSum>()
        .value();
    Variance::new(var)
}

fn geometric_ratio(dist: &Distribution) -> Option<(f64, f64)> {
    match dist.family() {
        Family::Geometric { lambda } => Some((*lambda, (-lambda).exp())),
        _ => None,
    }
}

/// H = −Σ p_i ln p_i.
pub fn shannon_entropy(dist: &Distribution) -> Result<f64> {
    if let Some(p) = dist.finite_probs() {
        return Ok(p
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| -x * x.ln())
            .collect::<CompensatedSum>()
            .value());
    }
    if let Some((lambda, _)) = geometric_ratio(dist) {
        // −ln C + λ E[X], E[X] = 1/(1 − e^{-λ})
        return Ok(lambda / -(-lambda).exp_m1() - dist.norm_constant().ln());
    }
    dist.tail_entropy(1)
}

/// Var(ln p(X)). Degenerate (exactly zero) for uniform finite laws.
pub fn shannon_sigma_sq(dist: &Distribution) -> Result<Variance> {
    if let Some(p) = dist.finite_probs() {
        return Ok(centered_variance(p, |x| -x.ln()));
    }
    if let Some((lambda, r)) = geometric_ratio(dist) {
        // λ² Var(X) with Var(X) = r/(1 − r)²
        let one_minus_r = -(-lambda).exp_m1();
        return Ok(Variance::new(lambda * lambda * r / (one_minus_r * one_minus_r)));
    }
    let h = shannon_entropy(dist)?;
    let var = dist.log_series(1, |lp| {
        let v = lp + 2.0 * (-lp - h).abs().ln();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    })?;
    Ok(Variance::new(var))
}
