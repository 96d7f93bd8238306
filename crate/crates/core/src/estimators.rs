//! Plug-in, Miller–Madow and jackknife estimators from observed counts.

use crate::error::{Error, Result};
use crate::indices::{power_g, power_g_prime, IndexSpec};
use crate::normal;
use crate::series::CompensatedSum;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_LEVEL: f64 = 0.95;

/// Observed letter counts: `(symbol, count)` pairs sorted by symbol, every
/// count positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    entries: Vec<(u64, u64)>,
    n: u64,
}

impl SampleCounts {
    /// Build from arbitrary `(symbol, count)` pairs. Repeated symbols are
    /// merged and zero counts dropped.
    pub fn new<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Result<Self> {
        let mut entries: Vec<(u64, u64)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        entries.sort_unstable_by_key(|&(s, _)| s);
        entries.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        let n = entries.iter().map(|&(_, c)| c).sum();
        if n == 0 {
            return Err(Error::SampleTooSmall { min: 1, got: 0 });
        }
        Ok(SampleCounts { entries, n })
    }

    /// Counts for symbols `1..=len` from a dense vector.
    pub fn from_dense(counts: &[u64]) -> Result<Self> {
        Self::new(counts.iter().enumerate().map(|(i, &c)| (i as u64 + 1, c)))
    }

    /// Tally raw draws. The slice is sorted in place.
    pub fn from_symbols(draws: &mut [u64]) -> Self {
        draws.sort_unstable();
        let mut entries: Vec<(u64, u64)> = Vec::new();
        for &s in draws.iter() {
            match entries.last_mut() {
                Some((last, c)) if *last == s => *c += 1,
                _ => entries.push((s, 1)),
            }
        }
        SampleCounts {
            entries,
            n: draws.len() as u64,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }

    /// Number of distinct observed symbols.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn count_of(&self, symbol: u64) -> u64 {
        self.entries
            .binary_search_by_key(&symbol, |&(s, _)| s)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(_, c)| c)
    }

    fn count_vec(&self) -> Vec<u64> {
        self.counts().collect()
    }
}

/// Estimator tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PluginPower,
    PluginShannon,
    MillerMadow,
    Jackknife,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::PluginPower => "plugin-power",
            Method::PluginShannon => "plugin-shannon",
            Method::MillerMadow => "miller-madow",
            Method::Jackknife => "jackknife",
        })
    }
}

/// Which estimator to apply to an index: the plug-in, or one of the two
/// entropy bias corrections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Plugin,
    #[serde(alias = "mm")]
    MillerMadow,
    #[serde(alias = "jk")]
    Jackknife,
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plugin" => Ok(EstimatorKind::Plugin),
            "mm" | "miller-madow" => Ok(EstimatorKind::MillerMadow),
            "jk" | "jackknife" => Ok(EstimatorKind::Jackknife),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator `{other}` (expected plugin, mm or jk)"
            ))),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Plugin => "plugin",
            EstimatorKind::MillerMadow => "mm",
            EstimatorKind::Jackknife => "jk",
        })
    }
}

/// A point estimate with its normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub method: Method,
    pub value: f64,
    pub sigma_hat: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub n: u64,
    pub degenerate: bool,
    /// Jackknife bias term B̂ = Ĥ_JK − Ĥ (jackknife only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jackknife_bias: Option<f64>,
}

impl Estimate {
    fn new(method: Method, value: f64, sigma_hat: f64, n: u64) -> Self {
        let est = Estimate {
            method,
            value,
            sigma_hat,
            std_error: sigma_hat / (n as f64).sqrt(),
            ci_low: value,
            ci_high: value,
            level: DEFAULT_LEVEL,
            n,
            degenerate: sigma_hat == 0.0,
            jackknife_bias: None,
        };
        confidence_interval(est, DEFAULT_LEVEL).expect("default level is valid")
    }
}

/// Two-sided normal interval `value ± z σ̂/√n`. Degenerate estimates get a
/// point interval.
pub fn confidence_interval(mut est: Estimate, level: f64) -> Result<Estimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    est.level = level;
    est.std_error = est.sigma_hat / (est.n as f64).sqrt();
    if est.degenerate {
        est.ci_low = est.value;
        est.ci_high = est.value;
        return Ok(est);
    }
    let half = normal::quantile(0.5 * (1.0 + level)) * est.std_error;
    est.ci_low = est.value - half;
    est.ci_high = est.value + half;
    Ok(est)
}

fn all_equal(counts: &[u64]) -> bool {
    counts.windows(2).all(|w| w[0] == w[1])
}

/// Σ p̂ (f(p̂) − m)² over observed symbols, zero when all counts match.
fn plugin_sigma<F: Fn(f64) -> f64>(counts: &[u64], n: u64, f: F) -> f64 {
    if all_equal(counts) {
        return 0.0;
    }
    let nf = n as f64;
    let vals: Vec<(f64, f64)> = counts
        .iter()
        .map(|&y| {
            let p = y as f64 / nf;
            (p, f(p))
        })
        .collect();
    let mean = vals.iter().map(|&(p, v)| p * v).collect::<CompensatedSum>().value();
    let var = vals
        .iter()
        .map(|&(p, v)| p * (v - mean).powi(2))
        .collect::<CompensatedSum>()
        .value();
    var.max(0.0).sqrt()
}

/// Σ g(y/n) for a power index.
pub fn power_value(counts: &[u64], n: u64, mu: f64, nu: f64) -> f64 {
    let nf = n as f64;
    counts
        .iter()
        .map(|&y| power_g(y as f64 / nf, mu, nu))
        .collect::<CompensatedSum>()
        .value()
}

/// Plug-in Shannon entropy −Σ (y/n) ln(y/n).
pub fn shannon_value(counts: &[u64], n: u64) -> f64 {
    if counts.len() <= 1 {
        return 0.0;
    }
    let nf = n as f64;
    counts
        .iter()
        .map(|&y| {
            let p = y as f64 / nf;
            -p * p.ln()
        })
        .collect::<CompensatedSum>()
        .value()
}

/// Miller–Madow value: plug-in plus (m̂ − 1)/(2n).
pub fn miller_madow_value(counts: &[u64], n: u64) -> f64 {
    shannon_value(counts, n) + (counts.len() as f64 - 1.0) / (2.0 * n as f64)
}

fn xlnx(y: u64) -> f64 {
    if y <= 1 {
        0.0
    } else {
        let x = y as f64;
        x * x.ln()
    }
}

/// Jackknife value and bias term `(Ĥ_JK, B̂_JK)`.
///
/// Deleting one draw of a symbol with count `y` gives the same leave-one-out
/// entropy for all `y` such draws, so the sum over the `n` deletions collapses
/// to one term per distinct symbol.
pub fn jackknife_parts(counts: &[u64], n: u64) -> (f64, f64) {
    let h = shannon_value(counts, n);
    if counts.len() <= 1 || n < 2 {
        return (h, 0.0);
    }
    let a: f64 = counts.iter().map(|&y| xlnx(y)).collect::<CompensatedSum>().value();
    let m = (n - 1) as f64;
    let ln_m = m.ln();
    let loo_sum = counts
        .iter()
        .map(|&y| {
            let a_minus = a - xlnx(y) + xlnx(y - 1);
            y as f64 * (ln_m - a_minus / m)
        })
        .collect::<CompensatedSum>()
        .value();
    let nf = n as f64;
    let bias = (m * h - m / nf * loo_sum).max(0.0);
    (h + bias, bias)
}

pub fn jackknife_value(counts: &[u64], n: u64) -> f64 {
    jackknife_parts(counts, n).0
}

/// Plug-in estimate of a power index.
pub fn plugin_index(counts: &SampleCounts, spec: &IndexSpec) -> Result<Estimate> {
    spec.validate()?;
    let (mu, nu) = match *spec {
        IndexSpec::Shannon => return Ok(shannon_plugin(counts)),
        IndexSpec::Power { mu, nu } => (mu, nu),
    };
    let ys = counts.count_vec();
    let n = counts.n();
    let value = power_value(&ys, n, mu, nu);
    let sigma = plugin_sigma(&ys, n, |p| power_g_prime(p, mu, nu));
    Ok(Estimate::new(Method::PluginPower, value, sigma, n))
}

/// Plug-in Shannon entropy with σ̂² = Σ p̂ (ln p̂)² − Ĥ².
pub fn shannon_plugin(counts: &SampleCounts) -> Estimate {
    let ys = counts.count_vec();
    let n = counts.n();
    let value = shannon_value(&ys, n);
    let sigma = plugin_sigma(&ys, n, |p| -p.ln());
    Estimate::new(Method::PluginShannon, value, sigma, n)
}

pub fn miller_madow(counts: &SampleCounts) -> Estimate {
    let base = shannon_plugin(counts);
    let value = base.value + (counts.distinct() as f64 - 1.0) / (2.0 * counts.n() as f64);
    Estimate::new(Method::MillerMadow, value, base.sigma_hat, counts.n())
}

pub fn jackknife(counts: &SampleCounts) -> Result<Estimate> {
    if counts.n() < 2 {
        return Err(Error::SampleTooSmall { min: 2, got: counts.n() });
    }
    let base = shannon_plugin(counts);
    let (value, bias) = jackknife_parts(&counts.count_vec(), counts.n());
    let mut est = Estimate::new(Method::Jackknife, value, base.sigma_hat, counts.n());
    est.jackknife_bias = Some(bias);
    Ok(est)
}

/// Apply `kind` to `index`. Bias corrections only exist for Shannon.
pub fn estimate(counts: &SampleCounts, index: &IndexSpec, kind: EstimatorKind, level: f64) -> Result<Estimate> {
    let est = match (kind, index) {
        (EstimatorKind::Plugin, _) => plugin_index(counts, index)?,
        (EstimatorKind::MillerMadow, IndexSpec::Shannon) => miller_madow(counts),
        (EstimatorKind::Jackknife, IndexSpec::Shannon) => jackknife(counts)?,
        (kind, index) => {
            return Err(Error::Unsupported(format!(
                "estimator {kind} is defined for shannon only, not {index}"
            )))
        }
    };
    confidence_interval(est, level)
}

/// Value-only estimator used by the oracle and the simulation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub index: IndexSpec,
    pub kind: EstimatorKind,
}

impl Estimator {
    pub fn new(index: IndexSpec, kind: EstimatorKind) -> Result<Self> {
        index.validate()?;
        if kind != EstimatorKind::Plugin && !index.is_shannon() {
            return Err(Error::Unsupported(format!(
                "estimator {kind} is defined for shannon only, not {index}"
            )));
        }
        Ok(Estimator { index, kind })
    }

    /// Estimate from positive counts summing to `n`.
    pub fn value(&self, counts: &[u64], n: u64) -> f64 {
        match (self.kind, self.index) {
            (EstimatorKind::Plugin, IndexSpec::Power { mu, nu }) => power_value(counts, n, mu, nu),
            (EstimatorKind::Plugin, IndexSpec::Shannon) => shannon_value(counts, n),
            (EstimatorKind::MillerMadow, _) => miller_madow_value(counts, n),
            (EstimatorKind::Jackknife, _) => jackknife_value(counts, n),
        }
    }

    /// Plug-in σ̂ from positive counts.
    pub fn sigma_hat(&self, counts: &[u64], n: u64) -> f64 {
        match self.index {
            IndexSpec::Power { mu, nu } => plugin_sigma(counts, n, |p| power_g_prime(p, mu, nu)),
            IndexSpec::Shannon => plugin_sigma(counts, n, |p| -p.ln()),
        }
    }
}
