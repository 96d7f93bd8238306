//! Replicated experiments measuring the Kolmogorov distance between the
//! standardized estimator and the standard normal across sample sizes.
//!
//! Replicate `r` at sample size `n` draws from its own ChaCha8 stream, keyed
//! by the master seed with stream id `(n << 32) | r`, and results are
//! collected in replicate order. Reports are therefore bit-identical for any
//! worker count.

use crate::dist::{DistConfig, Distribution};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorKind};
use crate::indices::{self, IndexSpec};
use crate::normal;
use crate::series::CompensatedSum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MIN_REPLICATES: usize = 100;
/// Radius of the 95% DKW band is `DKW_CONSTANT / √m`.
pub const DKW_CONSTANT: f64 = 1.36;

/// Symbols below this index are tallied in a dense array.
const DENSE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardization {
    /// Divide by the population σ_n.
    #[default]
    TrueSigma,
    /// Divide by the plug-in σ̂ of each replicate.
    EstimatedSigma,
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Plugin
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub distribution: DistConfig,
    pub index: IndexSpec,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    pub n_grid: Vec<u64>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub standardization: Standardization,
    /// δ of the entropy tail conditions; only used to report the exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// ε of the jackknife moment condition; only used to report the exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Estimator> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidParameter(format!(
                "replicates must be at least {MIN_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("n_grid must be nonempty and strictly increasing".into()));
        }
        if self.n_grid[0] == 0 || self.n_grid.last().is_some_and(|&n| n > u32::MAX as u64) {
            return Err(Error::InvalidParameter("grid sizes must lie in [1, 2^32)".into()));
        }
        if self.estimator == EstimatorKind::Jackknife && self.n_grid[0] < 2 {
            return Err(Error::SampleTooSmall { min: 2, got: self.n_grid[0] });
        }
        if self.replicates > u32::MAX as usize {
            return Err(Error::InvalidParameter("too many replicates".into()));
        }
        Estimator::new(self.index, self.estimator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: u64,
    pub truth: f64,
    pub sigma: f64,
    /// sup_x |F̂_m(x) − Φ(x)|.
    pub d_n: f64,
    /// DKW radius 1.36/√m.
    pub band: f64,
    /// Mean and variance of the standardized statistic over finite replicates.
    pub mean: f64,
    pub variance: f64,
    /// Replicates whose σ̂ was zero (estimated-sigma mode only).
    pub degenerate_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_max: f64,
}

/// A reference exponent for `D_n` implied by the matching bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub config: ExperimentConfig,
    pub points: Vec<RatePoint>,
    /// Least-squares fit of ln D_n on ln n (needs ≥ 3 points).
    pub fit: Option<RateFit>,
    /// Some D_n is within 3 DKW radii of zero, so the fit mostly sees noise.
    pub noise_dominated: bool,
    /// D at the first grid point exceeds D at the last by more than both bands.
    pub decreasing_beyond_noise: bool,
    pub theoretical_exponents: Vec<Exponent>,
}

/// Exact sup-distance between the empirical CDF of `samples` and Φ.
pub fn kolmogorov_distance(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_kolmogorov(&sorted))
}

fn sorted_kolmogorov(sorted: &[f64]) -> f64 {
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let phi = normal::cdf(t);
            ((i + 1) as f64 / m - phi).abs().max((i as f64 / m - phi).abs())
        })
        .fold(0.0, f64::max)
}

/// OLS of ln D on ln n.
pub fn rate_fit(points: &[(u64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, d)| n == 0 || d.is_nan() || d <= 0.0) {
        return Err(Error::InvalidParameter("rate fit needs n >= 1 and D > 0".into()));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(n, d)| ((n as f64).ln(), d.ln())).collect();
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_max = xy
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        residual_max,
    })
}

/// Scratch space for tallying one replicate.
struct Tally {
    draws: Vec<u64>,
    dense: Vec<u64>,
    touched: Vec<usize>,
    counts: Vec<u64>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            draws: Vec::new(),
            dense: vec![0; DENSE],
            touched: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Positive counts of the current draws, in a deterministic order.
    fn count(&mut self) -> &[u64] {
        self.counts.clear();
        let mut overflow_at = 0;
        for i in 0..self.draws.len() {
            let s = self.draws[i] as usize;
            if s < DENSE {
                if self.dense[s] == 0 {
                    self.touched.push(s);
                }
                self.dense[s] += 1;
            } else {
                self.draws[overflow_at] = s as u64;
                overflow_at += 1;
            }
        }
        for &s in &self.touched {
            self.counts.push(self.dense[s]);
            self.dense[s] = 0;
        }
        self.touched.clear();
        let overflow = &mut self.draws[..overflow_at];
        overflow.sort_unstable();
        let mut i = 0;
        while i < overflow.len() {
            let mut j = i + 1;
            while j < overflow.len() && overflow[j] == overflow[i] {
                j += 1;
            }
            self.counts.push((j - i) as u64);
            i = j;
        }
        &self.counts
    }
}

fn replicate_rng(key: [u8; 32], n: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((n << 32) | replicate as u64);
    rng
}

/// Standardized statistics for every replicate at one grid point.
fn simulate_point(
    config: &ExperimentConfig,
    estimator: &Estimator,
    dist: &Distribution,
    n: u64,
    truth: f64,
    sigma: f64,
) -> Result<(Vec<f64>, usize)> {
    let key = ChaCha8Rng::seed_from_u64(config.master_seed).get_seed();
    let root_n = (n as f64).sqrt();
    let estimated = config.standardization == Standardization::EstimatedSigma;
    let results: Vec<Result<(f64, bool)>> = (0..config.replicates)
        .into_par_iter()
        .map_init(Tally::new, |tally, r| {
            let mut rng = replicate_rng(key, n, r);
            dist.sample_into(&mut rng, n, &mut tally.draws)?;
            let counts = tally.count();
            let value = estimator.value(counts, n);
            let diff = value - truth;
            if !estimated {
                return Ok((root_n * diff / sigma, false));
            }
            let s = estimator.sigma_hat(counts, n);
            if s > 0.0 {
                Ok((root_n * diff / s, false))
            } else if diff == 0.0 {
                Ok((0.0, true))
            } else {
                Ok((diff.signum() * f64::INFINITY, true))
            }
        })
        .collect();
    let mut stats = Vec::with_capacity(results.len());
    let mut degenerate = 0;
    for r in results {
        let (t, deg) = r?;
        stats.push(t);
        degenerate += deg as usize;
    }
    Ok((stats, degenerate))
}

fn summarize(stats: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = stats.iter().copied().filter(|t| t.is_finite()).collect();
    if finite.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = finite.len() as f64;
    let mean = finite.iter().copied().collect::<CompensatedSum>().value() / m;
    let var = finite
        .iter()
        .map(|t| (t - mean).powi(2))
        .collect::<CompensatedSum>()
        .value()
        / (m - 1.0).max(1.0);
    (mean, var)
}

fn theoretical_exponents(config: &ExperimentConfig, points: &[RatePoint]) -> Vec<Exponent> {
    let mut out = Vec::new();
    match config.index {
        IndexSpec::Power { .. } => {
            if let Some(gamma) = config.index.gamma() {
                if config.distribution.is_triangular() && points.len() >= 2 {
                    // C n^{-γ/2} σ_n^{-1/2}: fold the fitted decay of σ_n in
                    let sig: Vec<(u64, f64)> = points.iter().map(|p| (p.n, p.sigma)).collect();
                    let s = if sig.len() >= 3 {
                        rate_fit(&sig).map(|f| f.slope).ok()
                    } else {
                        let (a, b) = (sig[0], sig[sig.len() - 1]);
                        Some((b.1 / a.1).ln() / ((b.0 as f64) / (a.0 as f64)).ln())
                    };
                    if let Some(s) = s {
                        out.push(Exponent {
                            label: "-gamma/2 - (1/2) d ln(sigma_n)/d ln(n)".into(),
                            value: -gamma / 2.0 - 0.5 * s,
                        });
                    }
                } else {
                    out.push(Exponent {
                        label: "-gamma/2".into(),
                        value: -gamma / 2.0,
                    });
                }
            }
        }
        IndexSpec::Shannon => {
            if let Some(delta) = config.delta {
                out.push(Exponent {
                    label: "-delta/2".into(),
                    value: -delta / 2.0,
                });
            }
            if let (EstimatorKind::Jackknife, Some(eps)) = (config.estimator, config.epsilon) {
                out.push(Exponent {
                    label: "1/4 - epsilon/2".into(),
                    value: 0.25 - eps / 2.0,
                });
            }
        }
    }
    out
}

/// Run the experiment on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RateReport> {
    let estimator = config.validate()?;

    // truths first, so a degenerate grid point fails before any sampling
    let mut setups = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let dist = config.distribution.at(n)?;
        let truth = indices::theta(&dist, &config.index)?;
        let var = indices::sigma_sq(&dist, &config.index)?;
        if var.degenerate {
            return Err(Error::DegenerateVariance(format!(
                "{} has zero asymptotic variance at n = {n}",
                config.index
            )));
        }
        setups.push((n, dist, truth, var.sigma()));
    }

    let band = DKW_CONSTANT / (config.replicates as f64).sqrt();
    let mut points = Vec::with_capacity(setups.len());
    for (n, dist, truth, sigma) in setups {
        let (mut stats, degenerate_replicates) = simulate_point(config, &estimator, &dist, n, truth, sigma)?;
        let (mean, variance) = summarize(&stats);
        stats.sort_by(f64::total_cmp);
        points.push(RatePoint {
            n,
            truth,
            sigma,
            d_n: sorted_kolmogorov(&stats),
            band,
            mean,
            variance,
            degenerate_replicates,
        });
    }

    let pairs: Vec<(u64, f64)> = points.iter().map(|p| (p.n, p.d_n)).collect();
    let fit = rate_fit(&pairs).ok();
    let noise_dominated = points.iter().any(|p| p.d_n <= 3.0 * p.band);
    let first = &points[0];
    let last = &points[points.len() - 1];
    let decreasing_beyond_noise = first.d_n - last.d_n > first.band + last.band;
    let theoretical_exponents = theoretical_exponents(config, &points);
    Ok(RateReport {
        config: config.clone(),
        points,
        fit,
        noise_dominated,
        decreasing_beyond_noise,
        theoretical_exponents,
    })
}

/// Run the experiment on a dedicated pool with `workers` threads.
pub fn run_experiment_with_workers(config: &ExperimentConfig, workers: usize) -> Result<RateReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    pool.install(|| run_experiment(config))
}
