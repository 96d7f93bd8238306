//! Countable-alphabet distributions.
//!
//! A [`Distribution`] is one of a handful of families with an analytic pmf:
//! explicit finite laws, Zipf `p_i ∝ i^{-λ}`, geometric `p_i ∝ e^{-λi}`, the
//! log-quartic law `p_i ∝ 1/(i⁴ ln² i)` (support `i ≥ 2`) and the two-point
//! perturbed-uniform law `1/2 ± 1/(2n^λ)` that drifts toward uniform as `n`
//! grows. Symbols are the positive integers.
//!
//! Tail functionals over infinite support go through [`crate::series`], which
//! certifies relative error against `tail_tolerance`. Sampling is exact
//! inverse-CDF over a lazily extended table of survival probabilities
//! `S(k) = P(X > k)`; draws that land past the table are resolved against the
//! analytic tail, so no mass is ever truncated.

use crate::error::{Error, Result};
use crate::estimators::SampleCounts;
use crate::series::{self, CompensatedSum};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::RwLock;

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

/// Guide-table resolution for the sampler.
const GUIDE_BUCKETS: usize = 4096;
/// Survival entries per lazily computed block (infinite families).
const BLOCK: usize = 4096;
/// Largest survival table kept in memory; deeper draws use the analytic tail.
const MAX_TABLE: usize = 1 << 20;

/// Family of a countable-alphabet law.
///
/// Serialized in externally tagged form, e.g. `{"finite": [0.2, 0.8]}`,
/// `{"zipf": {"lambda": 2.0}}`, `{"log-quartic": {}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Finite(Vec<f64>),
    Zipf {
        lambda: f64,
    },
    Geometric {
        lambda: f64,
    },
    LogQuartic {},
    /// Two-point law `p_1 = 1/2 + 1/(2n^λ)`, `p_2 = 1/2 − 1/(2n^λ)`. Leaving
    /// `n` unset makes it a triangular array indexed by the sample size.
    PerturbedUniform {
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<u64>,
    },
}

/// Declarative distribution configuration as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistConfig {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "default_tolerance")]
    pub tail_tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_TAIL_TOLERANCE
}

impl DistConfig {
    pub fn new(family: Family) -> Self {
        DistConfig {
            family,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    /// True when the law depends on the sample size.
    pub fn is_triangular(&self) -> bool {
        matches!(self.family, Family::PerturbedUniform { n: None, .. })
    }

    /// Build the law. Fails for a triangular array without a fixed `n`.
    pub fn build(&self) -> Result<Distribution> {
        Distribution::with_tolerance(self.family.clone(), self.tail_tolerance)
    }

    /// Build the law used at sample size `n`.
    pub fn at(&self, n: u64) -> Result<Distribution> {
        let family = match &self.family {
            Family::PerturbedUniform { lambda, n: None } => Family::PerturbedUniform {
                lambda: *lambda,
                n: Some(n),
            },
            other => other.clone(),
        };
        Distribution::with_tolerance(family, self.tail_tolerance)
    }
}

/// Σ p_i^a, or a divergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentSum {
    Finite(f64),
    Divergent,
}

impl MomentSum {
    pub fn value(self) -> Option<f64> {
        match self {
            MomentSum::Finite(v) => Some(v),
            MomentSum::Divergent => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Zipf { lambda: f64 },
    Geometric { lambda: f64 },
    LogQuartic,
}

impl Shape {
    /// ln of the unnormalized pmf at real `x = e^{ln_x}`.
    fn ln_weight(self, ln_x: f64) -> f64 {
        match self {
            Shape::Zipf { lambda } => -lambda * ln_x,
            Shape::Geometric { lambda } => -lambda * ln_x.exp(),
            Shape::LogQuartic => -4.0 * ln_x - 2.0 * ln_x.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Support<'a> {
    Finite(&'a [f64]),
    Infinite { shape: Shape, ln_norm: f64 },
}

/// Survival table `s[k] = P(X > k)` plus a guide table over `(0, 1]`.
#[derive(Debug, Default)]
struct SurvivalTable {
    s: Vec<f64>,
    guide: Vec<u32>,
    complete: bool,
}

impl SurvivalTable {
    /// Smallest k with s[k] < v, if the table reaches that far.
    fn lookup(&self, v: f64) -> Option<u64> {
        let s = &self.s;
        let (lo, hi) = if self.guide.is_empty() {
            (1, s.len())
        } else {
            let j = ((v * GUIDE_BUCKETS as f64).ceil() as usize).clamp(1, GUIDE_BUCKETS) - 1;
            let lo = self.guide[j] as usize;
            let hi = if j == 0 { s.len() } else { self.guide[j - 1] as usize + 1 };
            (lo, hi.min(s.len()))
        };
        let offset = s[lo..hi].partition_point(|&x| x >= v);
        let k = lo + offset;
        if k < s.len() {
            Some(k as u64)
        } else {
            None
        }
    }

    fn rebuild_guide(&mut self) {
        let last = *self.s.last().unwrap_or(&1.0);
        if last >= 1.0 / GUIDE_BUCKETS as f64 {
            self.guide.clear();
            return;
        }
        let mut guide = Vec::with_capacity(GUIDE_BUCKETS);
        let mut k = 1usize;
        for j in (0..GUIDE_BUCKETS).rev() {
            let threshold = (j + 1) as f64 / GUIDE_BUCKETS as f64;
            while self.s[k] >= threshold {
                k += 1;
            }
            guide.push(k as u32);
        }
        guide.reverse();
        self.guide = guide;
    }
}

/// A countable-alphabet probability law with certified tail functionals and
/// an exact sampler.
#[derive(Debug)]
pub struct Distribution {
    family: Family,
    probs: Option<Vec<f64>>,
    shape: Option<Shape>,
    ln_norm: f64,
    tail_tolerance: f64,
    table: RwLock<SurvivalTable>,
}

impl Clone for Distribution {
    fn clone(&self) -> Self {
        Distribution {
            family: self.family.clone(),
            probs: self.probs.clone(),
            shape: self.shape,
            ln_norm: self.ln_norm,
            tail_tolerance: self.tail_tolerance,
            table: RwLock::new(SurvivalTable::default()),
        }
    }
}

impl Distribution {
    pub fn new(family: Family) -> Result<Self> {
        Self::with_tolerance(family, DEFAULT_TAIL_TOLERANCE)
    }

    pub fn finite(probs: Vec<f64>) -> Result<Self> {
        Self::new(Family::Finite(probs))
    }

    pub fn zipf(lambda: f64) -> Result<Self> {
        Self::new(Family::Zipf { lambda })
    }

    pub fn geometric(lambda: f64) -> Result<Self> {
        Self::new(Family::Geometric { lambda })
    }

    pub fn log_quartic() -> Result<Self> {
        Self::new(Family::LogQuartic {})
    }

    pub fn perturbed_uniform(lambda: f64, n: u64) -> Result<Self> {
        Self::new(Family::PerturbedUniform {
            lambda,
            n: Some(n),
        })
    }

    pub fn with_tolerance(family: Family, tail_tolerance: f64) -> Result<Self> {
        if !(tail_tolerance > 0.0 && tail_tolerance <= 1e-3) {
            return Err(Error::InvalidParameter(format!(
                "tail_tolerance must lie in (0, 1e-3], got {tail_tolerance}"
            )));
        }
        let invalid = |msg: String| Err(Error::InvalidDistribution(msg));
        let (probs, shape) = match &family {
            Family::Finite(p) => {
                if p.is_empty() {
                    return invalid("finite law needs at least one probability".into());
                }
                if let Some(bad) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return invalid(format!("probability {bad} is not a finite nonnegative number"));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return invalid(format!("probabilities sum to {total}, not 1"));
                }
                (Some(p.clone()), None)
            }
            Family::PerturbedUniform { lambda, n } => {
                if !(*lambda > 0.0 && *lambda < 0.5) {
                    return invalid(format!("perturbed-uniform needs lambda in (0, 1/2), got {lambda}"));
                }
                let n = match n {
                    Some(n) if *n >= 1 => *n,
                    Some(_) => return invalid("perturbed-uniform needs n >= 1".into()),
                    None => {
                        return invalid(
                            "perturbed-uniform without n is a triangular array; build it at a sample size".into(),
                        )
                    }
                };
                let half_gap = 0.5 * (n as f64).powf(-lambda);
                (Some(vec![0.5 + half_gap, 0.5 - half_gap]), None)
            }
            Family::Zipf { lambda } => {
                if !(lambda.is_finite() && *lambda > 1.0) {
                    return invalid(format!("zipf needs lambda > 1, got {lambda}"));
                }
                (None, Some(Shape::Zipf { lambda: *lambda }))
            }
            Family::Geometric { lambda } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return invalid(format!("geometric needs lambda > 0, got {lambda}"));
                }
                (None, Some(Shape::Geometric { lambda: *lambda }))
            }
            Family::LogQuartic {} => (None, Some(Shape::LogQuartic)),
        };

        let ln_norm = match shape {
            None => 0.0,
            // Σ_{i≥1} e^{-λi} = 1/(e^λ − 1)
            Some(Shape::Geometric { lambda }) => lambda.exp_m1().ln(),
            Some(s) => {
                let start = if matches!(s, Shape::LogQuartic) { 2 } else { 1 };
                let z = series::sum_from(|lx| s.ln_weight(lx), start, tail_tolerance * 0.1)?;
                -z.ln()
            }
        };

        Ok(Distribution {
            family,
            probs,
            shape,
            ln_norm,
            tail_tolerance,
            table: RwLock::new(SurvivalTable::default()),
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    /// Normalization constant `C` of the infinite families; 1 for finite laws.
    pub fn norm_constant(&self) -> f64 {
        self.ln_norm.exp()
    }

    /// Probabilities of a finite-support law (symbols `1..=len`).
    pub fn finite_probs(&self) -> Option<&[f64]> {
        self.probs.as_deref()
    }

    /// First symbol of the support.
    pub fn support_start(&self) -> u64 {
        match self.shape {
            Some(Shape::LogQuartic) => 2,
            _ => 1,
        }
    }

    fn support(&self) -> Support<'_> {
        match (&self.probs, self.shape) {
            (Some(p), _) => Support::Finite(p),
            (None, Some(shape)) => Support::Infinite {
                shape,
                ln_norm: self.ln_norm,
            },
            (None, None) => unreachable!("distribution has neither probabilities nor a shape"),
        }
    }

    /// ln p_i; `-∞` outside the support.
    pub fn ln_pmf(&self, i: u64) -> f64 {
        match self.support() {
            Support::Finite(p) => match i.checked_sub(1).and_then(|j| p.get(j as usize)) {
                Some(&x) => x.ln(),
                None => f64::NEG_INFINITY,
            },
            Support::Infinite { shape, ln_norm } => {
                if i < self.support_start() {
                    f64::NEG_INFINITY
                } else {
                    ln_norm + shape.ln_weight((i as f64).ln())
                }
            }
        }
    }

    /// p_i. Symbols outside the support (including `i = 0`) have mass 0.
    pub fn pmf(&self, i: u64) -> f64 {
        match self.support() {
            Support::Finite(p) => i
                .checked_sub(1)
                .and_then(|j| p.get(j as usize))
                .copied()
                .unwrap_or(0.0),
            Support::Infinite { .. } => self.ln_pmf(i).exp(),
        }
    }

    /// Whether Σ p_i^a converges.
    pub fn power_sum_converges(&self, a: f64) -> bool {
        match self.shape {
            None | Some(Shape::Geometric { .. }) => a > 0.0,
            Some(Shape::Zipf { lambda }) => lambda * a > 1.0,
            // i^{-4a} (ln i)^{-2a}: converges iff 4a > 1 (4a = 1 leaves (ln i)^{-1/2})
            Some(Shape::LogQuartic) => 4.0 * a > 1.0,
        }
    }

    /// `Σ_{i ≥ start} exp(ln_term(ln p_i))` for a nonnegative term given in log
    /// space. The caller must have checked convergence.
    pub(crate) fn log_series<T: Fn(f64) -> f64>(&self, start: u64, ln_term: T) -> Result<f64> {
        match self.support() {
            Support::Finite(p) => {
                let from = start.max(1) as usize - 1;
                Ok(p.iter()
                    .skip(from)
                    .filter(|&&x| x > 0.0)
                    .map(|&x| ln_term(x.ln()).exp())
                    .collect::<CompensatedSum>()
                    .value())
            }
            Support::Infinite { shape, ln_norm } => {
                let start = start.max(self.support_start());
                series::sum_from(
                    |lx| ln_term(ln_norm + shape.ln_weight(lx)),
                    start,
                    self.tail_tolerance,
                )
            }
        }
    }

    /// Σ_{i ≥ k} p_i.
    pub fn tail_mass(&self, k: u64) -> Result<f64> {
        let k = k.max(1);
        match (self.support(), self.shape) {
            (Support::Finite(p), _) => Ok(p
                .iter()
                .skip(k as usize - 1)
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .copied()
                .collect::<CompensatedSum>()
                .value()),
            // C Σ_{i≥k} e^{-λi} = e^{-λ(k-1)}
            (_, Some(Shape::Geometric { lambda })) => Ok((-lambda * (k - 1) as f64).exp()),
            _ => self.log_series(k, |lp| lp),
        }
    }

    /// −Σ_{i ≥ k} p_i ln p_i.
    pub fn tail_entropy(&self, k: u64) -> Result<f64> {
        self.log_series(k.max(1), entropy_term)
    }

    /// Σ_i p_i^a for `a > 0`, or [`MomentSum::Divergent`].
    pub fn moment_sum(&self, a: f64) -> Result<MomentSum> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("moment exponent must be positive, got {a}")));
        }
        if !self.power_sum_converges(a) {
            return Ok(MomentSum::Divergent);
        }
        if let Some(Shape::Geometric { lambda }) = self.shape {
            // C^a Σ e^{-aλi} = C^a e^{-aλ}/(1 − e^{-aλ})
            let value = (a * self.ln_norm - a * lambda).exp() / -(-a * lambda).exp_m1();
            return Ok(MomentSum::Finite(value));
        }
        Ok(MomentSum::Finite(self.log_series(1, |lp| a * lp)?))
    }

    /// P(X > k), from the survival table when it reaches `k`.
    pub fn survival(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Ok(1.0);
        }
        if (k as usize) < MAX_TABLE {
            self.extend_table(k as usize)?;
            let table = self.table.read().expect("survival table poisoned");
            if let Some(&s) = table.s.get(k as usize) {
                return Ok(s);
            }
            if table.complete {
                return Ok(0.0);
            }
        }
        self.tail_mass(k + 1)
    }

    /// P(X ≤ k) = 1 − P(X > k).
    pub fn cdf(&self, k: u64) -> Result<f64> {
        Ok(1.0 - self.survival(k)?)
    }

    /// Grow the survival table until it covers index `upto` (or the support
    /// ends, or the size cap is hit).
    fn extend_table(&self, upto: usize) -> Result<()> {
        {
            let table = self.table.read().expect("survival table poisoned");
            if table.complete || table.s.len() > upto.min(MAX_TABLE - 1) {
                return Ok(());
            }
        }
        let mut table = self.table.write().expect("survival table poisoned");
        match self.support() {
            Support::Finite(p) => {
                if table.complete {
                    return Ok(());
                }
                // backward accumulation keeps small tails accurate
                let mut s = vec![0.0; p.len() + 1];
                let mut acc = CompensatedSum::default();
                for k in (1..=p.len()).rev() {
                    acc.add(p[k - 1]);
                    s[k - 1] = acc.value();
                }
                s[0] = 1.0;
                table.s = s;
                table.complete = true;
            }
            Support::Infinite { .. } => {
                let target = upto.min(MAX_TABLE - 1);
                if table.s.is_empty() {
                    table.s.push(1.0);
                }
                while table.s.len() <= target {
                    let begin = table.s.len();
                    let end = (begin + BLOCK).min(MAX_TABLE) - 1;
                    // anchor at the block end, then accumulate backwards
                    let mut block = vec![0.0; end - begin + 1];
                    let mut acc = CompensatedSum::default();
                    acc.add(self.tail_mass(end as u64 + 1)?);
                    block[end - begin] = acc.value();
                    for k in (begin..end).rev() {
                        acc.add(self.pmf(k as u64 + 1));
                        block[k - begin] = acc.value();
                    }
                    let prev = *table.s.last().expect("table starts with s[0]");
                    table.s.extend(block.into_iter().map(|x| x.min(prev)));
                }
            }
        }
        if table.guide.is_empty() {
            table.rebuild_guide();
        }
        Ok(())
    }

    /// Make sure the guide table exists (tail below 1/GUIDE_BUCKETS is tabulated).
    fn prepare_sampler(&self) -> Result<()> {
        let mut need = BLOCK;
        loop {
            self.extend_table(need)?;
            let table = self.table.read().expect("survival table poisoned");
            if table.complete || !table.guide.is_empty() || table.s.len() >= MAX_TABLE {
                return Ok(());
            }
            need = table.s.len() * 2;
        }
    }

    /// Invert `S(k) < v` beyond the survival table using the analytic tail.
    fn deep_inverse(&self, v: f64, from: u64) -> Result<u64> {
        if let Some(Shape::Geometric { lambda }) = self.shape {
            // S(k) = e^{-λk}
            let k = (-v.ln() / lambda).floor() as u64 + 1;
            return Ok(k.max(from));
        }
        let surv = |k: u64| self.tail_mass(k + 1);
        let mut lo = from.saturating_sub(1).max(1); // S(lo) ≥ v
        let mut hi = lo.saturating_mul(2);
        while surv(hi)? >= v {
            lo = hi;
            hi = hi.saturating_mul(2);
            if hi == u64::MAX {
                return Ok(hi);
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if surv(mid)? >= v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Draw `n` symbols into `out` (cleared first).
    pub fn sample_into<R: RngCore>(&self, rng: &mut R, n: u64, out: &mut Vec<u64>) -> Result<()> {
        self.prepare_sampler()?;
        out.clear();
        out.reserve(n as usize);
        let mut misses: Vec<f64> = Vec::new();
        {
            let table = self.table.read().expect("survival table poisoned");
            for _ in 0..n {
                let v = open_unit(rng);
                match table.lookup(v) {
                    Some(k) => out.push(k),
                    None => misses.push(v),
                }
            }
        }
        if misses.is_empty() {
            return Ok(());
        }
        let smallest = misses.iter().copied().fold(f64::INFINITY, f64::min);
        let mut need = self.table.read().expect("survival table poisoned").s.len();
        loop {
            let table = self.table.read().expect("survival table poisoned");
            if table.complete || table.s.len() >= MAX_TABLE || *table.s.last().unwrap() < smallest {
                break;
            }
            drop(table);
            need *= 2;
            self.extend_table(need)?;
        }
        let table = self.table.read().expect("survival table poisoned");
        for v in misses {
            let k = match table.lookup(v) {
                Some(k) => k,
                None => self.deep_inverse(v, table.s.len() as u64)?,
            };
            out.push(k);
        }
        Ok(())
    }

    /// Counts of `n` i.i.d. draws using the supplied generator.
    pub fn sample_counts_with<R: RngCore>(&self, rng: &mut R, n: u64) -> Result<SampleCounts> {
        if n == 0 {
            return Err(Error::SampleTooSmall { min: 1, got: 0 });
        }
        let mut draws = Vec::new();
        self.sample_into(rng, n, &mut draws)?;
        Ok(SampleCounts::from_symbols(&mut draws))
    }

    /// Counts of `n` i.i.d. draws, reproducible from `seed`.
    pub fn sample_counts(&self, n: u64, seed: u64) -> Result<SampleCounts> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_counts_with(&mut rng, n)
    }
}

/// ln(−p ln p) from ln p.
pub(crate) fn entropy_term(lp: f64) -> f64 {
    if lp.is_finite() && lp < 0.0 {
        lp + (-lp).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Uniform on `(0, 1]` with unbounded resolution near 0: the lowest 2^-53
/// bucket is refined recursively.
pub(crate) fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    const EPS: f64 = 1.0 / (1u64 << 53) as f64;
    let mut scale = 1.0;
    loop {
        let u = (rng.next_u64() >> 11) as f64 * EPS;
        let v = 1.0 - u;
        if v > EPS || scale < 1e-290 {
            return scale * v;
        }
        scale *= EPS;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    #[test]
    fn pmf_examples() {
        let d = Distribution::finite(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(d.pmf(2), 0.3);
        assert_eq!(d.pmf(4), 0.0);
        assert_eq!(d.pmf(0), 0.0);

        let g = Distribution::geometric(1.0).unwrap();
        assert!((g.pmf(1) - (E - 1.0) / E).abs() < 1e-15);
        assert!((g.pmf(1) - 0.632_120_558_828_557_7).abs() < 1e-15);

        let pu = Distribution::perturbed_uniform(0.25, 16).unwrap();
        assert_eq!(pu.pmf(1), 0.75);
        assert_eq!(pu.pmf(2), 0.25);
    }

    #[test]
    fn perturbed_uniform_structure() {
        for &lambda in &[0.1, 0.25, 0.4] {
            for &n in &[4u64, 17, 1024, 1 << 20] {
                let d = Distribution::perturbed_uniform(lambda, n).unwrap();
                assert_eq!(d.pmf(1) + d.pmf(2), 1.0);
                let gap = d.pmf(1) - d.pmf(2);
                assert!((gap - (n as f64).powf(-lambda)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Distribution::finite(vec![]).is_err());
        assert!(Distribution::finite(vec![0.5, 0.6]).is_err());
        assert!(Distribution::finite(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::zipf(1.0).is_err());
        assert!(Distribution::geometric(0.0).is_err());
        assert!(Distribution::perturbed_uniform(0.5, 10).is_err());
        assert!(Distribution::new(Family::PerturbedUniform { lambda: 0.2, n: None }).is_err());
    }

    #[test]
    fn tail_mass_examples() {
        let d = Distribution::finite(vec![0.2, 0.3, 0.5]).unwrap();
        assert!((d.tail_mass(2).unwrap() - 0.8).abs() < 1e-15);
        let g = Distribution::geometric(1.0).unwrap();
        assert!((g.tail_mass(3).unwrap() - (-2f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn zipf_tail_between_integral_brackets() {
        let d = Distribution::zipf(5.0).unwrap();
        let c = d.norm_constant();
        let t = d.tail_mass(10).unwrap();
        let lower = c * 10f64.powi(-4) / 4.0;
        let upper = c * 9f64.powi(-4) / 4.0;
        assert!(lower < t && t < upper, "{lower} < {t} < {upper}");
    }

    #[test]
    fn zipf_normalization_is_inverse_zeta() {
        let d = Distribution::zipf(2.0).unwrap();
        let expected = 6.0 / std::f64::consts::PI.powi(2);
        assert!((d.norm_constant() / expected - 1.0).abs() < 1e-13);
    }

    #[test]
    fn tail_entropy_examples() {
        let d = Distribution::finite(vec![0.5, 0.5]).unwrap();
        assert!((d.tail_entropy(2).unwrap() - 0.5 * LN_2).abs() < 1e-16);
        let one = Distribution::finite(vec![1.0]).unwrap();
        assert_eq!(one.tail_entropy(1).unwrap(), 0.0);

        let g = Distribution::geometric(1.0).unwrap();
        let brute: f64 = (5..10_005u64)
            .map(|i| g.pmf(i))
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum();
        let te = g.tail_entropy(5).unwrap();
        assert!((te - brute).abs() < 1e-10, "{te} vs {brute}");
    }

    #[test]
    fn moment_sum_examples() {
        let g = Distribution::geometric(1.0).unwrap();
        let c = E - 1.0;
        let expected = c.sqrt() * (-0.5f64).exp() / (1.0 - (-0.5f64).exp());
        match g.moment_sum(0.5).unwrap() {
            MomentSum::Finite(v) => assert!((v - expected).abs() < 1e-14),
            MomentSum::Divergent => panic!("geometric moments converge"),
        }
        let z = Distribution::zipf(5.0).unwrap();
        assert!(matches!(z.moment_sum(0.25).unwrap(), MomentSum::Finite(_)));
        assert_eq!(z.moment_sum(0.15).unwrap(), MomentSum::Divergent);
        let lq = Distribution::log_quartic().unwrap();
        assert!(matches!(lq.moment_sum(0.3).unwrap(), MomentSum::Finite(v) if v.is_finite() && v > 1.0));
        assert_eq!(lq.moment_sum(0.25).unwrap(), MomentSum::Divergent);
    }

    #[test]
    fn zipf_moment_matches_zeta_ratio() {
        // Σ p_i^a = ζ(λa)/ζ(λ)^a ; λ = 2, a = 0.75 → ζ(1.5)/ζ(2)^0.75
        let z = Distribution::zipf(2.0).unwrap();
        let zeta_15 = 2.612_375_348_685_488_4;
        let zeta_2 = std::f64::consts::PI.powi(2) / 6.0;
        let v = z.moment_sum(0.75).unwrap().value().unwrap();
        assert!((v / (zeta_15 / zeta_2.powf(0.75)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_quartic_support_starts_at_two() {
        let d = Distribution::log_quartic().unwrap();
        assert_eq!(d.pmf(1), 0.0);
        assert!(d.pmf(2) > 0.5);
        assert!((d.tail_mass(1).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.tail_mass(2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn survival_table_agrees_with_forward_sums() {
        for d in [
            Distribution::zipf(2.0).unwrap(),
            Distribution::geometric(0.3).unwrap(),
            Distribution::log_quartic().unwrap(),
        ] {
            let mut forward = CompensatedSum::default();
            for k in 1..=6000u64 {
                forward.add(d.pmf(k));
                if k % 997 == 0 || k < 5 {
                    let s = d.survival(k).unwrap();
                    assert!((s - (1.0 - forward.value())).abs() < 1e-12, "k = {k}");
                    assert!((s - d.tail_mass(k + 1).unwrap()).abs() <= 1e-12 * s.max(1e-300) + 1e-16);
                }
            }
        }
    }

    #[test]
    fn degenerate_law_samples_one_symbol() {
        let d = Distribution::finite(vec![1.0]).unwrap();
        let c = d.sample_counts(5, 99).unwrap();
        assert_eq!(c.n(), 5);
        assert_eq!(c.entries(), &[(1, 5)]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = Distribution::zipf(1.5).unwrap();
        let a = d.sample_counts(2000, 7).unwrap();
        let b = d.sample_counts(2000, 7).unwrap();
        let c = d.sample_counts(2000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.n(), 2000);
    }

    #[test]
    fn fair_coin_frequency_concentrates() {
        let d = Distribution::finite(vec![0.5, 0.5]).unwrap();
        let c = d.sample_counts(1_000_000, 12345).unwrap();
        let ones = c.count_of(1) as f64 / 1e6;
        assert!((ones - 0.5).abs() <= 4.0 * (0.25f64 / 1e6).sqrt(), "{ones}");
    }

    #[test]
    fn geometric_sample_mean() {
        let d = Distribution::geometric(1.0).unwrap();
        let n = 1_000_000u64;
        let c = d.sample_counts(n, 2024).unwrap();
        // truncated-sum oracle for E[X] and Var[X]
        let (mut mean, mut second) = (0.0, 0.0);
        for i in 1..200u64 {
            let p = d.pmf(i);
            mean += i as f64 * p;
            second += (i * i) as f64 * p;
        }
        let sd = (second - mean * mean).sqrt();
        let emp: f64 = c.entries().iter().map(|&(s, y)| (s * y) as f64).sum::<f64>() / n as f64;
        assert!((emp - mean).abs() <= 4.0 * sd / (n as f64).sqrt(), "{emp} vs {mean}");
        assert!((mean - E / (E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn heavy_tail_draws_beyond_table_are_resolved() {
        // Zipf(1.05) puts ~0.6 of its mass... far out: P(X > 2^20) ≈ 0.4
        let d = Distribution::zipf(1.05).unwrap();
        let c = d.sample_counts(5000, 3).unwrap();
        assert_eq!(c.n(), 5000);
        let deep: u64 = c
            .entries()
            .iter()
            .filter(|&&(s, _)| s as usize >= MAX_TABLE)
            .map(|&(_, y)| y)
            .sum();
        let p_deep = d.tail_mass(MAX_TABLE as u64).unwrap();
        let expected = p_deep * 5000.0;
        let sd = (5000.0 * p_deep * (1.0 - p_deep)).sqrt();
        assert!((deep as f64 - expected).abs() < 5.0 * sd, "{deep} vs {expected}");
    }

    #[test]
    fn config_json_forms() {
        let c: DistConfig = serde_json::from_str(r#"{"finite":[0.5,0.5]}"#).unwrap();
        assert_eq!(c.family, Family::Finite(vec![0.5, 0.5]));
        assert_eq!(c.tail_tolerance, DEFAULT_TAIL_TOLERANCE);
        let c: DistConfig =
            serde_json::from_str(r#"{"perturbed-uniform":{"lambda":0.25,"n":1024},"tail_tolerance":1e-10}"#).unwrap();
        assert_eq!(c.tail_tolerance, 1e-10);
        assert!(!c.is_triangular());
        let c: DistConfig = serde_json::from_str(r#"{"perturbed-uniform":{"lambda":0.25}}"#).unwrap();
        assert!(c.is_triangular());
        assert!(c.build().is_err());
        assert_eq!(c.at(16).unwrap().pmf(1), 0.75);
        let c: DistConfig = serde_json::from_str(r#"{"log-quartic":{}}"#).unwrap();
        assert_eq!(c.family, Family::LogQuartic {});
        let back: DistConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
