//! Numeric checks of the summability and tail hypotheses behind the rates.
//!
//! Each hypothesis is a list of sequences in `n` that must stay bounded. We
//! evaluate them on a grid and report the values plus two deterministic
//! verdicts: whether the grid maximum sits strictly before the last grid point,
//! and whether the last half of the grid is non-increasing. No threshold on
//! the size of the values is applied.

use crate::dist::{DistConfig, Distribution, MomentSum};
use crate::error::{Error, Result};
use crate::indices::IndexSpec;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which estimator's hypotheses to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    /// Power index: `sup_n Σ p_{n,i}^{(β+1)/2} < ∞`.
    SmoothMoment,
    /// Shannon plug-in: tail conditions on `K(n)` and a log moment.
    PluginEntropy,
    /// Miller–Madow: same conditions as the plug-in.
    MillerMadow,
    /// Jackknife: plug-in conditions plus `Σ p_i^{1−ε} < ∞`.
    Jackknife,
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "smooth-moment" => Ok(Hypothesis::SmoothMoment),
            "plugin-entropy" => Ok(Hypothesis::PluginEntropy),
            "miller-madow" => Ok(Hypothesis::MillerMadow),
            "jackknife" => Ok(Hypothesis::Jackknife),
            other => Err(Error::InvalidParameter(format!(
                "unknown hypothesis `{other}` (expected smooth-moment, plugin-entropy, miller-madow or jackknife)"
            ))),
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::SmoothMoment => "smooth-moment",
            Hypothesis::PluginEntropy => "plugin-entropy",
            Hypothesis::MillerMadow => "miller-madow",
            Hypothesis::Jackknife => "jackknife",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    Ceil,
    Floor,
}

/// `K(n) = round(c · n^a · (ln n)^b)` with `b ∈ {0, 1}`.
///
/// Accepted forms include `n^(1/5)`, `ceil(n^0.3)`, `floor(2*n^0.25)`,
/// `ln n`, `ln(n)`, `0.5*n^(1/3)*ln(n)`. Rounding defaults to `ceil`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KExpr {
    pub coefficient: f64,
    pub exponent: f64,
    pub log_factor: bool,
    pub rounding: Rounding,
    source: String,
}

impl KExpr {
    pub fn new(coefficient: f64, exponent: f64, log_factor: bool, rounding: Rounding) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient > 0.0) || !exponent.is_finite() {
            return Err(Error::Expression {
                expr: format!("{coefficient}*n^{exponent}"),
                reason: "coefficient must be positive and exponent finite".into(),
            });
        }
        let mut body = String::new();
        if coefficient != 1.0 {
            body.push_str(&format!("{coefficient}*"));
        }
        if exponent != 0.0 {
            body.push_str(&format!("n^{exponent}"));
            if log_factor {
                body.push('*');
            }
        }
        if log_factor {
            body.push_str("ln(n)");
        }
        if body.is_empty() || body.ends_with('*') {
            body = format!("{coefficient}");
        }
        let prefix = match rounding {
            Rounding::Ceil => "ceil",
            Rounding::Floor => "floor",
        };
        Ok(KExpr {
            coefficient,
            exponent,
            log_factor,
            rounding,
            source: format!("{prefix}({body})"),
        })
    }

    /// Real value before rounding.
    pub fn raw(&self, n: u64) -> f64 {
        let nf = n as f64;
        let mut x = self.coefficient * nf.powf(self.exponent);
        if self.log_factor {
            x *= nf.ln();
        }
        x
    }

    /// K(n), at least 1. A relative slack of 1e-12 keeps values that are
    /// integers up to rounding error from jumping to the next integer.
    pub fn eval(&self, n: u64) -> u64 {
        let x = self.raw(n);
        let k = match self.rounding {
            Rounding::Ceil => (x * (1.0 - 1e-12)).ceil(),
            Rounding::Floor => (x * (1.0 + 1e-12)).floor(),
        };
        if k.is_finite() && k >= 1.0 {
            k as u64
        } else {
            1
        }
    }
}

impl fmt::Display for KExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl From<KExpr> for String {
    fn from(k: KExpr) -> String {
        k.source
    }
}

impl TryFrom<String> for KExpr {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let s = s.strip_prefix('(').and_then(|t| t.strip_suffix(')')).unwrap_or(s);
    if let Some((num, den)) = s.split_once('/') {
        let (num, den): (f64, f64) = (num.parse().ok()?, den.parse().ok()?);
        (den != 0.0).then_some(num / den)
    } else {
        s.parse().ok()
    }
}

/// Split on `*` outside parentheses.
fn split_factors(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '*' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl FromStr for KExpr {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let fail = |reason: &str| Error::Expression {
            expr: input.to_string(),
            reason: reason.to_string(),
        };
        let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        let (rounding, body) = if let Some(inner) = compact.strip_prefix("ceil(").and_then(|t| t.strip_suffix(')')) {
            (Rounding::Ceil, inner.to_string())
        } else if let Some(inner) = compact.strip_prefix("floor(").and_then(|t| t.strip_suffix(')')) {
            (Rounding::Floor, inner.to_string())
        } else {
            (Rounding::Ceil, compact.clone())
        };
        if body.is_empty() {
            return Err(fail("empty expression"));
        }

        let mut coefficient = 1.0;
        let mut exponent: Option<f64> = None;
        let mut log_factor = false;
        for factor in split_factors(&body) {
            match factor {
                "" => return Err(fail("empty factor")),
                "n" => {
                    if exponent.replace(1.0).is_some() {
                        return Err(fail("n appears twice"));
                    }
                }
                "lnn" | "ln(n)" | "log(n)" => {
                    if log_factor {
                        return Err(fail("ln n appears twice"));
                    }
                    log_factor = true;
                }
                f if f.starts_with("n^") => {
                    let a = parse_number(&f[2..]).ok_or_else(|| fail("exponent must be a decimal or a ratio"))?;
                    if exponent.replace(a).is_some() {
                        return Err(fail("n appears twice"));
                    }
                }
                f => {
                    let c = parse_number(f).ok_or_else(|| fail(&format!("unrecognized factor `{f}`")))?;
                    coefficient *= c;
                }
            }
        }
        let mut k = KExpr::new(coefficient, exponent.unwrap_or(0.0), log_factor, rounding)
            .map_err(|_| fail("coefficient must be positive"))?;
        k.source = input.trim().to_string();
        Ok(k)
    }
}

/// One hypothesis sequence evaluated on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    /// Per-grid-point values; empty when the underlying series diverges.
    pub values: Vec<f64>,
    pub divergent: bool,
    pub max: Option<f64>,
    pub argmax_n: Option<u64>,
    /// The grid maximum occurs strictly before the last grid point.
    pub max_before_last: bool,
    /// Values over the last half of the grid never increase.
    pub tail_nonincreasing: bool,
}

impl Quantity {
    fn from_values(name: &str, grid: &[u64], values: Vec<f64>) -> Self {
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        let half = values.len() / 2;
        let tail_nonincreasing = values[half..].windows(2).all(|w| w[1] <= w[0]);
        Quantity {
            name: name.to_string(),
            max: Some(values[best]),
            argmax_n: Some(grid[best]),
            max_before_last: values.len() == 1 || best + 1 < values.len(),
            tail_nonincreasing,
            values,
            divergent: false,
        }
    }

    fn divergent(name: &str) -> Self {
        Quantity {
            name: name.to_string(),
            values: Vec::new(),
            divergent: true,
            max: None,
            argmax_n: None,
            max_before_last: false,
            tail_nonincreasing: false,
        }
    }

    /// Finite, maximum not at the end of the grid.
    pub fn bounded(&self) -> bool {
        !self.divergent && self.max_before_last
    }
}

/// Parameters of a condition check, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub hypothesis: Hypothesis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<KExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<IndexSpec>,
    pub n_grid: Vec<u64>,
}

impl ConditionSpec {
    /// Tail conditions for an entropy estimator.
    pub fn entropy(hypothesis: Hypothesis, delta: f64, k: KExpr, n_grid: Vec<u64>) -> Self {
        ConditionSpec {
            hypothesis,
            delta: Some(delta),
            epsilon: None,
            k: Some(k),
            index: None,
            n_grid,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    /// Moment condition for a power index.
    pub fn smooth(index: IndexSpec, n_grid: Vec<u64>) -> Self {
        ConditionSpec {
            hypothesis: Hypothesis::SmoothMoment,
            delta: None,
            epsilon: None,
            k: None,
            index: Some(index),
            n_grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub hypothesis: Hypothesis,
    pub n_grid: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_values: Vec<u64>,
    pub quantities: Vec<Quantity>,
    /// Every quantity is bounded.
    pub satisfied: bool,
}

impl ConditionReport {
    pub fn quantity(&self, name: &str) -> Option<&Quantity> {
        self.quantities.iter().find(|q| q.name == name)
    }
}

pub const TAIL_MASS: &str = "tail_mass";
pub const TAIL_ENTROPY: &str = "tail_entropy";
pub const LOG_MOMENT: &str = "log_moment";
pub const POWER_MOMENT: &str = "power_moment";

/// Σ p |ln p|^s.
fn log_moment(dist: &Distribution, s: f64) -> Result<f64> {
    dist.log_series(1, |lp| {
        if lp < 0.0 {
            lp + s * (-lp).ln()
        } else {
            f64::NEG_INFINITY
        }
    })
}

fn per_n<F: FnMut(&Distribution, u64) -> Result<MomentSum>>(
    name: &str,
    config: &DistConfig,
    grid: &[u64],
    mut f: F,
) -> Result<Quantity> {
    let mut values = Vec::with_capacity(grid.len());
    for &n in grid {
        match f(&config.at(n)?, n)? {
            MomentSum::Finite(v) => values.push(v),
            MomentSum::Divergent => return Ok(Quantity::divergent(name)),
        }
    }
    Ok(Quantity::from_values(name, grid, values))
}

/// Evaluate the hypotheses of `spec` for `config` on `spec.n_grid`.
pub fn check_conditions(config: &DistConfig, spec: &ConditionSpec) -> Result<ConditionReport> {
    let grid = &spec.n_grid;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("n_grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 2 {
        return Err(Error::InvalidParameter(
            "n_grid must be strictly increasing and start at n >= 2".into(),
        ));
    }

    if spec.hypothesis == Hypothesis::SmoothMoment {
        let index = spec
            .index
            .ok_or_else(|| Error::InvalidParameter("smooth-moment needs an index".into()))?;
        let beta = index
            .beta()
            .ok_or_else(|| Error::Unsupported(format!("{index} has no Hölder exponent")))?;
        let a = 0.5 * (beta + 1.0);
        let q = per_n(POWER_MOMENT, config, grid, |d, _| d.moment_sum(a))?;
        let satisfied = q.bounded();
        return Ok(ConditionReport {
            hypothesis: spec.hypothesis,
            n_grid: grid.clone(),
            k_values: Vec::new(),
            quantities: vec![q],
            satisfied,
        });
    }

    let delta = spec
        .delta
        .ok_or_else(|| Error::InvalidParameter(format!("{} needs delta", spec.hypothesis)))?;
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    let k = spec
        .k
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter(format!("{} needs a K(n) expression", spec.hypothesis)))?;
    let epsilon = match (spec.hypothesis, spec.epsilon) {
        (Hypothesis::Jackknife, Some(e)) if e > 0.5 && e < 1.0 => Some(e),
        (Hypothesis::Jackknife, Some(e)) => {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (1/2, 1), got {e}")))
        }
        (Hypothesis::Jackknife, None) => {
            return Err(Error::InvalidParameter("jackknife needs epsilon".into()))
        }
        _ => None,
    };

    let mut k_values = Vec::with_capacity(grid.len());
    for &n in grid {
        let kn = k.eval(n);
        let bound = (n as f64).powf(0.5 - delta);
        if kn as f64 > bound * (1.0 + 1e-12) {
            return Err(Error::CutoffTooLarge { n, k: kn, bound });
        }
        k_values.push(kn);
    }

    let scale = |n: u64| (n as f64).powf(0.5 + delta);
    let mut quantities = Vec::new();
    let mut idx = 0;
    quantities.push(per_n(TAIL_MASS, config, grid, |d, n| {
        let v = scale(n) * (n as f64).ln() * d.tail_mass(k_values[idx])?;
        idx += 1;
        Ok(MomentSum::Finite(v))
    })?);
    idx = 0;
    quantities.push(per_n(TAIL_ENTROPY, config, grid, |d, n| {
        let v = scale(n) * d.tail_entropy(k_values[idx])?;
        idx += 1;
        Ok(MomentSum::Finite(v))
    })?);
    quantities.push(per_n(LOG_MOMENT, config, grid, |d, _| {
        Ok(MomentSum::Finite(log_moment(d, 2.0 + delta)?))
    })?);
    if let Some(eps) = epsilon {
        quantities.push(per_n(POWER_MOMENT, config, grid, |d, _| d.moment_sum(1.0 - eps))?);
    }
    let satisfied = quantities.iter().all(Quantity::bounded);
    Ok(ConditionReport {
        hypothesis: spec.hypothesis,
        n_grid: grid.clone(),
        k_values,
        quantities,
        satisfied,
    })
}
