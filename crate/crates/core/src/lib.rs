//! Estimation of diversity indices and Shannon entropy on countable alphabets,
//! with normal-approximation intervals and a harness that measures how fast
//! the standardized estimators approach normality.
//!
//! Modules, bottom up:
//!
//! - [`dist`]: distribution families, tail functionals, exact sampling
//! - [`indices`]: population index values, variances, Hölder and rate exponents
//! - [`estimators`]: plug-in, Miller–Madow and jackknife estimates
//! - [`conditions`]: numeric checks of the tail hypotheses behind the rates
//! - [`oracle`]: exact laws of estimators by multinomial enumeration
//! - [`montecarlo`]: replicated experiments and Kolmogorov-distance rate fits

pub mod conditions;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod indices;
pub mod montecarlo;
pub mod normal;
pub mod oracle;
mod series;

pub use conditions::{check_conditions, ConditionReport, ConditionSpec, Hypothesis, KExpr};
pub use dist::{DistConfig, Distribution, Family, MomentSum};
pub use error::{Error, Result};
pub use estimators::{Estimate, Estimator, EstimatorKind, Method, SampleCounts};
pub use indices::{gamma_of, holder_beta, IndexSpec, Variance};
pub use montecarlo::{run_experiment, ExperimentConfig, RateReport, Standardization};
pub use oracle::AtomicLaw;
