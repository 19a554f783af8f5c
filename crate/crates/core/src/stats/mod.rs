//! Per-stratum estimators, the sdMAF Wald tests and their chi-square reference.
//!
//! Everything in here is a pure function of genotype counts. The scan and
//! simulation layers call into these functions once per variant, possibly from
//! many worker threads at once.

mod chisq;
mod counts;
pub mod oracle;
mod wald;

pub use chisq::{chisq_isf, chisq_ln_sf, chisq_median, chisq_sf, neg_log10_sf};
pub use counts::{
    estimate_stratum, variance_term, GenotypeCounts, Ploidy, PopulationStratumPair, RegionClass,
    StratumEstimate,
};
pub use wald::{
    omnibus_diff_with_exclusions, sdmaf_multi, sdmaf_omnibus_diff, sdmaf_pair_diff, sdmaf_pooled,
    sdmaf_single, sex_contrast, OmnibusDiff, SexContrast, TestResult,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("stratum has no genotyped individuals")]
    EmptyStratum,
    #[error("{0}")]
    ShapeMismatch(String),
    #[error("variance of the sdMAF estimate is zero while the estimate is not")]
    DegenerateVariance,
    #[error("at least {required} populations are required, got {got}")]
    TooFewPopulations { required: usize, got: usize },
    #[error("chi-square statistic must be a non-negative number, got {0}")]
    Domain(f64),
    #[error("degrees of freedom must be at least 1")]
    ZeroDf,
    #[error("{0}")]
    Singular(String),
}
