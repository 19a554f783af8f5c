use std::f64::consts::LN_10;

use super::chisq::chisq_ln_sf;
use super::counts::{estimate_stratum, variance_term, PopulationStratumPair, RegionClass};
use super::StatsError;

/// A Wald statistic with its chi-square reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df: u32,
    /// Upper-tail probability. Saturates at `f64::MIN_POSITIVE`; use
    /// `neg_log10_p` for anything smaller.
    pub p_value: f64,
    pub neg_log10_p: f64,
}

impl TestResult {
    pub fn from_statistic(statistic: f64, df: u32) -> Result<Self, StatsError> {
        let ln_p = chisq_ln_sf(statistic, df)?;
        Ok(Self {
            statistic,
            df,
            p_value: ln_p.exp().max(f64::MIN_POSITIVE),
            neg_log10_p: (-ln_p / LN_10).max(0.0),
        })
    }

    pub fn is_significant(&self, threshold: f64) -> bool {
        self.neg_log10_p > -threshold.log10()
    }
}

/// Female-minus-male frequency difference in one population and its
/// estimated sampling variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SexContrast {
    pub diff: f64,
    pub variance: f64,
}

impl SexContrast {
    /// `diff^2 / variance` with the 0/0 case defined as 0.
    fn statistic(&self) -> Result<f64, StatsError> {
        if self.variance > 0.0 {
            Ok(self.diff * self.diff / self.variance)
        } else if self.diff == 0.0 {
            Ok(0.0)
        } else {
            Err(StatsError::DegenerateVariance)
        }
    }
}

pub fn sex_contrast(
    pair: &PopulationStratumPair,
    region: RegionClass,
) -> Result<SexContrast, StatsError> {
    pair.check_shape(region)?;
    let female = estimate_stratum(&pair.female)?;
    let male = estimate_stratum(&pair.male)?;
    Ok(SexContrast {
        diff: female.p_hat - male.p_hat,
        variance: variance_term(&female) + variance_term(&male),
    })
}

/// One-population sdMAF test (1 df).
pub fn sdmaf_single(
    pair: &PopulationStratumPair,
    region: RegionClass,
) -> Result<TestResult, StatsError> {
    let w = sex_contrast(pair, region)?.statistic()?;
    TestResult::from_statistic(w, 1)
}

/// Multi-population sdMAF test: the sum of per-population statistics on K df.
/// Any untestable population makes the whole variant untestable.
pub fn sdmaf_multi(
    pairs: &[PopulationStratumPair],
    region: RegionClass,
) -> Result<TestResult, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::TooFewPopulations {
            required: 1,
            got: 0,
        });
    }
    let mut w = 0.0;
    for pair in pairs {
        w += sex_contrast(pair, region)?.statistic()?;
    }
    TestResult::from_statistic(w, pairs.len() as u32)
}

/// Test on counts summed over all populations, ignoring population structure.
pub fn sdmaf_pooled(
    pairs: &[PopulationStratumPair],
    region: RegionClass,
) -> Result<TestResult, StatsError> {
    let (first, rest) = pairs.split_first().ok_or(StatsError::TooFewPopulations {
        required: 1,
        got: 0,
    })?;
    for pair in pairs {
        pair.check_shape(region)?;
    }
    let mut pooled = PopulationStratumPair::new("pooled", first.female, first.male);
    for pair in rest {
        // shapes were checked above, so the sums cannot fail
        pooled.female = pooled
            .female
            .checked_add(&pair.female)
            .expect("checked shape");
        pooled.male = pooled.male.checked_add(&pair.male).expect("checked shape");
    }
    sdmaf_single(&pooled, region)
}

/// Compares the sdMAF of two populations (1 df).
pub fn sdmaf_pair_diff(
    pair_k: &PopulationStratumPair,
    pair_l: &PopulationStratumPair,
    region: RegionClass,
) -> Result<TestResult, StatsError> {
    let k = sex_contrast(pair_k, region)?;
    let l = sex_contrast(pair_l, region)?;
    let w = pair_statistic(&k, &l)?;
    TestResult::from_statistic(w, 1)
}

fn pair_statistic(k: &SexContrast, l: &SexContrast) -> Result<f64, StatsError> {
    SexContrast {
        diff: k.diff - l.diff,
        variance: k.variance + l.variance,
    }
    .statistic()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmnibusDiff {
    pub result: TestResult,
    /// Indices of populations dropped for having zero sdMAF variance.
    pub excluded: Vec<usize>,
}

/// Omnibus between-population test of equal sdMAF across K populations,
/// on K-1 df. Populations whose contrast has zero variance carry no weight
/// and are dropped, reducing df.
pub fn omnibus_diff_with_exclusions(
    pairs: &[PopulationStratumPair],
    region: RegionClass,
) -> Result<OmnibusDiff, StatsError> {
    if pairs.len() < 2 {
        return Err(StatsError::TooFewPopulations {
            required: 2,
            got: pairs.len(),
        });
    }
    let mut kept = Vec::with_capacity(pairs.len());
    let mut excluded = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let c = sex_contrast(pair, region)?;
        if c.variance > 0.0 {
            kept.push(c);
        } else {
            excluded.push(i);
        }
    }
    let w = match kept.as_slice() {
        [] | [_] => {
            return Err(StatsError::TooFewPopulations {
                required: 2,
                got: kept.len(),
            })
        }
        [k, l] => pair_statistic(k, l)?,
        _ => {
            // sum U_k (d_k - dbar)^2 with dbar the U-weighted mean, which equals
            // sum d^2 U - (sum d U)^2 / sum U without the cancellation
            let weights: Vec<f64> = kept.iter().map(|c| 1.0 / c.variance).collect();
            let total: f64 = weights.iter().sum();
            let mean = kept
                .iter()
                .zip(&weights)
                .map(|(c, u)| c.diff * u)
                .sum::<f64>()
                / total;
            kept.iter()
                .zip(&weights)
                .map(|(c, u)| u * (c.diff - mean).powi(2))
                .sum()
        }
    };
    Ok(OmnibusDiff {
        result: TestResult::from_statistic(w, kept.len() as u32 - 1)?,
        excluded,
    })
}

pub fn sdmaf_omnibus_diff(
    pairs: &[PopulationStratumPair],
    region: RegionClass,
) -> Result<TestResult, StatsError> {
    let out = omnibus_diff_with_exclusions(pairs, region)?;
    if !out.excluded.is_empty() {
        log::warn!(
            "omnibus sdMAF difference: excluded {} population(s) with zero variance",
            out.excluded.len()
        );
    }
    Ok(out.result)
}
