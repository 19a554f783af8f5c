//! Regression route to the sdMAF statistics.
//!
//! The closed forms in [`super::wald`] are special cases of a Wald test in the
//! heteroscedastic linear model
//!
//! ```text
//! G = alpha + gamma*Sex + sum_k gamma_k*POP_k + sum_k eta_k*Sex*POP_k + eps_{sex,pop}
//! ```
//!
//! with parameters ordered `(alpha, gamma, gamma_1, eta_1, ..., gamma_{K-1}, eta_{K-1})`
//! and the first population as baseline. This module fits that model from
//! individual-level genotype codes and evaluates arbitrary linear hypotheses
//! `L theta = 0`. It is slow and only meant for cross-checking the closed forms.

use nalgebra::{DMatrix, DVector};

use super::counts::{GenotypeCounts, PopulationStratumPair, RegionClass};
use super::StatsError;

/// Rows of the constraint matrix `L` in `H0: L theta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHypothesis {
    rows: Vec<Vec<f64>>,
}

impl LinearHypothesis {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    fn unit(k: usize, idx: usize) -> Vec<f64> {
        let mut row = vec![0.0; 2 * k];
        row[idx] = 1.0;
        row
    }

    pub const ALPHA: usize = 0;
    pub const GAMMA: usize = 1;

    pub fn gamma_k(k: usize) -> usize {
        2 * k
    }

    pub fn eta_k(k: usize) -> usize {
        2 * k + 1
    }

    /// `gamma = 0` (baseline-population sdMAF).
    pub fn sex_effect(populations: usize) -> Self {
        Self::new(vec![Self::unit(populations, Self::GAMMA)])
    }

    /// `gamma = eta_1 = ... = eta_{K-1} = 0`.
    pub fn no_sdmaf(populations: usize) -> Self {
        let mut rows = vec![Self::unit(populations, Self::GAMMA)];
        rows.extend((1..populations).map(|k| Self::unit(populations, Self::eta_k(k))));
        Self::new(rows)
    }

    /// `eta_1 = ... = eta_{K-1} = 0`.
    pub fn equal_sdmaf(populations: usize) -> Self {
        Self::new(
            (1..populations)
                .map(|k| Self::unit(populations, Self::eta_k(k)))
                .collect(),
        )
    }

    /// `eta_l = 0`.
    pub fn eta_zero(populations: usize, l: usize) -> Self {
        Self::new(vec![Self::unit(populations, Self::eta_k(l))])
    }

    /// `eta_k - eta_l = 0`.
    pub fn eta_difference(populations: usize, k: usize, l: usize) -> Self {
        let mut row = Self::unit(populations, Self::eta_k(k));
        row[Self::eta_k(l)] = -1.0;
        Self::new(vec![row])
    }
}

/// Individual-level genotype codes: 0/1/2 for diploid strata, 0/2 for
/// hemizygous males.
fn expand_codes(counts: &GenotypeCounts) -> Vec<f64> {
    let mut codes = Vec::with_capacity(counts.total() as usize);
    match *counts {
        GenotypeCounts::Diploid { zero, one, two } => {
            codes.extend(std::iter::repeat_n(0.0, zero as usize));
            codes.extend(std::iter::repeat_n(1.0, one as usize));
            codes.extend(std::iter::repeat_n(2.0, two as usize));
        }
        GenotypeCounts::Haploid { zero, one } => {
            codes.extend(std::iter::repeat_n(0.0, zero as usize));
            codes.extend(std::iter::repeat_n(2.0, one as usize));
        }
    }
    codes
}

/// Sample size, mean and ML variance of a stratum's codes.
struct CellMoments {
    n: f64,
    mean: f64,
    variance: f64,
}

fn moments(counts: &GenotypeCounts) -> Result<CellMoments, StatsError> {
    let codes = expand_codes(counts);
    if codes.is_empty() {
        return Err(StatsError::EmptyStratum);
    }
    let n = codes.len() as f64;
    let mean = codes.iter().sum::<f64>() / n;
    let variance = codes.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    if variance <= 0.0 {
        return Err(StatsError::Singular(
            "stratum has zero genotype variance".into(),
        ));
    }
    Ok(CellMoments { n, mean, variance })
}

/// Fitted model: MLE of the regression coefficients and the inverse of the
/// Fisher information block for them.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub theta: DVector<f64>,
    pub information: DMatrix<f64>,
    pub information_inverse: DMatrix<f64>,
}

/// Design row of the `(alpha, gamma, gamma_k, eta_k)` parameters for one cell.
fn design_row(k_total: usize, k: usize, female: bool) -> DVector<f64> {
    let mut x = DVector::zeros(2 * k_total);
    x[LinearHypothesis::ALPHA] = 1.0;
    if female {
        x[LinearHypothesis::GAMMA] = 1.0;
    }
    if k > 0 {
        x[LinearHypothesis::gamma_k(k)] = 1.0;
        if female {
            x[LinearHypothesis::eta_k(k)] = 1.0;
        }
    }
    x
}

/// Row/column transform `R` with `I = R J R'` and `J` block diagonal.
fn block_transform(k_total: usize, inverse: bool) -> DMatrix<f64> {
    let sign = if inverse { -1.0 } else { 1.0 };
    let mut r = DMatrix::identity(2 * k_total, 2 * k_total);
    for k in 1..k_total {
        r[(0, 2 * k)] = sign;
        r[(1, 2 * k + 1)] = sign;
    }
    r
}

pub fn fit(
    pairs: &[PopulationStratumPair],
    region: RegionClass,
) -> Result<RegressionFit, StatsError> {
    let k_total = pairs.len();
    if k_total == 0 {
        return Err(StatsError::TooFewPopulations {
            required: 1,
            got: 0,
        });
    }
    let dim = 2 * k_total;
    let mut j_inverse = DMatrix::zeros(dim, dim);
    let mut information = DMatrix::zeros(dim, dim);
    let mut weighted_response = DVector::zeros(dim);

    for (k, pair) in pairs.iter().enumerate() {
        pair.check_shape(region)?;
        let female = moments(&pair.female)?;
        let male = moments(&pair.male)?;
        let c = female.n / female.variance;
        let t = c + male.n / male.variance;

        // 2x2 block [[t, c], [c, c]] inverted directly
        let det = t * c - c * c;
        let block_inv = DMatrix::from_row_slice(2, 2, &[c / det, -c / det, -c / det, t / det]);
        j_inverse
            .view_mut((2 * k, 2 * k), (2, 2))
            .copy_from(&block_inv);

        for (cell, is_female) in [(&female, true), (&male, false)] {
            let x = design_row(k_total, k, is_female);
            let w = cell.n / cell.variance;
            information += &x * x.transpose() * w;
            weighted_response += &x * (w * cell.mean);
        }
    }

    let r_inv = block_transform(k_total, true);
    let information_inverse = r_inv.transpose() * j_inverse * &r_inv;
    // generalized least squares: theta = I^{-1} X' W y
    let theta = &information_inverse * weighted_response;
    Ok(RegressionFit {
        theta,
        information,
        information_inverse,
    })
}

/// Wald statistic `(L theta)' [L I^{-1} L']^{-1} (L theta)`.
pub fn oracle_wald(
    pairs: &[PopulationStratumPair],
    region: RegionClass,
    hypothesis: &LinearHypothesis,
) -> Result<f64, StatsError> {
    let fit = fit(pairs, region)?;
    let dim = fit.theta.len();
    let q = hypothesis.rows.len();
    if q == 0 || hypothesis.rows.iter().any(|r| r.len() != dim) {
        return Err(StatsError::ShapeMismatch(format!(
            "hypothesis rows must have {dim} entries"
        )));
    }
    let l = DMatrix::from_fn(q, dim, |i, j| hypothesis.rows[i][j]);
    let estimate = &l * &fit.theta;
    let covariance = &l * &fit.information_inverse * l.transpose();
    let chol = covariance.cholesky().ok_or_else(|| {
        StatsError::Singular("constraint-projected covariance is not positive definite".into())
    })?;
    Ok(estimate.dot(&chol.solve(&estimate)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{sdmaf_multi, sdmaf_single};

    fn pops() -> Vec<PopulationStratumPair> {
        vec![
            PopulationStratumPair::new(
                "a",
                GenotypeCounts::diploid(36, 48, 16),
                GenotypeCounts::diploid(49, 42, 9),
            ),
            PopulationStratumPair::new(
                "b",
                GenotypeCounts::diploid(10, 20, 31),
                GenotypeCounts::diploid(22, 15, 7),
            ),
            PopulationStratumPair::new(
                "c",
                GenotypeCounts::diploid(80, 11, 3),
                GenotypeCounts::diploid(60, 30, 2),
            ),
        ]
    }

    #[test]
    fn block_route_matches_direct_inverse() {
        let fit = fit(&pops(), RegionClass::Autosomal).unwrap();
        let direct = fit.information.clone().try_inverse().unwrap();
        let diff = (&direct - &fit.information_inverse).abs().max();
        assert!(diff < 1e-12 * direct.abs().max(), "{diff}");
        let r = block_transform(3, false);
        let r_inv = block_transform(3, true);
        let id = &r * &r_inv;
        assert!((id - DMatrix::<f64>::identity(6, 6)).abs().max() == 0.0);
    }

    #[test]
    fn coefficients_are_scaled_frequencies() {
        let p = pops();
        let fit = fit(&p, RegionClass::Autosomal).unwrap();
        let freq = |c: &GenotypeCounts| c.counted_alleles() as f64 / c.allele_total() as f64;
        let pf0 = freq(&p[0].female);
        let pm0 = freq(&p[0].male);
        assert!((fit.theta[0] - 2.0 * pm0).abs() < 1e-12);
        assert!((fit.theta[1] - 2.0 * (pf0 - pm0)).abs() < 1e-12);
        let pf1 = freq(&p[1].female);
        let pm1 = freq(&p[1].male);
        assert!((fit.theta[2] - 2.0 * (pm1 - pm0)).abs() < 1e-12);
        assert!((fit.theta[3] - (2.0 * (pf1 - pm1) - 2.0 * (pf0 - pm0))).abs() < 1e-12);
    }

    #[test]
    fn single_population_equivalence() {
        let p = &pops()[..1];
        let w = oracle_wald(p, RegionClass::Autosomal, &LinearHypothesis::sex_effect(1)).unwrap();
        let closed = sdmaf_single(&p[0], RegionClass::Autosomal)
            .unwrap()
            .statistic;
        assert!((w - closed).abs() < 1e-10 * closed.max(1.0));
    }

    #[test]
    fn multi_population_equivalence() {
        let p = pops();
        let w = oracle_wald(&p, RegionClass::XPar, &LinearHypothesis::no_sdmaf(3)).unwrap();
        let closed = sdmaf_multi(&p, RegionClass::XPar).unwrap().statistic;
        assert!((w - closed).abs() < 1e-10 * closed.max(1.0));
    }

    #[test]
    fn rebaselining_gives_identical_pairwise_statistic() {
        // eta_1 - eta_2 with population 0 as baseline vs eta_2 with population 1 as baseline
        let p = pops();
        let a = oracle_wald(
            &p,
            RegionClass::Autosomal,
            &LinearHypothesis::eta_difference(3, 1, 2),
        )
        .unwrap();
        let rebased = vec![p[1].clone(), p[0].clone(), p[2].clone()];
        let b = oracle_wald(
            &rebased,
            RegionClass::Autosomal,
            &LinearHypothesis::eta_zero(3, 2),
        )
        .unwrap();
        assert!((a - b).abs() < 1e-10 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn singular_inputs() {
        let mono = vec![PopulationStratumPair::new(
            "m",
            GenotypeCounts::diploid(10, 0, 0),
            GenotypeCounts::diploid(10, 0, 0),
        )];
        assert!(matches!(
            oracle_wald(
                &mono,
                RegionClass::Autosomal,
                &LinearHypothesis::sex_effect(1)
            ),
            Err(StatsError::Singular(_))
        ));
        let dup = LinearHypothesis::new(vec![vec![0.0, 1.0], vec![0.0, 2.0]]);
        assert!(matches!(
            oracle_wald(&pops()[..1], RegionClass::Autosomal, &dup),
            Err(StatsError::Singular(_))
        ));
    }
}
