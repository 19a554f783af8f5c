use std::fmt;
use std::str::FromStr;

use super::StatsError;

/// Genotype tallies for one sex within one population.
///
/// Fields are indexed by the number of copies of the counted allele `B`
/// an individual carries: `zero` is `bb` (or hemizygous `b`), `one` is `Bb`,
/// `two` is `BB`. Haploid strata carry hemizygous males on X-NPR, where `one`
/// counts `B` carriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenotypeCounts {
    Diploid { zero: u64, one: u64, two: u64 },
    Haploid { zero: u64, one: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ploidy {
    Diploid,
    Haploid,
}

impl GenotypeCounts {
    /// Counts of `bb`, `Bb` and `BB` individuals.
    pub const fn diploid(zero: u64, one: u64, two: u64) -> Self {
        GenotypeCounts::Diploid { zero, one, two }
    }

    /// Counts of hemizygous `b` and `B` individuals.
    pub const fn haploid(zero: u64, one: u64) -> Self {
        GenotypeCounts::Haploid { zero, one }
    }

    pub fn empty(ploidy: Ploidy) -> Self {
        match ploidy {
            Ploidy::Diploid => Self::diploid(0, 0, 0),
            Ploidy::Haploid => Self::haploid(0, 0),
        }
    }

    pub fn total(&self) -> u64 {
        match *self {
            GenotypeCounts::Diploid { zero, one, two } => zero + one + two,
            GenotypeCounts::Haploid { zero, one } => zero + one,
        }
    }

    pub fn ploidy(&self) -> Ploidy {
        match self {
            GenotypeCounts::Diploid { .. } => Ploidy::Diploid,
            GenotypeCounts::Haploid { .. } => Ploidy::Haploid,
        }
    }

    /// Copies of `B` in the stratum.
    pub fn counted_alleles(&self) -> u64 {
        match *self {
            GenotypeCounts::Diploid { one, two, .. } => one + 2 * two,
            GenotypeCounts::Haploid { one, .. } => one,
        }
    }

    /// Number of allele copies carried by the stratum.
    pub fn allele_total(&self) -> u64 {
        match self.ploidy() {
            Ploidy::Diploid => 2 * self.total(),
            Ploidy::Haploid => self.total(),
        }
    }

    /// Relabel `b` <-> `B`.
    pub fn flipped(&self) -> Self {
        match *self {
            GenotypeCounts::Diploid { zero, one, two } => Self::diploid(two, one, zero),
            GenotypeCounts::Haploid { zero, one } => Self::haploid(one, zero),
        }
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        match *self {
            GenotypeCounts::Diploid { zero, one, two } => {
                Self::diploid(zero * factor, one * factor, two * factor)
            }
            GenotypeCounts::Haploid { zero, one } => Self::haploid(zero * factor, one * factor),
        }
    }

    /// Element-wise sum. Both operands must share a ploidy.
    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        match (*self, *other) {
            (
                GenotypeCounts::Diploid { zero, one, two },
                GenotypeCounts::Diploid {
                    zero: z,
                    one: o,
                    two: t,
                },
            ) => Some(Self::diploid(zero + z, one + o, two + t)),
            (
                GenotypeCounts::Haploid { zero, one },
                GenotypeCounts::Haploid { zero: z, one: o },
            ) => Some(Self::haploid(zero + z, one + o)),
            _ => None,
        }
    }
}

/// Renders as `n0/n1/n2` (diploid) or `n0/n1` (haploid).
impl fmt::Display for GenotypeCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GenotypeCounts::Diploid { zero, one, two } => write!(f, "{zero}/{one}/{two}"),
            GenotypeCounts::Haploid { zero, one } => write!(f, "{zero}/{one}"),
        }
    }
}

impl FromStr for GenotypeCounts {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split('/')
            .map(|x| x.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("bad genotype counts {s:?}: {e}"))?;
        match parts.as_slice() {
            [a, b, c] => Ok(Self::diploid(*a, *b, *c)),
            [a, b] => Ok(Self::haploid(*a, *b)),
            _ => Err(format!("bad genotype counts {s:?}: expected 2 or 3 fields")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionClass {
    Autosomal,
    XPar,
    XNpr,
}

impl RegionClass {
    /// Ploidy of male strata in this region.
    pub fn male_ploidy(self) -> Ploidy {
        match self {
            RegionClass::XNpr => Ploidy::Haploid,
            RegionClass::Autosomal | RegionClass::XPar => Ploidy::Diploid,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionClass::Autosomal => "AUTO",
            RegionClass::XPar => "PAR",
            RegionClass::XNpr => "NPR",
        }
    }
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegionClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AUTO" | "AUTOSOMAL" | "A" => Ok(RegionClass::Autosomal),
            "PAR" | "XPAR" => Ok(RegionClass::XPar),
            "NPR" | "XNPR" | "NONPAR" => Ok(RegionClass::XNpr),
            _ => Err(format!("unknown region class {s:?}")),
        }
    }
}

/// Female and male strata of one population at one variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationStratumPair {
    pub population: String,
    pub female: GenotypeCounts,
    pub male: GenotypeCounts,
}

impl PopulationStratumPair {
    pub fn new(
        population: impl Into<String>,
        female: GenotypeCounts,
        male: GenotypeCounts,
    ) -> Self {
        Self {
            population: population.into(),
            female,
            male,
        }
    }

    /// Checks the female stratum is diploid and the male stratum has the
    /// ploidy `region` requires.
    pub fn check_shape(&self, region: RegionClass) -> Result<(), StatsError> {
        if self.female.ploidy() != Ploidy::Diploid {
            return Err(StatsError::ShapeMismatch(format!(
                "population {}: female stratum must be diploid",
                self.population
            )));
        }
        if self.male.ploidy() != region.male_ploidy() {
            return Err(StatsError::ShapeMismatch(format!(
                "population {}: male stratum is {:?} but {} requires {:?}",
                self.population,
                self.male.ploidy(),
                region,
                region.male_ploidy()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumEstimate {
    /// Frequency of the counted allele.
    pub p_hat: f64,
    /// Hardy-Weinberg disequilibrium `freq(BB) - p^2`; `None` for haploid strata.
    pub delta_hat: Option<f64>,
    pub n: u64,
    pub ploidy: Ploidy,
}

impl StratumEstimate {
    /// Maximum-likelihood variance of the 0/1/2 (or 0/2) genotype codes.
    pub fn code_variance(&self) -> f64 {
        match self.delta_hat {
            Some(delta) => 2.0 * (self.p_hat * (1.0 - self.p_hat) + delta),
            None => 4.0 * self.p_hat * (1.0 - self.p_hat),
        }
    }
}

pub fn estimate_stratum(counts: &GenotypeCounts) -> Result<StratumEstimate, StatsError> {
    let n = counts.total();
    if n == 0 {
        return Err(StatsError::EmptyStratum);
    }
    let nf = n as f64;
    Ok(match *counts {
        GenotypeCounts::Diploid { one, two, .. } => {
            let p_hat = (2 * two + one) as f64 / (2.0 * nf);
            StratumEstimate {
                p_hat,
                delta_hat: Some(two as f64 / nf - p_hat * p_hat),
                n,
                ploidy: Ploidy::Diploid,
            }
        }
        GenotypeCounts::Haploid { one, .. } => StratumEstimate {
            p_hat: one as f64 / nf,
            delta_hat: None,
            n,
            ploidy: Ploidy::Haploid,
        },
    })
}

/// Sampling variance of `p_hat`: `(p(1-p)+delta)/(2n)` for diploid strata,
/// `p(1-p)/n` for haploid ones.
pub fn variance_term(est: &StratumEstimate) -> f64 {
    let n = est.n as f64;
    let p = est.p_hat;
    let v = match est.delta_hat {
        Some(delta) => (p * (1.0 - p) + delta) / (2.0 * n),
        None => p * (1.0 - p) / n,
    };
    // rounding can leave a monomorphic stratum at -1e-18
    v.max(0.0)
}
