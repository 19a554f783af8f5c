//! Null genotype-count generators for type-I-error checks.
//!
//! Two protocols are supported. [`NullProtocol::MultiPop`] draws both sexes of
//! each population from that population's female genotype frequencies, so no
//! population carries an sdMAF. [`NullProtocol::BetweenPop`] draws every
//! population from the pooled female and pooled male frequencies, so any sdMAF
//! is common to all populations.
//!
//! Each variant is generated from its own ChaCha stream keyed by
//! `(seed, variant index)`, which makes output independent of evaluation order.

mod freqtable;

pub use freqtable::{
    read_frequency_table, write_frequency_rows, write_frequency_table, POOLED_LABEL,
};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::ingest::{StratumExclusions, VariantRecord};
use crate::stats::{GenotypeCounts, PopulationStratumPair, RegionClass};

const FREQ_TOLERANCE: f64 = 1e-12;
/// Synthetic-frequency streams live in the upper half of the stream space.
const SYNTHETIC_STREAM: u64 = 1 << 63;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("variant {id}: {message}")]
    InvalidFrequencies { id: String, message: String },
    #[error("variant {id}: no frequencies for population {population}")]
    MissingPopulation { id: String, population: String },
    #[error("invalid stratum sizes: {0}")]
    InvalidSizes(String),
    #[error("expected protocol {expected}, got {got}")]
    WrongProtocol {
        expected: NullProtocol,
        got: NullProtocol,
    },
    #[error("frequency table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Draws `n` trials over the categories of `probs` using sequential
/// conditional binomials.
pub fn multinomial_draw<R: Rng + ?Sized, const C: usize>(
    rng: &mut R,
    n: u64,
    probs: &[f64; C],
) -> Result<[u64; C], SimulateError> {
    check_probabilities(probs)?;
    let mut counts = [0u64; C];
    let mut remaining = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == C {
            counts[i] = remaining;
            break;
        }
        let conditional = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            1.0
        };
        counts[i] = binomial_draw(rng, remaining, conditional)?;
        remaining -= counts[i];
        mass -= p;
    }
    Ok(counts)
}

pub fn binomial_draw<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> Result<u64, SimulateError> {
    let dist = Binomial::new(n, p).map_err(|_| SimulateError::InvalidProbability(p))?;
    Ok(dist.sample(rng))
}

fn check_probabilities(probs: &[f64]) -> Result<(), SimulateError> {
    if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SimulateError::InvalidProbability(bad));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > FREQ_TOLERANCE {
        return Err(SimulateError::InvalidProbability(sum));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullProtocol {
    MultiPop,
    BetweenPop,
}

impl fmt::Display for NullProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NullProtocol::MultiPop => "multipop",
            NullProtocol::BetweenPop => "betweenpop",
        })
    }
}

impl FromStr for NullProtocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "multipop" | "multi" => Ok(NullProtocol::MultiPop),
            "betweenpop" | "between" => Ok(NullProtocol::BetweenPop),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumSizes {
    pub population: String,
    pub females: u64,
    pub males: u64,
}

impl StratumSizes {
    pub fn new(population: impl Into<String>, females: u64, males: u64) -> Self {
        Self {
            population: population.into(),
            females,
            males,
        }
    }

    /// Parses `LABEL:FEMALES:MALES[,LABEL:FEMALES:MALES...]`.
    pub fn parse_list(text: &str) -> Result<Vec<Self>, SimulateError> {
        let bad = |item: &str| {
            SimulateError::InvalidSizes(format!("{item:?} is not LABEL:FEMALES:MALES"))
        };
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                let parts: Vec<&str> = item.split(':').collect();
                let [label, f, m] = parts[..] else {
                    return Err(bad(item));
                };
                let f = f.parse().map_err(|_| bad(item))?;
                let m = m.parse().map_err(|_| bad(item))?;
                Ok(Self::new(label, f, m))
            })
            .collect()
    }
}

impl fmt::Display for StratumSizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.population, self.females, self.males)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullSpec {
    pub protocol: NullProtocol,
    pub sizes: Vec<StratumSizes>,
    pub seed: u64,
}

impl NullSpec {
    pub fn new(
        protocol: NullProtocol,
        sizes: Vec<StratumSizes>,
        seed: u64,
    ) -> Result<Self, SimulateError> {
        if sizes.is_empty() {
            return Err(SimulateError::InvalidSizes("no populations".into()));
        }
        if let Some(s) = sizes.iter().find(|s| s.females == 0 || s.males == 0) {
            return Err(SimulateError::InvalidSizes(format!(
                "{s} has an empty stratum"
            )));
        }
        let mut labels: Vec<&str> = sizes.iter().map(|s| s.population.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(SimulateError::InvalidSizes(
                "duplicate population label".into(),
            ));
        }
        Ok(Self {
            protocol,
            sizes,
            seed,
        })
    }

    /// One-line description recorded at the top of simulation output.
    pub fn header(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(ToString::to_string).collect();
        format!(
            "# protocol={} seed={} sizes={}",
            self.protocol,
            self.seed,
            sizes.join(",")
        )
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Genotype frequencies of one source. `female` is over dosages 0/1/2; for
/// X-NPR `male` holds hemizygous frequencies as `[1 - q, 0, q]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceFreqs {
    pub female: [f64; 3],
    pub male: [f64; 3],
}

impl SourceFreqs {
    /// Female allele frequency of `B`.
    pub fn female_allele_freq(&self) -> f64 {
        self.female[2] + 0.5 * self.female[1]
    }

    fn validate(&self, id: &str, region: RegionClass) -> Result<(), SimulateError> {
        let invalid = |message: String| SimulateError::InvalidFrequencies {
            id: id.to_string(),
            message,
        };
        for (sex, f) in [("female", &self.female), ("male", &self.male)] {
            check_probabilities(f)
                .map_err(|_| invalid(format!("{sex} frequencies {f:?} are not a distribution")))?;
        }
        if region == RegionClass::XNpr && self.male[1] != 0.0 {
            return Err(invalid(
                "X-NPR male heterozygote frequency must be 0".into(),
            ));
        }
        Ok(())
    }
}

/// Source frequencies for one variant, keyed by population label. The
/// pooled entry uses [`POOLED_LABEL`].
#[derive(Debug, Clone, PartialEq)]
pub struct VariantFreqs {
    pub id: String,
    pub region: RegionClass,
    pub sources: Vec<(String, SourceFreqs)>,
}

impl VariantFreqs {
    pub fn source(&self, label: &str) -> Result<&SourceFreqs, SimulateError> {
        self.sources
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| s)
            .ok_or_else(|| SimulateError::MissingPopulation {
                id: self.id.clone(),
                population: label.to_string(),
            })
    }

    /// Empirical frequencies of a scanned variant, per population and pooled.
    pub fn from_record(record: &VariantRecord) -> Self {
        let shares = |c: &GenotypeCounts| -> [f64; 3] {
            let n = c.total() as f64;
            match *c {
                _ if n == 0.0 => [f64::NAN; 3],
                GenotypeCounts::Diploid { zero, one, two } => {
                    [zero as f64 / n, one as f64 / n, two as f64 / n]
                }
                GenotypeCounts::Haploid { zero, one } => [zero as f64 / n, 0.0, one as f64 / n],
            }
        };
        let mut sources: Vec<(String, SourceFreqs)> = record
            .strata
            .iter()
            .map(|s| {
                (
                    s.population.clone(),
                    SourceFreqs {
                        female: shares(&s.female),
                        male: shares(&s.male),
                    },
                )
            })
            .collect();
        let pooled = record.strata.iter().skip(1).fold(
            (record.strata[0].female, record.strata[0].male),
            |(f, m), s| {
                (
                    f.checked_add(&s.female).unwrap_or(f),
                    m.checked_add(&s.male).unwrap_or(m),
                )
            },
        );
        sources.push((
            POOLED_LABEL.to_string(),
            SourceFreqs {
                female: shares(&pooled.0),
                male: shares(&pooled.1),
            },
        ));
        Self {
            id: record.id.clone(),
            region: record.region,
            sources,
        }
    }
}

/// Hardy-Weinberg genotype frequencies shifted by `delta`.
pub fn genotype_freqs(p: f64, delta: f64) -> [f64; 3] {
    let q = 1.0 - p;
    [q * q + delta, 2.0 * p * q - 2.0 * delta, p * p + delta]
}

/// Admissible range of `delta` for allele frequency `p`.
pub fn delta_range(p: f64) -> (f64, f64) {
    let m = p.min(1.0 - p);
    (-m * m, p * (1.0 - p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOptions {
    pub region: RegionClass,
    pub maf_range: (f64, f64),
    /// Fraction of the admissible `delta` range to draw from, in `[0, 1]`.
    pub hwd_fraction: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            region: RegionClass::Autosomal,
            maf_range: (0.05, 0.5),
            hwd_fraction: 0.5,
        }
    }
}

/// Random source frequencies: each population gets its own MAF, uniform on
/// `maf_range`, and its own `delta`. The pooled entry shares one draw across
/// sexes, so it is also a valid multi-population null.
pub fn synthetic_frequencies(
    spec: &NullSpec,
    count: usize,
    options: SyntheticOptions,
) -> Vec<VariantFreqs> {
    let draw = |rng: &mut ChaCha8Rng| -> SourceFreqs {
        let (lo, hi) = options.maf_range;
        let p = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        let (dlo, dhi) = delta_range(p);
        let c = options.hwd_fraction.clamp(0.0, 1.0);
        let delta = if c > 0.0 {
            rng.random_range(c * dlo..=c * dhi)
        } else {
            0.0
        };
        let female = genotype_freqs(p, delta);
        let male = match options.region {
            RegionClass::XNpr => [1.0 - p, 0.0, p],
            _ => female,
        };
        SourceFreqs { female, male }
    };
    (0..count)
        .map(|i| {
            let mut rng = spec.rng(SYNTHETIC_STREAM | i as u64);
            let mut sources: Vec<(String, SourceFreqs)> = spec
                .sizes
                .iter()
                .map(|s| (s.population.clone(), draw(&mut rng)))
                .collect();
            sources.push((POOLED_LABEL.to_string(), draw(&mut rng)));
            VariantFreqs {
                id: format!("syn{}", i + 1),
                region: options.region,
                sources,
            }
        })
        .collect()
}

fn draw_stratum(
    rng: &mut ChaCha8Rng,
    n: u64,
    freqs: &[f64; 3],
    haploid: bool,
) -> Result<GenotypeCounts, SimulateError> {
    if haploid {
        let one = binomial_draw(rng, n, freqs[2] + 0.5 * freqs[1])?;
        Ok(GenotypeCounts::haploid(n - one, one))
    } else {
        let [zero, one, two] = multinomial_draw(rng, n, freqs)?;
        Ok(GenotypeCounts::diploid(zero, one, two))
    }
}

/// Generates the variant at `index`. Depends only on `spec`, `index` and `freqs`.
pub fn simulate_variant(
    spec: &NullSpec,
    index: u64,
    freqs: &VariantFreqs,
) -> Result<VariantRecord, SimulateError> {
    let haploid_males = freqs.region == RegionClass::XNpr;
    let pooled = match spec.protocol {
        NullProtocol::BetweenPop => {
            let s = freqs.source(POOLED_LABEL)?;
            s.validate(&freqs.id, freqs.region)?;
            Some(*s)
        }
        NullProtocol::MultiPop => None,
    };
    let mut rng = spec.rng(index);
    let mut strata = Vec::with_capacity(spec.sizes.len());
    for size in &spec.sizes {
        let (female_src, male_src) = match pooled {
            Some(s) => (s.female, s.male),
            None => {
                let s = freqs.source(&size.population)?;
                check_probabilities(&s.female).map_err(|_| SimulateError::InvalidFrequencies {
                    id: freqs.id.clone(),
                    message: format!(
                        "{} female frequencies are not a distribution",
                        size.population
                    ),
                })?;
                (s.female, s.female)
            }
        };
        let female = draw_stratum(&mut rng, size.females, &female_src, false)?;
        let male = draw_stratum(&mut rng, size.males, &male_src, haploid_males)?;
        strata.push(PopulationStratumPair::new(
            size.population.clone(),
            female,
            male,
        ));
    }
    let maf = strata
        .iter()
        .map(|s| {
            let n = s.female.allele_total() + s.male.allele_total();
            let f = (s.female.counted_alleles() + s.male.counted_alleles()) as f64 / n as f64;
            f.min(1.0 - f)
        })
        .collect();
    Ok(VariantRecord {
        chrom: "sim".into(),
        pos: index + 1,
        id: freqs.id.clone(),
        ref_allele: "b".into(),
        alt_allele: "B".into(),
        counted_is_alt: true,
        region: freqs.region,
        excluded: vec![StratumExclusions::default(); strata.len()],
        strata,
        maf,
    })
}

fn simulate_stream<I>(
    spec: NullSpec,
    variant_freqs: I,
) -> impl Iterator<Item = Result<VariantRecord, SimulateError>>
where
    I: IntoIterator<Item = VariantFreqs>,
{
    variant_freqs
        .into_iter()
        .enumerate()
        .map(move |(i, f)| simulate_variant(&spec, i as u64, &f))
}

fn require(spec: &NullSpec, expected: NullProtocol) -> Result<(), SimulateError> {
    if spec.protocol == expected {
        Ok(())
    } else {
        Err(SimulateError::WrongProtocol {
            expected,
            got: spec.protocol,
        })
    }
}

/// Within-population null: both sexes of population `k` are drawn from its
/// female genotype frequencies (hemizygous males from the female allele
/// frequency).
pub fn simulate_multipop_null<I>(
    spec: NullSpec,
    variant_freqs: I,
) -> Result<impl Iterator<Item = Result<VariantRecord, SimulateError>>, SimulateError>
where
    I: IntoIterator<Item = VariantFreqs>,
{
    require(&spec, NullProtocol::MultiPop)?;
    Ok(simulate_stream(spec, variant_freqs))
}

/// Between-population null: every population is drawn from the pooled
/// female and pooled male sources.
pub fn simulate_betweenpop_null<I>(
    spec: NullSpec,
    pooled_freqs: I,
) -> Result<impl Iterator<Item = Result<VariantRecord, SimulateError>>, SimulateError>
where
    I: IntoIterator<Item = VariantFreqs>,
{
    require(&spec, NullProtocol::BetweenPop)?;
    Ok(simulate_stream(spec, pooled_freqs))
}
