use std::io::{BufRead, Write};
use std::path::Path;

use super::{open_text, IngestError, RegionMap, SampleManifest, Sex};
use crate::stats::{GenotypeCounts, PopulationStratumPair, RegionClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MalformedPolicy {
    /// Log, count and continue with the next line.
    Skip,
    /// Yield the error and stop.
    #[default]
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VcfOptions {
    /// Minimum MAF required in every population.
    pub maf_threshold: f64,
    pub on_malformed: MalformedPolicy,
}

impl Default for VcfOptions {
    fn default() -> Self {
        Self {
            maf_threshold: 0.05,
            on_malformed: MalformedPolicy::Abort,
        }
    }
}

/// Individuals of one population left out of the counts at one variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StratumExclusions {
    pub female_missing: u64,
    pub male_missing: u64,
    /// Heterozygous calls in hemizygous (X-NPR) males.
    pub male_het: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QcCounters {
    pub variants_read: u64,
    pub skipped_multiallelic: u64,
    pub skipped_non_snp: u64,
    pub filtered_maf: u64,
    pub het_male_exclusions: u64,
    pub malformed_lines: u64,
    pub passed: u64,
}

impl QcCounters {
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "metric\tcount")?;
        for (name, v) in [
            ("variants_read", self.variants_read),
            ("skipped_multiallelic", self.skipped_multiallelic),
            ("skipped_non_snp", self.skipped_non_snp),
            ("filtered_maf", self.filtered_maf),
            ("het_male_exclusions", self.het_male_exclusions),
            ("malformed_lines", self.malformed_lines),
            ("passed", self.passed),
        ] {
            writeln!(out, "{name}\t{v}")?;
        }
        Ok(())
    }
}

/// One bi-allelic SNP with per-population genotype counts, oriented so the
/// counted allele `B` is the minor allele in the whole sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRecord {
    pub chrom: String,
    pub pos: u64,
    pub id: String,
    pub ref_allele: String,
    pub alt_allele: String,
    /// Whether `B` is the ALT allele (otherwise it is REF).
    pub counted_is_alt: bool,
    pub region: RegionClass,
    pub strata: Vec<PopulationStratumPair>,
    /// Per-population MAF, `min(f, 1 - f)` with `f` allele-weighted over both sexes.
    pub maf: Vec<f64>,
    pub excluded: Vec<StratumExclusions>,
}

impl VariantRecord {
    pub fn counted_allele(&self) -> &str {
        if self.counted_is_alt {
            &self.alt_allele
        } else {
            &self.ref_allele
        }
    }

    /// Allele-weighted frequency of `B` over every stratum.
    pub fn whole_sample_frequency(&self) -> f64 {
        let (b, total) = self.strata.iter().fold((0u64, 0u64), |(b, t), s| {
            (
                b + s.female.counted_alleles() + s.male.counted_alleles(),
                t + s.female.allele_total() + s.male.allele_total(),
            )
        });
        b as f64 / total as f64
    }

    pub fn whole_sample_maf(&self) -> f64 {
        let f = self.whole_sample_frequency();
        f.min(1.0 - f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Call {
    Missing,
    Haploid(u8),
    Diploid(u8, u8),
}

fn parse_gt(gt: &str) -> Option<Call> {
    let allele = |a: &str| -> Option<Option<u8>> {
        match a {
            "." => Some(None),
            "0" => Some(Some(0)),
            "1" => Some(Some(1)),
            _ => None,
        }
    };
    let mut parts = gt.split(['/', '|']);
    let first = allele(parts.next()?)?;
    match (parts.next(), parts.next()) {
        (None, _) => Some(first.map_or(Call::Missing, Call::Haploid)),
        (Some(second), None) => {
            let second = allele(second)?;
            Some(match (first, second) {
                (Some(a), Some(b)) => Call::Diploid(a, b),
                _ => Call::Missing,
            })
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    female: [u64; 3],
    male: [u64; 3],
    male_haploid: [u64; 2],
    excluded: StratumExclusions,
}

fn is_snv(allele: &str) -> bool {
    allele.len() == 1
        && matches!(
            allele.as_bytes()[0].to_ascii_uppercase(),
            b'A' | b'C' | b'G' | b'T'
        )
}

/// Iterator over the variants of a VCF that pass the bi-allelic SNP and MAF
/// filters. Malformed lines are handled per [`MalformedPolicy`].
pub struct VariantStream<R> {
    reader: R,
    buf: String,
    line_no: usize,
    /// Per VCF sample column: `(sex, stream population index)`.
    columns: Vec<Option<(Sex, usize)>>,
    populations: Vec<String>,
    region_map: RegionMap,
    options: VcfOptions,
    qc: QcCounters,
    done: bool,
}

impl<R: BufRead> VariantStream<R> {
    /// Reads the header and matches sample columns to the manifest.
    /// Populations with no sample in the VCF are dropped.
    pub fn new(
        mut reader: R,
        manifest: &SampleManifest,
        region_map: RegionMap,
        options: VcfOptions,
    ) -> Result<Self, IngestError> {
        let mut buf = String::new();
        let mut line_no = 0;
        let header = loop {
            buf.clear();
            if reader.read_line(&mut buf)? == 0 {
                return Err(IngestError::MissingVcfHeader);
            }
            line_no += 1;
            if buf.starts_with("#CHROM") {
                break buf.trim_end_matches(['\n', '\r']).to_string();
            }
            if !buf.starts_with("##") {
                return Err(IngestError::MissingVcfHeader);
            }
        };
        let samples: Vec<&str> = header.split('\t').skip(9).collect();
        let matched: Vec<Option<(Sex, usize)>> =
            samples.iter().map(|s| manifest.sample(s)).collect();
        let unmatched = matched.iter().filter(|m| m.is_none()).count();
        if unmatched > 0 {
            log::warn!("{unmatched} VCF sample(s) not in the manifest were ignored");
        }

        let mut present = vec![false; manifest.populations().len()];
        for (_, k) in matched.iter().flatten() {
            present[*k] = true;
        }
        let mut remap = vec![usize::MAX; present.len()];
        let mut populations = Vec::new();
        for (k, label) in manifest.populations().iter().enumerate() {
            if present[k] {
                remap[k] = populations.len();
                populations.push(label.clone());
            } else {
                log::warn!("population {label} has no samples in the VCF and is skipped");
            }
        }
        let columns = matched
            .into_iter()
            .map(|m| m.map(|(sex, k)| (sex, remap[k])))
            .collect();

        Ok(Self {
            reader,
            buf,
            line_no,
            columns,
            populations,
            region_map,
            options,
            qc: QcCounters::default(),
            done: false,
        })
    }

    pub fn populations(&self) -> &[String] {
        &self.populations
    }

    /// Per-population `(females, males)` among matched VCF samples.
    pub fn stratum_sizes(&self) -> Vec<(u64, u64)> {
        let mut sizes = vec![(0, 0); self.populations.len()];
        for (sex, k) in self.columns.iter().flatten() {
            match sex {
                Sex::Female => sizes[*k].0 += 1,
                Sex::Male => sizes[*k].1 += 1,
            }
        }
        sizes
    }

    pub fn qc(&self) -> &QcCounters {
        &self.qc
    }

    fn malformed(&self, fields: &[&str], message: impl Into<String>) -> IngestError {
        IngestError::MalformedVcf {
            line: self.line_no,
            chrom: fields.first().unwrap_or(&"?").to_string(),
            pos: fields.get(1).unwrap_or(&"?").to_string(),
            message: message.into(),
        }
    }

    /// `Ok(None)` when the line is skipped by a filter.
    fn parse_line(&mut self, line: &str) -> Result<Option<VariantRecord>, IngestError> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 8 {
            return Err(self.malformed(&fields, "fewer than 8 columns"));
        }
        let pos: u64 = fields[1]
            .parse()
            .map_err(|_| self.malformed(&fields, "POS is not an integer"))?;
        self.qc.variants_read += 1;

        let (ref_allele, alt_allele) = (fields[3], fields[4]);
        if alt_allele.contains(',') {
            self.qc.skipped_multiallelic += 1;
            return Ok(None);
        }
        if !is_snv(ref_allele) || !is_snv(alt_allele) {
            self.qc.skipped_non_snp += 1;
            return Ok(None);
        }
        if fields.len() != 9 + self.columns.len() {
            return Err(self.malformed(
                &fields,
                format!(
                    "expected {} columns, found {}",
                    9 + self.columns.len(),
                    fields.len()
                ),
            ));
        }
        let gt_index = fields[8]
            .split(':')
            .position(|k| k == "GT")
            .ok_or_else(|| self.malformed(&fields, "FORMAT has no GT key"))?;
        let region = self.region_map.classify(fields[0], pos);
        let haploid_males = region == RegionClass::XNpr;

        let mut tallies = vec![Tally::default(); self.populations.len()];
        for (sample, column) in fields[9..].iter().zip(&self.columns) {
            let Some((sex, k)) = *column else { continue };
            let gt = sample.split(':').nth(gt_index).unwrap_or(".");
            let call = parse_gt(gt)
                .ok_or_else(|| self.malformed(&fields, format!("bad genotype {gt:?}")))?;
            let t = &mut tallies[k];
            match (sex, call) {
                (Sex::Female, Call::Diploid(a, b)) => t.female[(a + b) as usize] += 1,
                (Sex::Female, _) => t.excluded.female_missing += 1,
                (Sex::Male, Call::Missing) => t.excluded.male_missing += 1,
                (Sex::Male, Call::Diploid(a, b)) if !haploid_males => t.male[(a + b) as usize] += 1,
                (Sex::Male, Call::Haploid(_)) if !haploid_males => t.excluded.male_missing += 1,
                (Sex::Male, Call::Haploid(a)) => t.male_haploid[a as usize] += 1,
                (Sex::Male, Call::Diploid(a, b)) if a == b => t.male_haploid[a as usize] += 1,
                (Sex::Male, Call::Diploid(..)) => {
                    t.excluded.male_het += 1;
                    self.qc.het_male_exclusions += 1;
                }
            }
        }

        let mut strata: Vec<PopulationStratumPair> = tallies
            .iter()
            .zip(&self.populations)
            .map(|(t, label)| {
                let male = if haploid_males {
                    GenotypeCounts::haploid(t.male_haploid[0], t.male_haploid[1])
                } else {
                    GenotypeCounts::diploid(t.male[0], t.male[1], t.male[2])
                };
                PopulationStratumPair::new(
                    label.clone(),
                    GenotypeCounts::diploid(t.female[0], t.female[1], t.female[2]),
                    male,
                )
            })
            .collect();

        let (alt, total) = strata.iter().fold((0u64, 0u64), |(b, n), s| {
            (
                b + s.female.counted_alleles() + s.male.counted_alleles(),
                n + s.female.allele_total() + s.male.allele_total(),
            )
        });
        // ties go to ALT
        let counted_is_alt = 2 * alt <= total;
        if !counted_is_alt {
            for s in &mut strata {
                s.female = s.female.flipped();
                s.male = s.male.flipped();
            }
        }
        let maf: Vec<f64> = strata
            .iter()
            .map(|s| {
                let n = s.female.allele_total() + s.male.allele_total();
                let f = (s.female.counted_alleles() + s.male.counted_alleles()) as f64 / n as f64;
                f.min(1.0 - f)
            })
            .collect();
        // NaN (population with no called alleles) fails the comparison
        if total == 0 || !maf.iter().all(|&m| m >= self.options.maf_threshold) {
            self.qc.filtered_maf += 1;
            return Ok(None);
        }

        self.qc.passed += 1;
        Ok(Some(VariantRecord {
            chrom: fields[0].to_string(),
            pos,
            id: fields[2].to_string(),
            ref_allele: ref_allele.to_string(),
            alt_allele: alt_allele.to_string(),
            counted_is_alt,
            region,
            strata,
            maf,
            excluded: tallies.iter().map(|t| t.excluded).collect(),
        }))
    }
}

impl<R: BufRead> Iterator for VariantStream<R> {
    type Item = Result<VariantRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let mut buf = std::mem::take(&mut self.buf);
            buf.clear();
            match self.reader.read_line(&mut buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
            self.line_no += 1;
            let line = buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() || line.starts_with('#') {
                self.buf = buf;
                continue;
            }
            let parsed = self.parse_line(line);
            self.buf = buf;
            match parsed {
                Ok(Some(record)) => return Some(Ok(record)),
                Ok(None) => {}
                Err(e) => {
                    self.qc.malformed_lines += 1;
                    match self.options.on_malformed {
                        MalformedPolicy::Skip => log::warn!("skipping: {e}"),
                        MalformedPolicy::Abort => {
                            self.done = true;
                            return Some(Err(e));
                        }
                    }
                }
            }
        }
        None
    }
}

/// Opens a plain or gzip-compressed VCF and streams its passing variants.
pub fn stream_variants(
    vcf_path: impl AsRef<Path>,
    manifest: &SampleManifest,
    region_map: &RegionMap,
    options: VcfOptions,
) -> Result<VariantStream<Box<dyn BufRead + Send>>, IngestError> {
    VariantStream::new(
        open_text(vcf_path.as_ref())?,
        manifest,
        region_map.clone(),
        options,
    )
}
