//! Genome-scan driver: runs the selected tests over a variant stream and
//! writes the per-variant table, a summary, QC counts and a frequency table
//! that the simulator can read back.
//!
//! Variants are processed in chunks on a bounded worker pool and written in
//! input order, so output bytes do not depend on the worker count.

mod format;
mod report;
mod row;

pub use format::{fmt_p, fmt_sci, fmt_statistic, parse_neg_log10, NA};
pub use report::{
    genomic_lambda, ks_uniform_distance, miami_display, miami_export, qq_export, write_qq,
    LambdaInput, MiamiRow, QqPoint, QqStratum, ResultTable, MIAMI_FLOOR,
};
pub use row::{PopulationStats, ResultLayout, ResultRow, TestKind, TestSet};

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::{
    load_manifest, load_region_map, stream_variants, IngestError, MalformedPolicy, QcCounters,
    RegionMap, VariantRecord, VcfOptions,
};
use crate::simulate::{write_frequency_rows, write_frequency_table, SimulateError, VariantFreqs};
use crate::stats::{StatsError, TestResult};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

impl ScanError {
    /// Errors caused by the user's inputs or configuration, as opposed to
    /// failures inside the program or its output sinks.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            ScanError::Ingest(_) | ScanError::Simulate(_) | ScanError::Input(_)
        )
    }
}

/// Settings that apply to any variant source.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    /// Reference population for pairwise differences; alphabetical first when unset.
    pub baseline: Option<String>,
    pub threshold: f64,
    pub tests: TestSet,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    pub all_pairs: bool,
    pub chunk_size: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            baseline: None,
            threshold: 5e-8,
            tests: TestSet::all(),
            workers: 0,
            all_pairs: false,
            chunk_size: 2048,
        }
    }
}

impl ScanOptions {
    pub fn layout(&self, populations: &[String]) -> Result<ResultLayout, ScanError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ScanError::Input(format!(
                "significance threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if populations.is_empty() {
            return Err(ScanError::Input("no populations to test".into()));
        }
        let baseline = match &self.baseline {
            None => 0,
            Some(label) => populations.iter().position(|p| p == label).ok_or_else(|| {
                ScanError::Input(format!(
                    "baseline {label:?} is not one of the populations {populations:?}"
                ))
            })?,
        };
        Ok(ResultLayout::new(
            populations.to_vec(),
            self.tests.clone(),
            baseline,
            self.all_pairs,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub vcf: PathBuf,
    pub manifest: PathBuf,
    /// Region file; the bundled GRCh38 X map when unset.
    pub regions: Option<PathBuf>,
    pub maf_threshold: f64,
    pub on_malformed: MalformedPolicy,
    /// Result table path; `.gz` selects gzip. Side files share its prefix.
    pub out: PathBuf,
    pub options: ScanOptions,
}

impl ScanConfig {
    pub fn new(
        vcf: impl Into<PathBuf>,
        manifest: impl Into<PathBuf>,
        out: impl Into<PathBuf>,
    ) -> Self {
        Self {
            vcf: vcf.into(),
            manifest: manifest.into(),
            regions: None,
            maf_threshold: 0.05,
            on_malformed: MalformedPolicy::Abort,
            out: out.into(),
            options: ScanOptions::default(),
        }
    }
}

/// Per-test tallies collected while scanning.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSummary {
    pub name: String,
    pub nominal_df: u32,
    pub tested: u64,
    pub significant: u64,
    /// `None` when no variant could be tested.
    pub lambda: Option<f64>,
    statistics: Vec<f64>,
    p_values: Vec<f64>,
    uniform_df: bool,
}

impl TestSummary {
    fn new(name: String, nominal_df: u32) -> Self {
        Self {
            name,
            nominal_df,
            tested: 0,
            significant: 0,
            lambda: None,
            statistics: Vec::new(),
            p_values: Vec::new(),
            uniform_df: true,
        }
    }

    fn add(&mut self, result: Option<&TestResult>, threshold: f64) {
        let Some(r) = result else { return };
        self.tested += 1;
        if r.is_significant(threshold) {
            self.significant += 1;
        }
        self.uniform_df &= r.df == self.nominal_df;
        self.statistics.push(r.statistic);
        self.p_values.push(r.p_value);
    }

    fn finish(&mut self) -> Result<(), ScanError> {
        if self.tested > 0 {
            // omnibus df shrinks when populations are excluded; fall back to p-values then
            let (values, input) = if self.uniform_df {
                (&self.statistics, LambdaInput::Statistic)
            } else {
                (&self.p_values, LambdaInput::PValue)
            };
            let values: Vec<Option<f64>> = values.iter().copied().map(Some).collect();
            self.lambda = Some(genomic_lambda(&values, self.nominal_df, input)?);
        }
        self.statistics = Vec::new();
        self.p_values = Vec::new();
        Ok(())
    }
}

/// A variant significant under exactly one of the multi-population and
/// pooled tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscordantVariant {
    pub chrom: String,
    pub pos: u64,
    pub id: String,
    pub region: String,
    pub multi_p: String,
    pub pooled_p: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSummary {
    pub variants: u64,
    pub threshold: f64,
    pub tests: Vec<TestSummary>,
    pub multi_only: Vec<DiscordantVariant>,
    pub pooled_only: Vec<DiscordantVariant>,
    pub qc: Option<QcCounters>,
}

impl ScanSummary {
    fn new(layout: &ResultLayout, threshold: f64) -> Self {
        let k = layout.populations.len() as u32;
        let mut tests = Vec::new();
        if layout.tests.contains(TestKind::Single) {
            for p in &layout.populations {
                tests.push(TestSummary::new(format!("single_{p}"), 1));
            }
        }
        if layout.tests.contains(TestKind::Multi) {
            tests.push(TestSummary::new("multi".into(), k));
        }
        if layout.tests.contains(TestKind::Pooled) {
            tests.push(TestSummary::new("pooled".into(), 1));
        }
        for &pair in &layout.pairs {
            tests.push(TestSummary::new(layout.pair_name(pair), 1));
        }
        if layout.tests.contains(TestKind::Omnibus) && k >= 2 {
            tests.push(TestSummary::new("omnibus".into(), k - 1));
        }
        Self {
            variants: 0,
            threshold,
            tests,
            multi_only: Vec::new(),
            pooled_only: Vec::new(),
            qc: None,
        }
    }

    fn add(&mut self, layout: &ResultLayout, row: &ResultRow) {
        self.variants += 1;
        let mut results: Vec<Option<&TestResult>> = Vec::with_capacity(self.tests.len());
        if layout.tests.contains(TestKind::Single) {
            results.extend(row.populations.iter().map(|p| p.single.as_ref()));
        }
        if layout.tests.contains(TestKind::Multi) {
            results.push(row.multi.as_ref());
        }
        if layout.tests.contains(TestKind::Pooled) {
            results.push(row.pooled.as_ref());
        }
        results.extend(row.pairs.iter().map(Option::as_ref));
        if layout.tests.contains(TestKind::Omnibus) && layout.populations.len() >= 2 {
            results.push(row.omnibus.as_ref());
        }
        for (tally, result) in self.tests.iter_mut().zip(results) {
            tally.add(result, self.threshold);
        }

        if layout.tests.contains(TestKind::Multi) && layout.tests.contains(TestKind::Pooled) {
            let sig = |r: &Option<TestResult>| r.is_some_and(|r| r.is_significant(self.threshold));
            let (m, p) = (sig(&row.multi), sig(&row.pooled));
            if m != p {
                let fmt = |r: &Option<TestResult>| r.as_ref().map_or(NA.to_string(), fmt_p);
                let v = DiscordantVariant {
                    chrom: row.record.chrom.clone(),
                    pos: row.record.pos,
                    id: row.record.id.clone(),
                    region: row.record.region.as_str().to_string(),
                    multi_p: fmt(&row.multi),
                    pooled_p: fmt(&row.pooled),
                };
                if m {
                    self.multi_only.push(v);
                } else {
                    self.pooled_only.push(v);
                }
            }
        }
    }

    pub fn test(&self, name: &str) -> Option<&TestSummary> {
        self.tests.iter().find(|t| t.name == name)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "test\tdf\ttested\tsignificant\tlambda")?;
        for t in &self.tests {
            let lambda = t.lambda.map_or(NA.to_string(), |l| format!("{l:.6}"));
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                t.name, t.nominal_df, t.tested, t.significant, lambda
            )?;
        }
        writeln!(out, "multi_only\t.\t.\t{}\t.", self.multi_only.len())?;
        writeln!(out, "pooled_only\t.\t.\t{}\t.", self.pooled_only.len())?;
        Ok(())
    }

    pub fn write_discordant<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "set\tchrom\tpos\tid\tregion\tmulti_p\tpooled_p")?;
        for (set, rows) in [
            ("multi_only", &self.multi_only),
            ("pooled_only", &self.pooled_only),
        ] {
            for v in rows {
                writeln!(
                    out,
                    "{set}\t{}\t{}\t{}\t{}\t{}\t{}",
                    v.chrom, v.pos, v.id, v.region, v.multi_p, v.pooled_p
                )?;
            }
        }
        Ok(())
    }
}

/// Scans `records`, writing the header and one line per variant to
/// `results`, and optionally the frequency table to `freqs`.
pub fn scan_records<I, E>(
    records: I,
    layout: &ResultLayout,
    options: &ScanOptions,
    results: &mut dyn Write,
    mut freqs: Option<&mut dyn Write>,
) -> Result<ScanSummary, ScanError>
where
    I: Iterator<Item = Result<VariantRecord, E>>,
    ScanError: From<E>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| ScanError::Internal(format!("worker pool: {e}")))?;
    let out_err = |source: io::Error| ScanError::Output {
        path: PathBuf::from("<results>"),
        source,
    };
    let freq_err = |source: io::Error| ScanError::Output {
        path: PathBuf::from("<frequency table>"),
        source,
    };
    writeln!(results, "{}", layout.header()).map_err(out_err)?;
    if let Some(f) = freqs.as_deref_mut() {
        write_frequency_table(f, &[] as &[VariantFreqs]).map_err(freq_err)?;
    }

    let mut summary = ScanSummary::new(layout, options.threshold);
    let mut records = records.peekable();
    let chunk_size = options.chunk_size.max(1);
    while records.peek().is_some() {
        let chunk = records
            .by_ref()
            .take(chunk_size)
            .collect::<Result<Vec<_>, E>>()?;
        let rows: Vec<(ResultRow, String)> = pool.install(|| {
            chunk
                .into_par_iter()
                .map(|record| {
                    let row = layout.compute(record);
                    let line = layout.format(&row);
                    (row, line)
                })
                .collect()
        });
        for (row, line) in &rows {
            writeln!(results, "{line}").map_err(out_err)?;
            summary.add(layout, row);
        }
        if let Some(f) = freqs.as_deref_mut() {
            let table: Vec<VariantFreqs> = rows
                .iter()
                .map(|(row, _)| VariantFreqs::from_record(&row.record))
                .collect();
            write_frequency_rows(f, &table).map_err(freq_err)?;
        }
    }
    for t in &mut summary.tests {
        t.finish()?;
    }
    Ok(summary)
}

/// A plain or gzip output file that must be finished explicitly.
pub enum OutputFile {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

impl OutputFile {
    pub fn create(path: &Path) -> Result<Self, ScanError> {
        let file = File::create(path).map_err(|source| ScanError::Output {
            path: path.to_path_buf(),
            source,
        })?;
        let w = BufWriter::new(file);
        Ok(if path.extension().is_some_and(|e| e == "gz") {
            OutputFile::Gzip(GzEncoder::new(w, Compression::default()))
        } else {
            OutputFile::Plain(w)
        })
    }

    pub fn finish(self) -> io::Result<()> {
        match self {
            OutputFile::Plain(mut w) => w.flush(),
            OutputFile::Gzip(g) => g.finish()?.flush(),
        }
    }
}

impl Write for OutputFile {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            OutputFile::Plain(w) => w.write(buf),
            OutputFile::Gzip(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            OutputFile::Plain(w) => w.flush(),
            OutputFile::Gzip(w) => w.flush(),
        }
    }
}

/// Side-file paths derived from the result table path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub discordant: PathBuf,
    pub qc: PathBuf,
    pub freqs: PathBuf,
}

impl OutputPaths {
    pub fn new(results: &Path) -> Self {
        let name = results.to_string_lossy();
        let stem = name.strip_suffix(".gz").unwrap_or(&name);
        let stem = stem.strip_suffix(".tsv").unwrap_or(stem);
        let side = |suffix: &str| PathBuf::from(format!("{stem}.{suffix}.tsv"));
        Self {
            results: results.to_path_buf(),
            summary: side("summary"),
            discordant: side("discordant"),
            qc: side("qc"),
            freqs: side("freqs"),
        }
    }
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut OutputFile) -> io::Result<()>,
) -> Result<(), ScanError> {
    let mut out = OutputFile::create(path)?;
    let wrap = |source| ScanError::Output {
        path: path.to_path_buf(),
        source,
    };
    f(&mut out).map_err(wrap)?;
    out.finish().map_err(wrap)
}

/// Runs a full scan of a VCF and writes the result table and side files.
pub fn run_scan(config: &ScanConfig) -> Result<ScanSummary, ScanError> {
    if !(0.0..=0.5).contains(&config.maf_threshold) {
        return Err(ScanError::Input(format!(
            "MAF threshold must lie in [0, 0.5], got {}",
            config.maf_threshold
        )));
    }
    let manifest = load_manifest(&config.manifest)?;
    let region_map = match &config.regions {
        Some(path) => load_region_map(Some(path))?,
        None => RegionMap::grch38_default(),
    };
    let mut stream = stream_variants(
        &config.vcf,
        &manifest,
        &region_map,
        VcfOptions {
            maf_threshold: config.maf_threshold,
            on_malformed: config.on_malformed,
        },
    )?;
    let layout = config.options.layout(stream.populations())?;
    let paths = OutputPaths::new(&config.out);

    let mut results = OutputFile::create(&paths.results)?;
    let mut freqs = OutputFile::create(&paths.freqs)?;
    let mut summary = scan_records(
        stream.by_ref(),
        &layout,
        &config.options,
        &mut results,
        Some(&mut freqs),
    )?;
    for (file, path) in [(results, &paths.results), (freqs, &paths.freqs)] {
        file.finish().map_err(|source| ScanError::Output {
            path: path.clone(),
            source,
        })?;
    }
    let qc = *stream.qc();
    summary.qc = Some(qc);
    write_file(&paths.summary, |w| summary.write_tsv(w))?;
    write_file(&paths.discordant, |w| summary.write_discordant(w))?;
    write_file(&paths.qc, |w| qc.write_tsv(w))?;
    log::info!(
        "scanned {} variants ({} read); {} multi-only, {} pooled-only",
        summary.variants,
        qc.variants_read,
        summary.multi_only.len(),
        summary.pooled_only.len()
    );
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{GenotypeCounts, PopulationStratumPair, RegionClass};

    fn record(i: u64, shift: u64) -> VariantRecord {
        let strata = ["A", "B"]
            .iter()
            .map(|p| {
                PopulationStratumPair::new(
                    *p,
                    GenotypeCounts::diploid(40, 40 + shift, 20),
                    GenotypeCounts::diploid(60, 30, 10),
                )
            })
            .collect();
        VariantRecord {
            chrom: "1".into(),
            pos: i,
            id: format!("v{i}"),
            ref_allele: "A".into(),
            alt_allele: "C".into(),
            counted_is_alt: true,
            region: RegionClass::Autosomal,
            strata,
            maf: vec![0.2; 2],
            excluded: vec![Default::default(); 2],
        }
    }

    fn run(records: Vec<VariantRecord>, options: &ScanOptions) -> (String, String, ScanSummary) {
        let layout = options.layout(&["A".into(), "B".into()]).unwrap();
        let mut out = Vec::new();
        let mut freqs = Vec::new();
        let summary = scan_records(
            records.into_iter().map(Ok::<_, ScanError>),
            &layout,
            options,
            &mut out,
            Some(&mut freqs),
        )
        .unwrap();
        (
            String::from_utf8(out).unwrap(),
            String::from_utf8(freqs).unwrap(),
            summary,
        )
    }

    #[test]
    fn empty_input_gives_header_only() {
        let (out, freqs, summary) = run(Vec::new(), &ScanOptions::default());
        assert_eq!(out.lines().count(), 1);
        assert_eq!(freqs.lines().count(), 1);
        assert_eq!(summary.variants, 0);
        assert!(summary
            .tests
            .iter()
            .all(|t| t.tested == 0 && t.lambda.is_none()));
        let mut buf = Vec::new();
        summary.write_tsv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .contains("multi\t2\t0\t0\tNA"));
    }

    #[test]
    fn output_independent_of_workers_and_chunking() {
        let records: Vec<VariantRecord> = (0..200).map(|i| record(i, i % 7)).collect();
        let base = run(
            records.clone(),
            &ScanOptions {
                workers: 1,
                ..Default::default()
            },
        );
        for (workers, chunk_size) in [(2, 3), (8, 64), (3, 1)] {
            let other = run(
                records.clone(),
                &ScanOptions {
                    workers,
                    chunk_size,
                    ..Default::default()
                },
            );
            assert_eq!(base.0, other.0);
            assert_eq!(base.1, other.1);
            assert_eq!(base.2, other.2);
        }
    }

    #[test]
    fn discordance_sets_are_disjoint() {
        // A: strong sdMAF, B: strong opposite sdMAF; pooled cancels, multi does not
        let strata = vec![
            PopulationStratumPair::new(
                "A",
                GenotypeCounts::diploid(100, 200, 700),
                GenotypeCounts::diploid(700, 200, 100),
            ),
            PopulationStratumPair::new(
                "B",
                GenotypeCounts::diploid(700, 200, 100),
                GenotypeCounts::diploid(100, 200, 700),
            ),
        ];
        let mut rec = record(1, 0);
        rec.strata = strata;
        let (_, _, summary) = run(vec![rec, record(2, 0)], &ScanOptions::default());
        assert_eq!(summary.multi_only.len(), 1);
        assert!(summary.pooled_only.is_empty());
        assert_eq!(summary.test("multi").unwrap().significant, 1);
        assert_eq!(summary.test("pooled").unwrap().significant, 0);
    }

    #[test]
    fn bad_baseline_and_threshold() {
        let pops = ["A".to_string()];
        let bad = ScanOptions {
            baseline: Some("Z".into()),
            ..Default::default()
        };
        assert!(matches!(bad.layout(&pops), Err(ScanError::Input(_))));
        let bad = ScanOptions {
            threshold: 1.5,
            ..Default::default()
        };
        assert!(bad.layout(&pops).unwrap_err().is_input_error());
    }

    #[test]
    fn side_file_names() {
        let p = OutputPaths::new(Path::new("/tmp/run/out.tsv.gz"));
        assert_eq!(p.summary, PathBuf::from("/tmp/run/out.summary.tsv"));
        assert_eq!(p.freqs, PathBuf::from("/tmp/run/out.freqs.tsv"));
        let q = OutputPaths::new(Path::new("res"));
        assert_eq!(q.qc, PathBuf::from("res.qc.tsv"));
    }
}
