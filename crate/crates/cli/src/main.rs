use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sdmaf_core::ingest::{open_text, IngestError};
use sdmaf_core::scan::{
    genomic_lambda, miami_export, qq_export, scan_records, write_qq, LambdaInput, MiamiRow,
    OutputFile, ResultTable, NA,
};
use sdmaf_core::simulate::{read_frequency_table, synthetic_frequencies, SyntheticOptions};
use sdmaf_core::{
    run_scan, simulate_betweenpop_null, simulate_multipop_null, MalformedPolicy, NullProtocol,
    NullSpec, RegionClass, ScanConfig, ScanError, ScanOptions, SimulateError, StratumSizes,
    TestSet,
};

/// Five 1000 Genomes super-populations as LABEL:FEMALES:MALES.
const DEFAULT_SIZES: &str = "AFR:342:319,AMR:177:170,EAS:260:244,EUR:263:240,SAS:229:260";

#[derive(Debug, Parser)]
#[command(
    name = "sdmaf",
    version,
    about = "Sex differences in minor allele frequency across populations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test every variant of a VCF and write the result table with side files.
    Scan(ScanArgs),
    /// Generate null genotype counts and write them as a result table.
    Simulate(SimulateArgs),
    /// Genomic-control lambda for result-table columns.
    Lambda(LambdaArgs),
    /// QQ-plot data, overall and by whole-sample MAF stratum.
    Qq(QqArgs),
    /// Miami-plot data comparing two tests.
    Miami(MiamiArgs),
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Reference population for pairwise differences (default: first population).
    #[arg(long)]
    baseline: Option<String>,
    /// Comma-separated tests: single, multi, pooled, pair, omnibus, or all.
    #[arg(long, default_value = "all")]
    tests: TestSet,
    /// Compare every pair of populations instead of each against the baseline.
    #[arg(long)]
    all_pairs: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl TestArgs {
    fn options(&self, threshold: f64) -> ScanOptions {
        ScanOptions {
            baseline: self.baseline.clone(),
            threshold,
            tests: self.tests.clone(),
            workers: self.workers,
            all_pairs: self.all_pairs,
            ..ScanOptions::default()
        }
    }
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long)]
    vcf: PathBuf,
    /// TSV with sample_id, sex and population columns.
    #[arg(long)]
    manifest: PathBuf,
    /// Region file (chrom, start, end, class); GRCh38 chrX bounds when omitted.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Minimum MAF required in every population.
    #[arg(long, default_value_t = 0.05)]
    maf: f64,
    #[arg(long, default_value_t = 5e-8)]
    threshold: f64,
    /// Result table; a `.gz` suffix compresses it. Side files share the prefix.
    #[arg(long)]
    out: PathBuf,
    /// Skip malformed VCF lines instead of aborting.
    #[arg(long)]
    skip_malformed: bool,
    #[command(flatten)]
    tests: TestArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    protocol: NullProtocol,
    /// Frequency table, e.g. the `.freqs.tsv` written by `scan`.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    freqs: Option<PathBuf>,
    /// Number of variants with random frequencies.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Stratum sizes as LABEL:FEMALES:MALES, comma separated.
    #[arg(long, default_value = DEFAULT_SIZES)]
    sizes: String,
    /// Region class of synthetic variants: AUTO, PAR or NPR.
    #[arg(long, default_value = "AUTO")]
    region: RegionClass,
    /// Fraction of the admissible HWD range used for synthetic variants.
    #[arg(long, default_value_t = 0.5)]
    hwd_fraction: f64,
    #[arg(long, default_value_t = 5e-8)]
    threshold: f64,
    /// Output path (`.gz` compresses); standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tests: TestArgs,
}

#[derive(Debug, Args)]
struct LambdaArgs {
    #[arg(long)]
    input: PathBuf,
    /// Reference degrees of freedom; inferred per column when omitted.
    #[arg(long)]
    df: Option<u32>,
    /// Column to summarise (`*_w` or `*_p`); every `*_w` column when omitted.
    #[arg(long)]
    column: Vec<String>,
}

#[derive(Debug, Args)]
struct QqArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of equal-sized MAF strata.
    #[arg(long, default_value_t = 4)]
    strata: usize,
    /// Test column prefix, e.g. multi, pooled, omnibus or AFR.
    #[arg(long, default_value = "multi")]
    test: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MiamiArgs {
    #[arg(long)]
    input: PathBuf,
    /// Upper track test prefix.
    #[arg(long, default_value = "multi")]
    a: String,
    /// Lower track test prefix.
    #[arg(long, default_value = "pooled")]
    b: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Scan(a) => scan(a),
        Command::Simulate(a) => simulate(a),
        Command::Lambda(a) => lambda(a),
        Command::Qq(a) => qq(a),
        Command::Miami(a) => miami(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ScanError>() {
            return if e.is_input_error() { 1 } else { 2 };
        }
        if cause.is::<SimulateError>() || cause.is::<IngestError>() {
            return 1;
        }
    }
    2
}

/// The error chain joined with `: `, skipping causes already quoted by an outer message.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn input_error(message: impl Into<String>) -> anyhow::Error {
    ScanError::Input(message.into()).into()
}

/// Writes to `path`, or to standard output when it is `None`.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(path) => {
            let mut out = OutputFile::create(path)?;
            f(&mut out)?;
            out.finish().map_err(|source| ScanError::Output {
                path: path.to_path_buf(),
                source,
            })?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = io::BufWriter::new(stdout.lock());
            f(&mut out)?;
            out.flush().context("writing standard output")?;
        }
    }
    Ok(())
}

fn scan(args: ScanArgs) -> Result<()> {
    let config = ScanConfig {
        regions: args.regions,
        maf_threshold: args.maf,
        on_malformed: if args.skip_malformed {
            MalformedPolicy::Skip
        } else {
            MalformedPolicy::Abort
        },
        options: args.tests.options(args.threshold),
        ..ScanConfig::new(args.vcf, args.manifest, args.out)
    };
    let summary = run_scan(&config)?;
    let stdout = io::stdout();
    summary
        .write_tsv(stdout.lock())
        .context("writing standard output")?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let sizes = StratumSizes::parse_list(&args.sizes)?;
    let spec = NullSpec::new(args.protocol, sizes, args.seed)?;
    let freqs = match (&args.freqs, args.synthetic) {
        (Some(path), _) => read_frequency_table(open_text(path)?)?,
        (None, Some(n)) => {
            if !(0.0..=1.0).contains(&args.hwd_fraction) {
                return Err(input_error(format!(
                    "--hwd-fraction must lie in [0, 1], got {}",
                    args.hwd_fraction
                )));
            }
            synthetic_frequencies(
                &spec,
                n,
                SyntheticOptions {
                    region: args.region,
                    hwd_fraction: args.hwd_fraction,
                    ..SyntheticOptions::default()
                },
            )
        }
        (None, None) => return Err(input_error("one of --freqs or --synthetic is required")),
    };
    let options = args.tests.options(args.threshold);
    let populations: Vec<String> = spec.sizes.iter().map(|s| s.population.clone()).collect();
    let layout = options.layout(&populations)?;
    let header = spec.header();
    let out_path = args.out.clone();
    let records: Box<dyn Iterator<Item = Result<_, SimulateError>>> = match spec.protocol {
        NullProtocol::MultiPop => Box::new(simulate_multipop_null(spec, freqs)?),
        NullProtocol::BetweenPop => Box::new(simulate_betweenpop_null(spec, freqs)?),
    };
    with_output(out_path.as_deref(), |out| {
        writeln!(out, "{header}").context("writing simulation output")?;
        let summary = scan_records(records, &layout, &options, out, None)?;
        log::info!("simulated {} variants", summary.variants);
        Ok(())
    })
}

fn lambda(args: LambdaArgs) -> Result<()> {
    let table = ResultTable::load(&args.input)?;
    let columns: Vec<String> = if args.column.is_empty() {
        table
            .header
            .iter()
            .filter(|h| h.ends_with("_w"))
            .cloned()
            .collect()
    } else {
        args.column.clone()
    };
    if columns.is_empty() {
        return Err(input_error("no statistic columns (*_w) in the input"));
    }
    let mut lines = vec!["column\tdf\tinput\ttested\tlambda".to_string()];
    for column in &columns {
        let (prefix, is_p) = match (column.strip_suffix("_w"), column.strip_suffix("_p")) {
            (Some(p), _) => (p, false),
            (None, Some(p)) => (p, true),
            _ => {
                return Err(input_error(format!(
                    "column {column:?} must end in _w or _p"
                )))
            }
        };
        let df = match args.df {
            Some(df) => df,
            None => table.nominal_df(prefix)?,
        };
        // a varying df column means W values are not on one reference scale
        let varying_df = args.df.is_none() && df_varies(&table, prefix)?;
        let (name, input) = if is_p || varying_df {
            (format!("{prefix}_p"), LambdaInput::PValue)
        } else {
            (column.clone(), LambdaInput::Statistic)
        };
        let values = table.values(&name)?;
        let tested = values.iter().flatten().count();
        let lambda = if tested == 0 {
            NA.to_string()
        } else {
            format!("{:.6}", genomic_lambda(&values, df, input)?)
        };
        let kind = match input {
            LambdaInput::Statistic => "statistic",
            LambdaInput::PValue => "p",
        };
        lines.push(format!("{column}\t{df}\t{kind}\t{tested}\t{lambda}"));
    }
    with_output(None, |out| {
        for line in &lines {
            writeln!(out, "{line}")?;
        }
        Ok(())
    })
}

fn df_varies(table: &ResultTable, prefix: &str) -> Result<bool> {
    let name = format!("{prefix}_df");
    if table.column_index(&name).is_err() {
        return Ok(false);
    }
    let mut seen = table.text(&name)?.into_iter().filter(|t| *t != NA);
    let first = seen.next();
    Ok(seen.any(|t| Some(t) != first))
}

fn qq(args: QqArgs) -> Result<()> {
    if args.strata == 0 {
        return Err(input_error("--strata must be at least 1"));
    }
    let table = ResultTable::load(&args.input)?;
    let maf = table.values("maf")?;
    let nlp = table.neg_log10(&format!("{}_p", args.test))?;
    let rows: Vec<(f64, Option<f64>)> = maf
        .into_iter()
        .zip(nlp)
        .map(|(m, p)| (m.unwrap_or(f64::NAN), p))
        .collect();
    let df = table.nominal_df(&args.test)?;
    let strata = qq_export(&rows, args.strata, df)?;
    with_output(args.out.as_deref(), |out| Ok(write_qq(out, &strata)?))
}

fn miami(args: MiamiArgs) -> Result<()> {
    let table = ResultTable::load(&args.input)?;
    let chrom = table.text("chrom")?;
    let pos = table.text("pos")?;
    let region = table.text("region")?;
    let a = table.neg_log10(&format!("{}_p", args.a))?;
    let b = table.neg_log10(&format!("{}_p", args.b))?;
    let rows: Vec<MiamiRow> = (0..table.rows.len())
        .map(|i| MiamiRow {
            chrom: chrom[i].to_string(),
            pos: pos[i].to_string(),
            region: region[i].to_string(),
            a: a[i],
            b: b[i],
        })
        .collect();
    with_output(args.out.as_deref(), |out| {
        Ok(miami_export(out, &rows, &args.a, &args.b)?)
    })
}
