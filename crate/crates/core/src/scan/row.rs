use std::fmt::Write as _;
use std::str::FromStr;

use super::format::{fmt_fixed, fmt_p, fmt_statistic, NA};
use crate::ingest::VariantRecord;
use crate::stats::{
    estimate_stratum, omnibus_diff_with_exclusions, sdmaf_multi, sdmaf_pair_diff, sdmaf_pooled,
    sdmaf_single, TestResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    Single,
    Multi,
    Pooled,
    PairDiff,
    Omnibus,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::Single,
        TestKind::Multi,
        TestKind::Pooled,
        TestKind::PairDiff,
        TestKind::Omnibus,
    ];
}

impl FromStr for TestKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" | "single-per-pop" => Ok(TestKind::Single),
            "multi" => Ok(TestKind::Multi),
            "pooled" => Ok(TestKind::Pooled),
            "pair" | "pair-diff" | "diff" => Ok(TestKind::PairDiff),
            "omnibus" | "omnibus-diff" => Ok(TestKind::Omnibus),
            other => Err(format!("unknown test {other:?}")),
        }
    }
}

/// Subset of tests to run. Parses from a comma-separated list or `all`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSet(Vec<TestKind>);

impl TestSet {
    pub fn all() -> Self {
        Self(TestKind::ALL.to_vec())
    }

    pub fn new(kinds: impl IntoIterator<Item = TestKind>) -> Self {
        let mut v: Vec<TestKind> = kinds.into_iter().collect();
        v.sort();
        v.dedup();
        Self(v)
    }

    pub fn contains(&self, kind: TestKind) -> bool {
        self.0.contains(&kind)
    }
}

impl Default for TestSet {
    fn default() -> Self {
        Self::all()
    }
}

impl FromStr for TestSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::all());
        }
        let kinds = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(TestKind::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        if kinds.is_empty() {
            return Err("no tests selected".into());
        }
        Ok(Self::new(kinds))
    }
}

/// Per-population estimates; `None` marks NA.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationStats {
    pub p_female: Option<f64>,
    pub p_male: Option<f64>,
    pub hwd_female: Option<f64>,
    pub hwd_male: Option<f64>,
    pub sdmaf: Option<f64>,
    pub single: Option<TestResult>,
}

/// Computed statistics for one variant. Tests that were not requested or
/// could not be evaluated are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub record: VariantRecord,
    pub populations: Vec<PopulationStats>,
    pub multi: Option<TestResult>,
    pub pooled: Option<TestResult>,
    pub pairs: Vec<Option<TestResult>>,
    pub omnibus: Option<TestResult>,
}

/// Column layout shared by every row of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultLayout {
    pub populations: Vec<String>,
    pub tests: TestSet,
    /// Population index pairs `(k, l)` tested as `d_k - d_l`.
    pub pairs: Vec<(usize, usize)>,
}

impl ResultLayout {
    /// Pairs each population against `baseline`, or every unordered pair
    /// when `all_pairs` is set.
    pub fn new(populations: Vec<String>, tests: TestSet, baseline: usize, all_pairs: bool) -> Self {
        let k = populations.len();
        let pairs = if !tests.contains(TestKind::PairDiff) {
            Vec::new()
        } else if all_pairs {
            (0..k)
                .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
                .collect()
        } else {
            (0..k)
                .filter(|&a| a != baseline)
                .map(|a| (a, baseline))
                .collect()
        };
        Self {
            populations,
            tests,
            pairs,
        }
    }

    pub fn pair_name(&self, (k, l): (usize, usize)) -> String {
        format!("diff_{}_vs_{}", self.populations[k], self.populations[l])
    }

    pub fn header(&self) -> String {
        let mut cols: Vec<String> = [
            "chrom", "pos", "id", "ref", "alt", "counted", "region", "maf",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for p in &self.populations {
            for suffix in [
                "female", "male", "pf", "pm", "hwd_f", "hwd_m", "nf", "nm", "sdmaf",
            ] {
                cols.push(format!("{p}_{suffix}"));
            }
            if self.tests.contains(TestKind::Single) {
                cols.push(format!("{p}_w"));
                cols.push(format!("{p}_p"));
            }
        }
        if self.tests.contains(TestKind::Multi) {
            cols.extend(["multi_w", "multi_df", "multi_p"].map(String::from));
        }
        if self.tests.contains(TestKind::Pooled) {
            cols.extend(["pooled_w", "pooled_p"].map(String::from));
        }
        for &pair in &self.pairs {
            let name = self.pair_name(pair);
            cols.push(format!("{name}_w"));
            cols.push(format!("{name}_p"));
        }
        if self.tests.contains(TestKind::Omnibus) {
            cols.extend(["omnibus_w", "omnibus_df", "omnibus_p"].map(String::from));
        }
        cols.join("\t")
    }

    pub fn compute(&self, record: VariantRecord) -> ResultRow {
        let region = record.region;
        let strata = &record.strata;
        debug_assert!(strata
            .iter()
            .zip(&self.populations)
            .all(|(s, p)| &s.population == p));
        let tests = &self.tests;
        let populations = strata
            .iter()
            .map(|pair| {
                let f = estimate_stratum(&pair.female).ok();
                let m = estimate_stratum(&pair.male).ok();
                let p_female = f.map(|e| e.p_hat);
                let p_male = m.map(|e| e.p_hat);
                PopulationStats {
                    p_female,
                    p_male,
                    hwd_female: f.and_then(|e| e.delta_hat),
                    hwd_male: m.and_then(|e| e.delta_hat),
                    sdmaf: p_female.zip(p_male).map(|(a, b)| a - b),
                    single: tests
                        .contains(TestKind::Single)
                        .then(|| sdmaf_single(pair, region).ok())
                        .flatten(),
                }
            })
            .collect();
        let run = |kind: TestKind, f: &dyn Fn() -> Option<TestResult>| {
            if tests.contains(kind) {
                f()
            } else {
                None
            }
        };
        let multi = run(TestKind::Multi, &|| sdmaf_multi(strata, region).ok());
        let pooled = run(TestKind::Pooled, &|| sdmaf_pooled(strata, region).ok());
        let omnibus = run(TestKind::Omnibus, &|| {
            omnibus_diff_with_exclusions(strata, region)
                .ok()
                .map(|o| o.result)
        });
        let pairs = self
            .pairs
            .iter()
            .map(|&(k, l)| sdmaf_pair_diff(&strata[k], &strata[l], region).ok())
            .collect();
        ResultRow {
            record,
            populations,
            multi,
            pooled,
            pairs,
            omnibus,
        }
    }

    pub fn format(&self, row: &ResultRow) -> String {
        let r = &row.record;
        let mut line = String::with_capacity(256);
        let _ = write!(
            line,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.chrom,
            r.pos,
            r.id,
            r.ref_allele,
            r.alt_allele,
            r.counted_allele(),
            r.region.as_str(),
            fmt_fixed(Some(r.whole_sample_maf()))
        );
        for (pair, stats) in r.strata.iter().zip(&row.populations) {
            let _ = write!(
                line,
                "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                pair.female,
                pair.male,
                fmt_fixed(stats.p_female),
                fmt_fixed(stats.p_male),
                fmt_fixed(stats.hwd_female),
                fmt_fixed(stats.hwd_male),
                pair.female.total(),
                pair.male.total(),
                fmt_fixed(stats.sdmaf)
            );
            if self.tests.contains(TestKind::Single) {
                push_wp(&mut line, stats.single.as_ref());
            }
        }
        if self.tests.contains(TestKind::Multi) {
            push_wdfp(&mut line, row.multi.as_ref());
        }
        if self.tests.contains(TestKind::Pooled) {
            push_wp(&mut line, row.pooled.as_ref());
        }
        for pair in &row.pairs {
            push_wp(&mut line, pair.as_ref());
        }
        if self.tests.contains(TestKind::Omnibus) {
            push_wdfp(&mut line, row.omnibus.as_ref());
        }
        line
    }
}

fn push_wp(line: &mut String, result: Option<&TestResult>) {
    match result {
        Some(r) => {
            let _ = write!(line, "\t{}\t{}", fmt_statistic(r.statistic), fmt_p(r));
        }
        None => line.push_str(&format!("\t{NA}\t{NA}")),
    }
}

fn push_wdfp(line: &mut String, result: Option<&TestResult>) {
    match result {
        Some(r) => {
            let _ = write!(
                line,
                "\t{}\t{}\t{}",
                fmt_statistic(r.statistic),
                r.df,
                fmt_p(r)
            );
        }
        None => line.push_str(&format!("\t{NA}\t{NA}\t{NA}")),
    }
}
