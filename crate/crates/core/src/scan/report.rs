use std::io::{BufRead, Write};
use std::path::Path;

use super::format::{fmt_fixed, parse_neg_log10, parse_value, NA};
use super::ScanError;
use crate::ingest::open_text;
use crate::stats::{chisq_isf, chisq_median};

/// Whether [`genomic_lambda`] receives statistics or p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaInput {
    Statistic,
    PValue,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Genomic-control inflation `median(W) / median(chi2_df)`. p-values are
/// mapped to statistics through the inverse survival function first. NA
/// entries are ignored.
pub fn genomic_lambda(
    values: &[Option<f64>],
    df: u32,
    input: LambdaInput,
) -> Result<f64, ScanError> {
    let mut stats = Vec::with_capacity(values.len());
    for v in values.iter().flatten() {
        stats.push(match input {
            LambdaInput::Statistic => *v,
            LambdaInput::PValue => chisq_isf(v.clamp(f64::MIN_POSITIVE, 1.0), df)?,
        });
    }
    if stats.is_empty() {
        return Err(ScanError::Input(
            "no non-NA values to compute lambda from".into(),
        ));
    }
    Ok(median(&mut stats) / chisq_median(df)?)
}

/// Kolmogorov-Smirnov distance between a sample and Uniform(0, 1).
pub fn ks_uniform_distance(p_values: &[f64]) -> f64 {
    let mut p = p_values.to_vec();
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &x)| {
            let i = i as f64;
            ((i + 1.0) / n - x).max(x - i / n)
        })
        .fold(0.0, f64::max)
}

/// One QQ point on the `-log10` scale.
#[derive(Debug, Clone, PartialEq)]
pub struct QqPoint {
    pub expected: f64,
    pub observed: f64,
}

/// QQ data for one set of variants.
#[derive(Debug, Clone, PartialEq)]
pub struct QqStratum {
    /// `all`, or `q1`, `q2`, ... in increasing MAF.
    pub label: String,
    pub maf_low: f64,
    pub maf_high: f64,
    pub lambda: f64,
    pub points: Vec<QqPoint>,
}

fn qq_stratum(label: String, entries: &[(f64, f64)], df: u32) -> Result<QqStratum, ScanError> {
    // entries: (maf, -log10 p)
    let n = entries.len();
    let mut observed: Vec<f64> = entries.iter().map(|e| e.1).collect();
    observed.sort_by(|a, b| b.total_cmp(a));
    let points = observed
        .into_iter()
        .enumerate()
        .map(|(i, obs)| QqPoint {
            expected: -((i + 1) as f64 / (n + 1) as f64).log10(),
            observed: obs,
        })
        .collect();
    let p: Vec<Option<f64>> = entries.iter().map(|e| Some(10f64.powf(-e.1))).collect();
    let (lo, hi) = entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.0), hi.max(e.0))
        });
    Ok(QqStratum {
        label,
        maf_low: lo,
        maf_high: hi,
        lambda: genomic_lambda(&p, df, LambdaInput::PValue)?,
        points,
    })
}

/// QQ data for all variants and for `strata` equal-sized sets split on
/// whole-sample MAF. Input is `(maf, -log10 p)`; NA p-values are dropped.
pub fn qq_export(
    rows: &[(f64, Option<f64>)],
    strata: usize,
    df: u32,
) -> Result<Vec<QqStratum>, ScanError> {
    let mut entries: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|&(maf, nlp)| nlp.map(|v| (maf, v)))
        .collect();
    if entries.is_empty() {
        return Err(ScanError::Input(
            "no non-NA p-values for the QQ export".into(),
        ));
    }
    let mut out = vec![qq_stratum("all".into(), &entries, df)?];
    if strata > 1 {
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = entries.len();
        for s in 0..strata {
            let (lo, hi) = (s * n / strata, (s + 1) * n / strata);
            if hi > lo {
                out.push(qq_stratum(format!("q{}", s + 1), &entries[lo..hi], df)?);
            }
        }
    }
    Ok(out)
}

pub fn write_qq<W: Write>(mut out: W, strata: &[QqStratum]) -> std::io::Result<()> {
    writeln!(
        out,
        "stratum\tmaf_low\tmaf_high\tlambda\trank\texpected\tobserved"
    )?;
    for s in strata {
        for (i, p) in s.points.iter().enumerate() {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{:.6}\t{:.6}",
                s.label,
                s.maf_low,
                s.maf_high,
                s.lambda,
                i + 1,
                p.expected,
                p.observed
            )?;
        }
    }
    Ok(())
}

/// `-log10 p` values above this are shown as is; smaller ones (p > 0.1)
/// are raised to it.
pub const MIAMI_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MiamiRow {
    pub chrom: String,
    pub pos: String,
    pub region: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

pub fn miami_display(neg_log10_p: Option<f64>) -> Option<f64> {
    neg_log10_p.map(|v| v.max(MIAMI_FLOOR))
}

pub fn miami_export<W: Write>(
    mut out: W,
    rows: &[MiamiRow],
    test_a: &str,
    test_b: &str,
) -> std::io::Result<()> {
    writeln!(
        out,
        "chrom\tpos\tregion\t{test_a}_nlp\t{test_a}_display\t{test_b}_nlp\t{test_b}_display"
    )?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.chrom,
            r.pos,
            r.region,
            fmt_fixed(r.a),
            fmt_fixed(miami_display(r.a)),
            fmt_fixed(r.b),
            fmt_fixed(miami_display(r.b))
        )?;
    }
    Ok(())
}

/// A scan result table held as text.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    /// Reads a result TSV; leading `#` lines are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, ScanError> {
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ScanError::Input(e.to_string()))?;
            if line.is_empty() || (header.is_none() && line.starts_with('#')) {
                continue;
            }
            let fields: Vec<String> = line.split('\t').map(String::from).collect();
            match &header {
                None => header = Some(fields),
                Some(h) if h.len() != fields.len() => {
                    return Err(ScanError::Input(format!(
                        "line {}: expected {} columns, found {}",
                        i + 1,
                        h.len(),
                        fields.len()
                    )))
                }
                Some(_) => rows.push(fields),
            }
        }
        let header = header.ok_or_else(|| ScanError::Input("result table is empty".into()))?;
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self, ScanError> {
        Self::from_reader(open_text(path)?)
    }

    pub fn column_index(&self, name: &str) -> Result<usize, ScanError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ScanError::Input(format!("column {name:?} not found")))
    }

    pub fn text(&self, name: &str) -> Result<Vec<&str>, ScanError> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn values(&self, name: &str) -> Result<Vec<Option<f64>>, ScanError> {
        Ok(self.text(name)?.into_iter().map(parse_value).collect())
    }

    pub fn neg_log10(&self, name: &str) -> Result<Vec<Option<f64>>, ScanError> {
        Ok(self.text(name)?.into_iter().map(parse_neg_log10).collect())
    }

    /// Degrees of freedom for a test prefix: the largest value in its `_df`
    /// column when there is one, otherwise 1.
    pub fn nominal_df(&self, test: &str) -> Result<u32, ScanError> {
        let name = format!("{test}_df");
        if self.column_index(&name).is_err() {
            return Ok(1);
        }
        Ok(self
            .text(&name)?
            .into_iter()
            .filter(|t| *t != NA)
            .filter_map(|t| t.parse::<u32>().ok())
            .max()
            .unwrap_or(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_trivial_cases() {
        let m = chisq_median(1).unwrap();
        let v = vec![Some(m); 11];
        assert!((genomic_lambda(&v, 1, LambdaInput::Statistic).unwrap() - 1.0).abs() < 1e-12);
        let zeros = vec![Some(0.0); 5];
        assert_eq!(
            genomic_lambda(&zeros, 1, LambdaInput::Statistic).unwrap(),
            0.0
        );
        assert!(genomic_lambda(&[None, None], 1, LambdaInput::Statistic).is_err());
        let half = vec![Some(0.5), None, Some(0.5)];
        assert!((genomic_lambda(&half, 3, LambdaInput::PValue).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn qq_expected_quantiles() {
        let rows: Vec<(f64, Option<f64>)> = [0.5, 0.25, 0.125]
            .iter()
            .map(|p: &f64| (0.1, Some(-p.log10())))
            .collect();
        let qq = qq_export(&rows, 1, 1).unwrap();
        assert_eq!(qq.len(), 1);
        let pts = &qq[0].points;
        for (pt, (e, o)) in pts.iter().zip([(0.25, 0.125), (0.5, 0.25), (0.75, 0.5)]) {
            assert!((pt.expected - -f64::log10(e)).abs() < 1e-12);
            assert!((pt.observed - -f64::log10(o)).abs() < 1e-12);
        }
    }

    #[test]
    fn qq_quartiles_split_on_maf() {
        let rows: Vec<(f64, Option<f64>)> = (0..100)
            .map(|i| (0.05 + 0.0045 * ((i * 37) % 100) as f64, Some(0.3)))
            .collect();
        let qq = qq_export(&rows, 4, 1).unwrap();
        assert_eq!(qq.len(), 5);
        for w in qq[1..].windows(2) {
            assert!(w[0].maf_high < w[1].maf_low);
            assert_eq!(w[0].points.len(), 25);
        }
        assert!(qq_export(&[(0.1, None)], 4, 1).is_err());
    }

    #[test]
    fn miami_truncation() {
        assert_eq!(miami_display(Some(-(0.5f64).log10())), Some(1.0));
        let d = miami_display(Some(-(5e-8f64).log10())).unwrap();
        assert!((d - 7.30103).abs() < 1e-5);
        assert_eq!(miami_display(None), None);
        let mut buf = Vec::new();
        let rows = vec![MiamiRow {
            chrom: "X".into(),
            pos: "5".into(),
            region: "PAR".into(),
            a: None,
            b: Some(0.2),
        }];
        miami_export(&mut buf, &rows, "multi", "pooled").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("X\t5\tPAR\tNA\tNA\t0.200000\t1.000000\n"));
    }

    #[test]
    fn ks_distance() {
        let grid: Vec<f64> = (1..=1000).map(|i| (i as f64 - 0.5) / 1000.0).collect();
        assert!((ks_uniform_distance(&grid) - 0.0005).abs() < 1e-12);
        assert!((ks_uniform_distance(&[0.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_reader() {
        let text = "# protocol=multipop\na\tb_df\tb_p\n1\t2\t1.00000e-03\n2\tNA\tNA\n";
        let t = ResultTable::from_reader(text.as_bytes()).unwrap();
        assert_eq!(t.values("a").unwrap(), vec![Some(1.0), Some(2.0)]);
        assert_eq!(t.nominal_df("b").unwrap(), 2);
        assert_eq!(t.nominal_df("a").unwrap(), 1);
        assert!((t.neg_log10("b_p").unwrap()[0].unwrap() - 3.0).abs() < 1e-12);
        assert!(t.column_index("zzz").is_err());
        assert!(ResultTable::from_reader("a\tb\n1\n".as_bytes()).is_err());
    }
}
