use std::io::{BufRead, Write};

use super::{SimulateError, SourceFreqs, VariantFreqs};
use crate::stats::RegionClass;

/// Population label of the whole-sample row.
pub const POOLED_LABEL: &str = "ALL";

const HEADER: [&str; 9] = [
    "id",
    "region",
    "population",
    "f0",
    "f1",
    "f2",
    "m0",
    "m1",
    "m2",
];

/// Long-format table, one row per variant and population. Values are
/// written with round-trip precision.
pub fn write_frequency_table<'a, W, I>(mut out: W, variants: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a VariantFreqs>,
{
    writeln!(out, "{}", HEADER.join("\t"))?;
    write_frequency_rows(out, variants)
}

/// The body of [`write_frequency_table`] without its header line.
pub fn write_frequency_rows<'a, W, I>(mut out: W, variants: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a VariantFreqs>,
{
    for v in variants {
        for (label, s) in &v.sources {
            write!(out, "{}\t{}\t{}", v.id, v.region.as_str(), label)?;
            for x in s.female.iter().chain(&s.male) {
                write!(out, "\t{x}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Reads the table written by [`write_frequency_table`]. Consecutive rows
/// sharing an id form one variant.
pub fn read_frequency_table<R: BufRead>(reader: R) -> Result<Vec<VariantFreqs>, SimulateError> {
    let mut variants: Vec<VariantFreqs> = Vec::new();
    let mut header_seen = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let err = |message: String| SimulateError::Table {
            line: line_no,
            message,
        };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !header_seen {
            if fields != HEADER {
                return Err(err(format!("expected header {:?}", HEADER.join(" "))));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != HEADER.len() {
            return Err(err(format!("expected {} columns", HEADER.len())));
        }
        let region: RegionClass = fields[1]
            .parse()
            .map_err(|_| err(format!("unknown region {:?}", fields[1])))?;
        let mut values = [0.0; 6];
        for (v, text) in values.iter_mut().zip(&fields[3..]) {
            *v = text
                .parse()
                .map_err(|_| err(format!("bad frequency {text:?}")))?;
        }
        let source = SourceFreqs {
            female: [values[0], values[1], values[2]],
            male: [values[3], values[4], values[5]],
        };
        let entry = (fields[2].to_string(), source);
        match variants.last_mut() {
            Some(v) if v.id == fields[0] => {
                if v.region != region {
                    return Err(err("region changes within a variant".into()));
                }
                v.sources.push(entry);
            }
            _ => variants.push(VariantFreqs {
                id: fields[0].to_string(),
                region,
                sources: vec![entry],
            }),
        }
    }
    if !header_seen {
        return Err(SimulateError::Table {
            line: 0,
            message: "empty frequency table".into(),
        });
    }
    Ok(variants)
}

#[cfg(test)]
mod tests {
    use super::super::{
        synthetic_frequencies, NullProtocol, NullSpec, StratumSizes, SyntheticOptions,
    };
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let spec = NullSpec::new(
            NullProtocol::MultiPop,
            vec![StratumSizes::new("A", 1, 1), StratumSizes::new("B", 1, 1)],
            8,
        )
        .unwrap();
        let table = synthetic_frequencies(
            &spec,
            20,
            SyntheticOptions {
                region: RegionClass::XNpr,
                ..Default::default()
            },
        );
        let mut buf = Vec::new();
        write_frequency_table(&mut buf, &table).unwrap();
        let back = read_frequency_table(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_frequency_table("".as_bytes()).is_err());
        assert!(read_frequency_table("id\tregion\n".as_bytes()).is_err());
        let h = HEADER.join("\t");
        let bad = format!("{h}\nv\tAUTO\tP\t0.5\t0.5\t0\t0.5\t0.5\n");
        assert!(matches!(
            read_frequency_table(bad.as_bytes()),
            Err(SimulateError::Table { line: 2, .. })
        ));
        let bad = format!("{h}\nv\tMT\tP\t0.5\t0.5\t0\t0.5\t0.5\t0\n");
        assert!(read_frequency_table(bad.as_bytes()).is_err());
    }
}
