use std::io::BufRead;
use std::path::Path;

use super::{open_text, IngestError};
use crate::stats::RegionClass;

const GRCH38_DEFAULT: &str = include_str!("../../data/grch38_chrX_regions.bed");

/// Half-open, 0-based interval with its class and the label it was given
/// in the region file (e.g. `PAR1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionInterval {
    pub start: u64,
    pub end: u64,
    pub class: RegionClass,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ChromosomeRegions {
    name: String,
    intervals: Vec<RegionInterval>,
}

/// Classifies positions as autosomal, X-PAR or X-NPR.
///
/// Every chromosome named in the map is treated as X: positions inside a
/// listed interval take its class and uncovered positions are NPR. All other
/// chromosomes are autosomal. Chromosome names are compared without a
/// leading `chr`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionMap {
    chromosomes: Vec<ChromosomeRegions>,
}

fn normalize_chrom(name: &str) -> &str {
    let trimmed = name.trim();
    if trimmed.len() > 3 && trimmed[..3].eq_ignore_ascii_case("chr") {
        &trimmed[3..]
    } else {
        trimmed
    }
}

fn parse_label(label: &str) -> Option<RegionClass> {
    let upper = label.to_ascii_uppercase();
    match upper.as_str() {
        "NPR" => Some(RegionClass::XNpr),
        "PAR" => Some(RegionClass::XPar),
        _ if upper.starts_with("PAR") && upper[3..].chars().all(|c| c.is_ascii_digit()) => {
            Some(RegionClass::XPar)
        }
        _ => None,
    }
}

impl RegionMap {
    /// Every position autosomal.
    pub fn autosomal_only() -> Self {
        Self::default()
    }

    /// The bundled GRCh38 chromosome X map (PAR1, PAR2, NPR elsewhere).
    pub fn grch38_default() -> Self {
        Self::from_reader(GRCH38_DEFAULT.as_bytes()).expect("bundled region file is valid")
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut chromosomes: Vec<ChromosomeRegions> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            if fields.len() < 4 {
                return Err(IngestError::Region {
                    line: line_no,
                    message: "expected chrom, start, end, label".into(),
                });
            }
            let parse_pos = |s: &str| {
                s.parse::<u64>().map_err(|e| IngestError::Region {
                    line: line_no,
                    message: format!("bad coordinate {s:?}: {e}"),
                })
            };
            let (start, end) = (parse_pos(fields[1])?, parse_pos(fields[2])?);
            if end <= start {
                return Err(IngestError::Region {
                    line: line_no,
                    message: format!("empty interval [{start}, {end})"),
                });
            }
            let class = parse_label(fields[3]).ok_or_else(|| IngestError::UnknownRegionLabel {
                line: line_no,
                label: fields[3].to_string(),
            })?;
            let name = normalize_chrom(fields[0]);
            let interval = RegionInterval {
                start,
                end,
                class,
                label: fields[3].to_string(),
            };
            match chromosomes.iter_mut().find(|c| c.name == name) {
                Some(c) => c.intervals.push(interval),
                None => chromosomes.push(ChromosomeRegions {
                    name: name.to_string(),
                    intervals: vec![interval],
                }),
            }
        }
        for chrom in &mut chromosomes {
            chrom.intervals.sort_by_key(|iv| (iv.start, iv.end));
            for pair in chrom.intervals.windows(2) {
                if pair[1].start < pair[0].end {
                    return Err(IngestError::OverlappingIntervals {
                        chrom: chrom.name.clone(),
                        first: (pair[0].start, pair[0].end),
                        second: (pair[1].start, pair[1].end),
                    });
                }
            }
        }
        Ok(Self { chromosomes })
    }

    fn interval(&self, chrom: &str, pos0: u64) -> Option<Result<&RegionInterval, ()>> {
        let name = normalize_chrom(chrom);
        let regions = self.chromosomes.iter().find(|c| c.name == name)?;
        let idx = regions.intervals.partition_point(|iv| iv.start <= pos0);
        Some(
            idx.checked_sub(1)
                .map(|i| &regions.intervals[i])
                .filter(|iv| pos0 < iv.end)
                .ok_or(()),
        )
    }

    /// Class of a 1-based VCF position.
    pub fn classify(&self, chrom: &str, pos: u64) -> RegionClass {
        match self.interval(chrom, pos.saturating_sub(1)) {
            None => RegionClass::Autosomal,
            Some(Ok(iv)) => iv.class,
            Some(Err(())) => RegionClass::XNpr,
        }
    }

    /// Label of the interval containing a 1-based position, if any.
    pub fn band(&self, chrom: &str, pos: u64) -> Option<&str> {
        match self.interval(chrom, pos.saturating_sub(1)) {
            Some(Ok(iv)) => Some(iv.label.as_str()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.chromosomes.is_empty()
    }
}

/// Reads a region file; `None` yields an all-autosomal map.
pub fn load_region_map(path: Option<&Path>) -> Result<RegionMap, IngestError> {
    match path {
        None => Ok(RegionMap::autosomal_only()),
        Some(p) => RegionMap::from_reader(open_text(p)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_par_bands_and_npr() {
        let text = "chrX\t0\t2781479\tPAR1\nchrX\t88400000\t92400000\tPAR3\nchrX\t155701382\t156030895\tPAR2\n";
        let map = RegionMap::from_reader(text.as_bytes()).unwrap();
        assert_eq!(map.classify("chrX", 1), RegionClass::XPar);
        assert_eq!(map.band("X", 2_774_420), Some("PAR1"));
        assert_eq!(map.classify("X", 2_781_479), RegionClass::XPar);
        assert_eq!(map.classify("X", 2_781_480), RegionClass::XNpr);
        assert_eq!(map.band("chrX", 90_000_000), Some("PAR3"));
        assert_eq!(map.classify("chrX", 60_000_000), RegionClass::XNpr);
        assert_eq!(map.band("chrX", 60_000_000), None);
        assert_eq!(map.band("chrX", 156_000_000), Some("PAR2"));
        assert_eq!(map.classify("chr7", 60_000_000), RegionClass::Autosomal);
    }

    #[test]
    fn empty_file_is_autosomal() {
        let map = RegionMap::from_reader("# nothing\n\n".as_bytes()).unwrap();
        assert!(map.is_empty());
        assert_eq!(map.classify("X", 5), RegionClass::Autosomal);
        assert_eq!(load_region_map(None).unwrap(), RegionMap::autosomal_only());
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let text = "X\t0\t100\tPAR\nX\t50\t150\tNPR\n";
        assert!(matches!(
            RegionMap::from_reader(text.as_bytes()),
            Err(IngestError::OverlappingIntervals { .. })
        ));
        // abutting intervals are fine
        let ok = "X\t0\t100\tPAR\nX\t100\t150\tNPR\n";
        assert!(RegionMap::from_reader(ok.as_bytes()).is_ok());
    }

    #[test]
    fn unknown_label_rejected() {
        assert!(matches!(
            RegionMap::from_reader("X\t0\t100\tXTR\n".as_bytes()),
            Err(IngestError::UnknownRegionLabel { line: 1, .. })
        ));
    }

    #[test]
    fn bundled_grch38_map() {
        let map = RegionMap::grch38_default();
        assert_eq!(map.classify("chrX", 2_774_420), RegionClass::XPar);
        assert_eq!(map.classify("chrX", 10_000), RegionClass::XNpr);
        assert_eq!(map.classify("chrX", 100_000_000), RegionClass::XNpr);
        assert_eq!(map.classify("chrX", 155_800_000), RegionClass::XPar);
        assert_eq!(map.classify("chr7", 155_800_000), RegionClass::Autosomal);
    }
}
