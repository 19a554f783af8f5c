use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use super::{open_text, IngestError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    /// Accepts `female`/`male` (any case), `F`/`M`, and the PLINK codes
    /// `1` (male) / `2` (female).
    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "female" | "f" | "2" => Some(Sex::Female),
            "male" | "m" | "1" => Some(Sex::Male),
            _ => None,
        }
    }
}

/// Sample identifiers mapped to sex and population. Populations are kept in
/// sorted order and referred to by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleManifest {
    samples: HashMap<String, (Sex, usize)>,
    populations: Vec<String>,
    sizes: Vec<(u64, u64)>,
}

impl SampleManifest {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut entries: Vec<(String, Sex, String)> = Vec::new();
        let mut seen_header = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !seen_header {
                let header: Vec<String> = fields.iter().map(|f| f.to_ascii_lowercase()).collect();
                if header.len() < 3
                    || header[0] != "sample_id"
                    || header[1] != "sex"
                    || header[2] != "population"
                {
                    return Err(IngestError::Manifest {
                        line: line_no,
                        message: "expected header `sample_id<TAB>sex<TAB>population`".into(),
                    });
                }
                seen_header = true;
                continue;
            }
            if fields.len() < 3 || fields[0].is_empty() || fields[2].is_empty() {
                return Err(IngestError::Manifest {
                    line: line_no,
                    message: "expected three tab-separated fields".into(),
                });
            }
            let sex = Sex::parse(fields[1]).ok_or_else(|| IngestError::UnknownSex {
                line: line_no,
                token: fields[1].to_string(),
            })?;
            entries.push((fields[0].to_string(), sex, fields[2].to_string()));
        }
        if entries.is_empty() {
            return Err(IngestError::EmptyManifest);
        }

        let mut pop_index: BTreeMap<&str, usize> =
            entries.iter().map(|(_, _, p)| (p.as_str(), 0)).collect();
        for (i, v) in pop_index.values_mut().enumerate() {
            *v = i;
        }
        let populations: Vec<String> = pop_index.keys().map(|p| p.to_string()).collect();
        let mut sizes = vec![(0u64, 0u64); populations.len()];
        let mut samples = HashMap::with_capacity(entries.len());
        for (id, sex, pop) in &entries {
            let k = pop_index[pop.as_str()];
            if samples.insert(id.clone(), (*sex, k)).is_some() {
                return Err(IngestError::DuplicateSample(id.clone()));
            }
            match sex {
                Sex::Female => sizes[k].0 += 1,
                Sex::Male => sizes[k].1 += 1,
            }
        }
        let manifest = Self {
            samples,
            populations,
            sizes,
        };
        for pop in manifest.untestable_populations() {
            log::warn!("population {pop} lacks females or males; its sdMAF tests are untestable");
        }
        Ok(manifest)
    }

    pub fn sample(&self, id: &str) -> Option<(Sex, usize)> {
        self.samples.get(id).copied()
    }

    pub fn populations(&self) -> &[String] {
        &self.populations
    }

    pub fn population_index(&self, label: &str) -> Option<usize> {
        self.populations.iter().position(|p| p == label)
    }

    /// `(females, males)` per population.
    pub fn stratum_sizes(&self) -> &[(u64, u64)] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Populations missing one of the two sexes.
    pub fn untestable_populations(&self) -> Vec<&str> {
        self.populations
            .iter()
            .zip(&self.sizes)
            .filter(|(_, (f, m))| *f == 0 || *m == 0)
            .map(|(p, _)| p.as_str())
            .collect()
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SampleManifest, IngestError> {
    SampleManifest::from_reader(open_text(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SampleManifest, IngestError> {
        SampleManifest::from_reader(text.as_bytes())
    }

    #[test]
    fn thousand_genomes_layout() {
        let sizes = [
            ("AFR", 342, 319),
            ("AMR", 177, 170),
            ("EAS", 260, 244),
            ("EUR", 263, 240),
            ("SAS", 229, 260),
        ];
        let mut text = String::from("sample_id\tsex\tpopulation\n");
        let mut n = 0;
        for (pop, f, m) in sizes {
            for _ in 0..f {
                text += &format!("S{n}\tfemale\t{pop}\n");
                n += 1;
            }
            for _ in 0..m {
                text += &format!("S{n}\t1\t{pop}\n");
                n += 1;
            }
        }
        let m = parse(&text).unwrap();
        assert_eq!(m.len(), 2504);
        assert_eq!(m.populations().len(), 5);
        let afr = m.population_index("AFR").unwrap();
        assert_eq!(m.stratum_sizes()[afr], (342, 319));
        assert!(m.untestable_populations().is_empty());
    }

    #[test]
    fn single_sample() {
        let m = parse("sample_id\tsex\tpopulation\nA\tM\tX1\n").unwrap();
        assert_eq!(m.populations(), ["X1"]);
        assert_eq!(m.untestable_populations(), vec!["X1"]);
    }

    #[test]
    fn rejects_duplicates_and_bad_tokens() {
        let dup = parse("sample_id\tsex\tpopulation\nA\tF\tP\nA\tM\tP\n");
        assert!(matches!(dup, Err(IngestError::DuplicateSample(id)) if id == "A"));
        let sex = parse("sample_id\tsex\tpopulation\nA\tunknown\tP\n");
        assert!(matches!(sex, Err(IngestError::UnknownSex { line: 2, .. })));
        assert!(matches!(parse(""), Err(IngestError::EmptyManifest)));
        assert!(matches!(
            parse("sample_id\tsex\tpopulation\n"),
            Err(IngestError::EmptyManifest)
        ));
        assert!(matches!(
            parse("id\tsex\n"),
            Err(IngestError::Manifest { .. })
        ));
    }

    #[test]
    fn sex_tokens() {
        for (tok, sex) in [
            ("Female", Sex::Female),
            ("MALE", Sex::Male),
            ("f", Sex::Female),
            ("M", Sex::Male),
            ("1", Sex::Male),
            ("2", Sex::Female),
        ] {
            assert_eq!(Sex::parse(tok), Some(sex));
        }
        assert_eq!(Sex::parse("0"), None);
    }
}
