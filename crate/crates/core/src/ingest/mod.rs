//! Sample manifests, region maps and streaming VCF ingestion.

mod manifest;
mod regions;
mod vcf;

pub use manifest::{load_manifest, SampleManifest, Sex};
pub use regions::{load_region_map, RegionInterval, RegionMap};
pub use vcf::{
    stream_variants, MalformedPolicy, QcCounters, StratumExclusions, VariantRecord, VariantStream,
    VcfOptions,
};

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("manifest has no samples")]
    EmptyManifest,
    #[error("duplicate sample id {0:?} in manifest")]
    DuplicateSample(String),
    #[error("manifest line {line}: unknown sex token {token:?}")]
    UnknownSex { line: usize, token: String },
    #[error("region file line {line}: {message}")]
    Region { line: usize, message: String },
    #[error("region file line {line}: unknown label {label:?} (expected PAR, PAR<n> or NPR)")]
    UnknownRegionLabel { line: usize, label: String },
    #[error("overlapping intervals on {chrom}: {first:?} and {second:?}")]
    OverlappingIntervals {
        chrom: String,
        first: (u64, u64),
        second: (u64, u64),
    },
    #[error("VCF has no #CHROM header line")]
    MissingVcfHeader,
    #[error("VCF line {line} ({chrom}:{pos}): {message}")]
    MalformedVcf {
        line: usize,
        chrom: String,
        pos: String,
        message: String,
    },
}

/// Opens a text file, transparently decompressing gzip/bgzip input.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead + Send>, IngestError> {
    let open_err = |source| IngestError::Open {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::open(path).map_err(open_err)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(open_err)?;
    let file = File::open(path).map_err(open_err)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}
