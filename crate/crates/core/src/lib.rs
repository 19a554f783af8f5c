//! Tests for sex differences in minor allele frequency (sdMAF) across one or
//! many ancestral populations, for autosomal, X-PAR and X-NPR variants.
//!
//! [`stats`] holds the estimators and Wald tests, [`ingest`] reads manifests,
//! region maps and VCFs, [`simulate`] generates null data and [`scan`] ties
//! them together into per-variant result tables.

pub mod ingest;
pub mod scan;
pub mod simulate;
pub mod stats;

pub use ingest::{
    load_manifest, load_region_map, stream_variants, IngestError, MalformedPolicy, RegionMap,
    SampleManifest, Sex, VariantRecord, VcfOptions,
};
pub use scan::{run_scan, ScanConfig, ScanError, ScanOptions, ScanSummary, TestKind, TestSet};
pub use simulate::{
    simulate_betweenpop_null, simulate_multipop_null, NullProtocol, NullSpec, SimulateError,
    StratumSizes, VariantFreqs,
};
pub use stats::{
    chisq_sf, estimate_stratum, sdmaf_multi, sdmaf_omnibus_diff, sdmaf_pair_diff, sdmaf_pooled,
    sdmaf_single, variance_term, GenotypeCounts, Ploidy, PopulationStratumPair, RegionClass,
    StatsError, StratumEstimate, TestResult,
};
