use std::io::Cursor;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use sdmaf_bench::synthetic_vcf;
use sdmaf_core::ingest::{RegionMap, SampleManifest, VariantStream};
use sdmaf_core::VcfOptions;

fn stream(c: &mut Criterion) {
    let variants = 2000;
    let (manifest, vcf) = synthetic_vcf(5, 5, 250, variants);
    let manifest = SampleManifest::from_reader(manifest.as_bytes()).unwrap();
    let mut g = c.benchmark_group("ingest");
    g.throughput(Throughput::Bytes(vcf.len() as u64));
    g.sample_size(20);
    g.bench_function("vcf_2500_samples", |b| {
        b.iter(|| {
            let stream = VariantStream::new(
                Cursor::new(vcf.as_bytes()),
                &manifest,
                RegionMap::grch38_default(),
                VcfOptions::default(),
            )
            .unwrap();
            let n = stream.map(Result::unwrap).count();
            assert_eq!(n, variants);
        })
    });
    g.finish();
}

criterion_group!(benches, stream);
criterion_main!(benches);
