//! Synthetic inputs shared by the criterion benchmarks in `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdmaf_core::{GenotypeCounts, PopulationStratumPair, RegionClass};

/// `k` populations with a few hundred individuals per stratum.
pub fn random_pairs(seed: u64, k: usize, region: RegionClass) -> Vec<PopulationStratumPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|i| {
            let mut draw = |haploid: bool| {
                let a = rng.random_range(20..200);
                let b = rng.random_range(20..200);
                if haploid {
                    GenotypeCounts::haploid(a, b)
                } else {
                    GenotypeCounts::diploid(a, b, rng.random_range(20..200))
                }
            };
            let female = draw(false);
            let male = draw(region == RegionClass::XNpr);
            PopulationStratumPair::new(format!("P{i}"), female, male)
        })
        .collect()
}

/// Manifest and VCF text with `populations` populations of `per_sex`
/// females and males each, and `variants` chrX biallelic SNPs.
pub fn synthetic_vcf(
    seed: u64,
    populations: usize,
    per_sex: usize,
    variants: usize,
) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = String::from("sample_id\tsex\tpopulation\n");
    let mut samples = Vec::new();
    for p in 0..populations {
        for sex in ["female", "male"] {
            for i in 0..per_sex {
                let id = format!("P{p}{}{i}", &sex[..1]);
                manifest.push_str(&format!("{id}\t{sex}\tP{p}\n"));
                samples.push((id, sex == "male"));
            }
        }
    }
    let mut vcf =
        String::from("##fileformat=VCFv4.2\n#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT");
    for (id, _) in &samples {
        vcf.push('\t');
        vcf.push_str(id);
    }
    vcf.push('\n');
    for v in 0..variants {
        let pos = 3_000_000 + 100 * v;
        vcf.push_str(&format!("chrX\t{pos}\tv{v}\tA\tG\t.\tPASS\t.\tGT"));
        let q: f64 = rng.random_range(0.1..0.5);
        for &(_, male) in &samples {
            let a = u8::from(rng.random_bool(q));
            if male {
                vcf.push_str(&format!("\t{a}"));
            } else {
                let b = u8::from(rng.random_bool(q));
                vcf.push_str(&format!("\t{a}|{b}"));
            }
        }
        vcf.push('\n');
    }
    (manifest, vcf)
}
