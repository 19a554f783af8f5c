use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn sdmaf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdmaf"))
        .args(args)
        .output()
        .expect("run sdmaf")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn scan_golden(out: &Path, extra: &[&str]) -> Output {
    let vcf = data("golden.vcf");
    let manifest = data("golden_manifest.tsv");
    let mut args = vec![
        "scan",
        "--vcf",
        vcf.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    sdmaf(&args)
}

#[test]
fn scan_matches_golden_and_writes_side_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res.tsv");
    let run = scan_golden(&out, &["--workers", "3"]);
    ok(&run);
    let expected = fs::read_to_string(data("golden_expected.tsv")).unwrap();
    assert_eq!(fs::read_to_string(&out).unwrap(), expected);
    for side in ["summary", "discordant", "qc", "freqs"] {
        assert!(
            dir.path().join(format!("res.{side}.tsv")).exists(),
            "{side}"
        );
    }
    let summary = stdout(&run);
    assert!(summary.starts_with("test\tdf\ttested\tsignificant\tlambda\n"));
    assert!(summary.contains("multi_only\t.\t.\t1\t."));
    let discordant = fs::read_to_string(dir.path().join("res.discordant.tsv")).unwrap();
    assert!(discordant
        .lines()
        .any(|l| l.starts_with("multi_only\tchr4\t4242\tg12\t")));
}

#[test]
fn simulate_is_reproducible_and_records_its_settings() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("a.tsv");
    let gz = dir.path().join("b.tsv.gz");
    for path in [&plain, &gz] {
        ok(&sdmaf(&[
            "simulate",
            "--protocol",
            "multipop",
            "--synthetic",
            "200",
            "--seed",
            "7",
            "--sizes",
            "A:50:40,B:30:60",
            "--region",
            "NPR",
            "--out",
            path.to_str().unwrap(),
        ]));
    }
    let text = fs::read_to_string(&plain).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("# protocol=multipop seed=7 sizes=A:50:40,B:30:60")
    );
    assert!(lines.next().unwrap().starts_with("chrom\tpos\tid"));
    assert_eq!(text.lines().count(), 202);
    assert!(text
        .lines()
        .skip(2)
        .all(|l| l.split('\t').nth(6) == Some("NPR")));
    assert_eq!(&fs::read(&gz).unwrap()[..2], &[0x1f, 0x8b]);

    let lambda = |path: &Path| {
        let run = sdmaf(&["lambda", "--input", path.to_str().unwrap()]);
        ok(&run);
        stdout(&run)
    };
    let from_plain = lambda(&plain);
    assert_eq!(from_plain, lambda(&gz));
    assert!(from_plain
        .lines()
        .any(|l| l.starts_with("multi_w\t2\tstatistic\t200\t")));
}

#[test]
fn simulate_reads_the_scan_frequency_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res.tsv");
    ok(&scan_golden(&out, &[]));
    let freqs = dir.path().join("res.freqs.tsv");
    let run = sdmaf(&[
        "simulate",
        "--protocol",
        "betweenpop",
        "--freqs",
        freqs.to_str().unwrap(),
        "--sizes",
        "AFR:12:10,EUR:9:11",
        "--seed",
        "3",
    ]);
    ok(&run);
    let text = stdout(&run);
    assert!(text.starts_with("# protocol=betweenpop seed=3 sizes=AFR:12:10,EUR:9:11\n"));
    let ids: Vec<&str> = text
        .lines()
        .skip(2)
        .map(|l| l.split('\t').nth(2).unwrap())
        .collect();
    let expected: Vec<String> = (1..=12).map(|i| format!("g{i}")).collect();
    assert_eq!(ids, expected);
}

#[test]
fn report_commands_read_scan_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res.tsv.gz");
    ok(&scan_golden(&out, &[]));
    let input = out.to_str().unwrap();

    let lambda = sdmaf(&[
        "lambda", "--input", input, "--column", "multi_p", "--df", "2",
    ]);
    ok(&lambda);
    let lines: Vec<String> = stdout(&lambda).lines().map(String::from).collect();
    assert_eq!(lines[0], "column\tdf\tinput\ttested\tlambda");
    assert!(lines[1].starts_with("multi_p\t2\tp\t11\t"), "{}", lines[1]);

    let qq_path = dir.path().join("qq.tsv");
    ok(&sdmaf(&[
        "qq",
        "--input",
        input,
        "--strata",
        "2",
        "--out",
        qq_path.to_str().unwrap(),
    ]));
    let qq = fs::read_to_string(&qq_path).unwrap();
    let strata: Vec<&str> = qq
        .lines()
        .skip(1)
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(strata.iter().filter(|s| **s == "all").count(), 11);
    assert_eq!(strata.iter().filter(|s| **s != "all").count(), 11);

    let miami = sdmaf(&["miami", "--input", input, "--a", "multi", "--b", "pooled"]);
    ok(&miami);
    let text = stdout(&miami);
    assert!(text
        .starts_with("chrom\tpos\tregion\tmulti_nlp\tmulti_display\tpooled_nlp\tpooled_display\n"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn exit_codes_separate_input_and_internal_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = sdmaf(&[
        "scan",
        "--vcf",
        "missing.vcf",
        "--manifest",
        "missing.tsv",
        "--out",
        "x.tsv",
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));

    assert_eq!(sdmaf(&["scan", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        sdmaf(&["simulate", "--protocol", "sideways", "--synthetic", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        sdmaf(&[
            "simulate",
            "--protocol",
            "multipop",
            "--synthetic",
            "1",
            "--sizes",
            "A:0:3"
        ])
        .status
        .code(),
        Some(1)
    );

    let out = dir.path().join("res.tsv");
    assert_eq!(
        scan_golden(&out, &["--baseline", "XYZ"]).status.code(),
        Some(1)
    );
    assert_eq!(
        scan_golden(&out, &["--threshold", "2"]).status.code(),
        Some(1)
    );

    let unwritable = dir.path().join("no/such/dir/res.tsv");
    assert_eq!(scan_golden(&unwritable, &[]).status.code(), Some(2));

    assert_eq!(sdmaf(&["--help"]).status.code(), Some(0));
}
