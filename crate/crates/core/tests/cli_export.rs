use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use rug::ops::Pow;
use rug::Float;

use modgen::cache::{cache_key, Cache};
use modgen::config::{ReferenceKind, RunConfig};
use modgen::export::{parse_matrix_csv, read_matrix, read_slice, sha256_hex, slice_csv, write_matrix};
use modgen::linalg::{BigMatrix, Precision};
use modgen::pipeline::{compute_modular, PipelineOptions};
use modgen::runner::{compare, run, slice_from_run, RunManifest, RunOptions};
use modgen::smearing::{LineKind, Part};
use modgen::Error;

const TINY: &str = r#"
name = "tiny"
[geometry]
ambient = "cylinder"
period = 4.0
intervals = [[-1.0, 1.0]]
[kernel]
xi = 1
masses = [0.0, 1.0]
[grid]
n = 16
[[slices]]
line = "diagonal"
offset = 1
parts = ["sym", "skew"]
[[slices]]
line = "cross"
offset = 2.0
[references]
kinds = ["cylinder_cones"]
"#;

fn tiny_config(dir: &Path) -> RunConfig {
    let mut c = RunConfig::from_toml_str(TINY).unwrap();
    c.out_dir = dir.join("runs");
    c.cache_dir = dir.join("cache");
    c
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_modgen"));
    c.env("RUST_LOG", "warn").env_remove("MODGEN_CACHE");
    c
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn matrix_csv_round_trip_is_bit_exact(
        digits in 10u32..200,
        nums in prop::collection::vec((-1e6f64..1e6, 1u32..1000, -300i32..300), 1..12),
    ) {
        let p = Precision::digits(digits);
        let rows = nums.len();
        // Quotients and powers fill the whole mantissa.
        let m = BigMatrix::from_fn(rows, 2, p, |i, j| {
            let (a, b, e) = nums[i];
            let mut x = Float::with_val(p.bits(), a) / b;
            if j == 1 {
                x *= Float::with_val(p.bits(), 10u32).pow(e);
            }
            x
        });
        let text = modgen::export::matrix_csv(&m, &[("note", "x".into())]);
        let back = parse_matrix_csv(&text, Path::new("m.csv")).unwrap();
        prop_assert!(back == m);
    }
}

#[test]
fn runs_are_reproducible_and_cached() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let first = run(&config, &RunOptions::default()).unwrap();
    assert!(first.iter().all(|r| !r.manifest.cache_hit));
    let m0 = first[0].dir.clone();
    let snapshot: Vec<(PathBuf, Vec<u8>)> = files_under(&m0)
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            let b = fs::read(&p).unwrap();
            (p, b)
        })
        .collect();
    assert!(snapshot.len() >= 8);

    let second = run(&config, &RunOptions::default()).unwrap();
    for r in &second {
        assert!(r.manifest.cache_hit);
        assert_eq!(r.manifest.timings.pipeline_total, 0.0);
        assert_eq!(r.manifest.timings.pipeline.artanh, 0.0);
    }
    for (p, bytes) in &snapshot {
        assert_eq!(&fs::read(p).unwrap(), bytes, "{} changed between runs", p.display());
    }

    // Cached and fresh matrices agree bit for bit.
    let grid = config.grid().unwrap();
    let kernel = config.kernel(1.0).unwrap();
    let fresh = compute_modular(&grid, &kernel, &PipelineOptions::default()).unwrap();
    let cached = Cache::new(&config.cache_dir).load(&cache_key(&kernel, &grid)).unwrap().unwrap();
    assert!(cached.s == fresh.s && cached.aq == fresh.aq && cached.b == fresh.b);
    assert!(cached.m_minus == fresh.m_minus && cached.m_plus == fresh.m_plus);
    assert_eq!(cached.spectral_margin.value(), fresh.spectral_margin.value());
    assert!(read_matrix(&second[1].dir.join("m_minus.csv")).unwrap() == fresh.m_minus);

    let forced = run(&config, &RunOptions { force: true }).unwrap();
    assert!(forced.iter().all(|r| !r.manifest.cache_hit && r.manifest.timings.pipeline_total > 0.0));
}

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let runs = run(&config, &RunOptions::default()).unwrap();
    for r in &runs {
        let m = manifest(&r.dir);
        assert_eq!(m.files, r.manifest.files);
        let listed: Vec<PathBuf> = m.files.iter().map(|f| r.dir.join(&f.path)).collect();
        let mut on_disk = files_under(&r.dir);
        on_disk.retain(|p| !p.ends_with("manifest.json"));
        assert_eq!(listed, on_disk);
        for f in &m.files {
            assert_eq!(f.sha256, sha256_hex(&fs::read(r.dir.join(&f.path)).unwrap()));
        }
        assert!(m.invariants.hold);
    }
    // Different physics gives different outputs, hence different hashes.
    let hash = |r: &modgen::runner::MassRun, name: &str| {
        r.manifest.files.iter().find(|f| f.path == name).unwrap().sha256.clone()
    };
    assert_ne!(hash(&runs[0], "m_minus.csv"), hash(&runs[1], "m_minus.csv"));
    assert_eq!(hash(&runs[0], "run.json").len(), 64);
}

#[test]
fn compare_and_slice_read_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let runs = run(&config, &RunOptions::default()).unwrap();
    let reports = compare(&dir.path().join("runs/tiny"), ReferenceKind::CylinderCones).unwrap();
    assert_eq!(reports.len(), 2);
    let skew = reports[0].slices.iter().find(|s| s.line == "diagonal+1" && s.part == "skew").unwrap();
    assert!(skew.counted > 0 && skew.max_rel_dev.is_some());
    let sym = reports[0].slices.iter().find(|s| s.part == "sym").unwrap();
    assert_eq!(sym.reference_norm, 0.0);
    assert!(runs[0].dir.join("compare/cylinder_cones/diagonal+1_skew.csv").is_file());

    let err = compare(&runs[0].dir, ReferenceKind::Wedge).unwrap_err();
    assert!(matches!(err, Error::MissingArtifact(_)));
    assert_eq!(err.exit_code(), 5);

    let s = slice_from_run(&runs[0].dir, LineKind::DiagonalOffset { offset: 1 }, Part::Skew).unwrap();
    let stored = fs::read_to_string(runs[0].dir.join("slices/diagonal+1_skew.csv")).unwrap();
    assert_eq!(slice_csv(&s), stored);
    let t = read_slice(&runs[0].dir.join("slices/diagonal+1_skew.csv"), Precision::digits(24)).unwrap();
    assert_eq!(t.abscissa, s.abscissa);
    assert_eq!(t.line, "diagonal+1");
}

#[test]
fn io_failure_is_exit_six() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let m = BigMatrix::identity(2, Precision::digits(10));
    let err = write_matrix(&blocker.join("m.csv"), &m, &[]).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 6);
}

#[test]
fn command_line_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("runs");
    let cache = dir.path().join("cache");
    let arg = |p: &Path| p.to_str().unwrap().to_string();

    let status = |c: &mut Command| c.output().unwrap().status.code().unwrap();
    assert_eq!(status(bin().args(["run", "--config", &arg(&cfg), "--out", &arg(&out), "--cache", &arg(&cache)])), 0);
    assert!(out.join("tiny/m0/manifest.json").is_file());

    // Cache directory from the environment.
    let env_cache = dir.path().join("env-cache");
    let code = status(
        bin()
            .env("MODGEN_CACHE", &env_cache)
            .args(["run", "--config", &arg(&cfg), "--out", &arg(&dir.path().join("runs2"))]),
    );
    assert_eq!(code, 0);
    assert_eq!(fs::read_dir(&env_cache).unwrap().count(), 2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, TINY.replace("n = 16", "n = 15")).unwrap();
    assert_eq!(status(bin().args(["run", "--config", &arg(&bad), "--out", &arg(&out)])), 2);
    assert_eq!(status(bin().args(["run", "--config", "/nonexistent.toml"])), 2);

    let low = bin()
        .args(["run", "--config", &arg(&cfg), "--out", &arg(&out), "--cache", &arg(&cache), "--digits", "10"])
        .output()
        .unwrap();
    assert_eq!(low.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&low.stderr).contains("spectrum out of range"));

    let run_dir = out.join("tiny");
    assert_eq!(status(bin().args(["compare", "--run", &arg(&run_dir), "--reference", "cylinder_cones"])), 0);
    assert_eq!(status(bin().args(["compare", "--run", &arg(&run_dir), "--reference", "wedge"])), 5);
    assert_eq!(status(bin().args(["compare", "--run", &arg(&dir.path().join("nothing")), "--reference", "wedge"])), 5);
    assert_eq!(status(bin().args(["compare", "--run", &arg(&run_dir), "--reference", "bogus"])), 2);

    let sl = bin()
        .args(["slice", "--run", &arg(&run_dir.join("m1")), "--line", "antidiagonal:0", "--part", "sym"])
        .output()
        .unwrap();
    assert!(sl.status.success());
    assert!(String::from_utf8_lossy(&sl.stdout).starts_with("abscissa,value,part,line\n"));
    // Off-lattice antidiagonal centre.
    assert_eq!(status(bin().args(["slice", "--run", &arg(&run_dir.join("m1")), "--line", "antidiagonal:0.1"])), 2);

    fs::remove_file(run_dir.join("m0/slices/diagonal+1_sym.csv")).unwrap();
    assert_eq!(status(bin().args(["compare", "--run", &arg(&run_dir.join("m0")), "--reference", "cylinder_cones"])), 5);

    let info = bin()
        .args(["info", "--config", &arg(&cfg), "--cache", &arg(&cache)])
        .output()
        .unwrap();
    assert!(info.status.success());
    let v: serde_json::Value = serde_json::from_slice(&info.stdout).unwrap();
    assert_eq!(v["digits"], 24);
    assert_eq!(v["masses"][0]["cached"], true);
}
