use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mprs::codec::Codec;
use mprs::transform::TransformConfig;
use mprs::Image;
use tempfile::TempDir;

fn moon() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/moon.pgm")
}

fn mprs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mprs"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn mprs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn train_regimes(dir: &Path, n_cdf: &str, out: &str, steps: &str) -> Output {
    ok(mprs(
        dir,
        &[
            "train", "--synthetic", "regimes", "--n-cdf", n_cdf, "--c-l", "4", "--steps", steps,
            "--out", out,
        ],
    ))
}

fn train_moon(dir: &Path) -> PathBuf {
    let moon = moon();
    ok(mprs(
        dir,
        &["train", moon.to_str().unwrap(), "--n-cdf", "4", "--steps", "200", "--out", "moon"],
    ));
    dir.join("moon.cdf")
}

fn hash_line(o: &Output) -> String {
    stdout(o)
        .lines()
        .find(|l| l.starts_with("model hash "))
        .expect("hash line")
        .to_string()
}

#[test]
fn zero_priors_is_a_usage_error_with_no_output() {
    let dir = TempDir::new().unwrap();
    let o = mprs(dir.path(), &["train", "--synthetic", "uniform", "--n-cdf", "0", "--out", "m"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("n-cdf"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_flags_exit_with_usage_status() {
    let dir = TempDir::new().unwrap();
    assert_eq!(mprs(dir.path(), &["encode"]).status.code(), Some(2));
    assert_eq!(mprs(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(mprs(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn training_is_deterministic_under_a_seed() {
    let dir = TempDir::new().unwrap();
    let a = train_regimes(dir.path(), "4", "a", "500");
    let b = train_regimes(dir.path(), "4", "b", "500");
    assert_eq!(hash_line(&a), hash_line(&b));
    assert_eq!(fs::read(dir.path().join("a.cpm")).unwrap(), fs::read(dir.path().join("b.cpm")).unwrap());
    assert_eq!(fs::read(dir.path().join("a.cdf")).unwrap(), fs::read(dir.path().join("b.cdf")).unwrap());
    assert!(stdout(&a).contains("final rate"));

    let other = ok(mprs(
        dir.path(),
        &["train", "--synthetic", "regimes", "--n-cdf", "4", "--c-l", "4", "--steps", "500", "--seed", "1", "--out", "c"],
    ));
    assert_ne!(hash_line(&a), hash_line(&other));
}

#[test]
fn encode_decode_matches_encoder_reconstruction() {
    let dir = TempDir::new().unwrap();
    let model = train_moon(dir.path());
    let moon = moon();
    let enc = ok(mprs(
        dir.path(),
        &["encode", moon.to_str().unwrap(), "--model", "moon.cdf", "--out", "m.mprs"],
    ));
    ok(mprs(dir.path(), &["decode", "m.mprs", "--model", "moon.cdf", "--out", "m.pgm"]));

    let codec = Codec::load(&model).unwrap();
    let image = Image::load(&moon).unwrap();
    let expected = codec.encode(&image, &TransformConfig::luma(0.1).unwrap()).unwrap();
    let stream = fs::read(dir.path().join("m.mprs")).unwrap();
    assert_eq!(stream, expected.stream);
    let decoded = fs::read(dir.path().join("m.pgm")).unwrap();
    assert_eq!(decoded, expected.reconstruction().unwrap().to_pnm());

    let bpp = 8.0 * stream.len() as f64 / (512.0 * 512.0);
    assert!(stdout(&enc).contains(&format!("{bpp:.4} bpp")), "{}", stdout(&enc));
}

#[test]
fn decoding_refuses_other_models_and_corrupt_streams() {
    let dir = TempDir::new().unwrap();
    train_moon(dir.path());
    let moon = moon();
    ok(mprs(dir.path(), &["encode", moon.to_str().unwrap(), "--model", "moon.cdf", "--out", "m.mprs"]));
    ok(mprs(
        dir.path(),
        &["train", moon.to_str().unwrap(), "--n-cdf", "4", "--steps", "200", "--seed", "5", "--out", "other"],
    ));

    let mismatch = mprs(dir.path(), &["decode", "m.mprs", "--model", "other.cdf", "--out", "x.pgm"]);
    assert_eq!(mismatch.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("hash mismatch"));
    assert!(mismatch.stdout.is_empty());

    let mut stream = fs::read(dir.path().join("m.mprs")).unwrap();
    stream.truncate(stream.len() / 2);
    fs::write(dir.path().join("cut.mprs"), &stream).unwrap();
    let cut = mprs(dir.path(), &["decode", "cut.mprs", "--model", "moon.cdf", "--out", "x.pgm"]);
    assert_eq!(cut.status.code(), Some(3));

    let missing = mprs(dir.path(), &["decode", "m.mprs", "--model", "absent.cdf", "--out", "x.pgm"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(!dir.path().join("x.pgm").exists());
}

#[test]
fn bench_writes_one_row_per_image() {
    let dir = TempDir::new().unwrap();
    train_moon(dir.path());
    let images = dir.path().join("images");
    fs::create_dir(&images).unwrap();
    fs::copy(moon(), images.join("a.pgm")).unwrap();
    fs::copy(moon(), images.join("b.pgm")).unwrap();
    fs::write(images.join("notes.txt"), "not an image").unwrap();
    ok(mprs(dir.path(), &["bench", "images", "--model", "moon.cdf", "--out", "bench.csv"]));

    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for row in &rows {
        assert_eq!(row.len(), header.len());
        assert_eq!(row[col("lookups_match_formula")], "true");
        assert_eq!(row[col("bit_exact")], "true");
        // 32 x 32 locations, 256 channels, 4 priors.
        assert_eq!(row[col("encode_index_lookups")], (32 * 32 * 256 * 4).to_string());
        assert_eq!(row[col("decode_cdf_gathers")], "1024");
        assert!(row[col("psnr_db")].parse::<f64>().unwrap() >= 35.0);
    }
    assert_eq!(rows[0][0], "a");
    assert_eq!(rows[1][0], "b");
}

fn mean_synthetic_rate(dir: &Path, model: &str) -> f64 {
    let o = ok(mprs(
        dir,
        &["bench", "--synthetic", "regimes", "--model", model, "--samples", "4"],
    ));
    let text = stdout(&o);
    let rates: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 4);
    rates.iter().sum::<f64>() / 4.0
}

#[test]
fn many_priors_code_regime_data_no_worse_than_one() {
    let dir = TempDir::new().unwrap();
    train_regimes(dir.path(), "1", "one", "3000");
    train_regimes(dir.path(), "64", "many", "3000");
    let one = mean_synthetic_rate(dir.path(), "one.cdf");
    let many = mean_synthetic_rate(dir.path(), "many.cdf");
    assert!(many <= one, "64 priors {many} vs 1 prior {one}");
}

#[test]
fn segmap_and_inspect_write_figure_data() {
    let dir = TempDir::new().unwrap();
    train_moon(dir.path());
    let moon = moon();
    ok(mprs(dir.path(), &["segmap", moon.to_str().unwrap(), "--model", "moon.cdf", "--out", "seg.ppm"]));
    let map = Image::load(dir.path().join("seg.ppm")).unwrap();
    assert_eq!((map.width(), map.height(), map.num_planes()), (512, 512, 3));

    let o = ok(mprs(dir.path(), &["inspect", "moon.cpm", "--out", "cdfs"]));
    assert!(stdout(&o).contains("priors 4"));
    assert!(stdout(&o).contains("channels 256"));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("cdfs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["prior_000.csv", "prior_001.csv", "prior_002.csv", "prior_003.csv"]);
    // The frozen table and the parameter file describe the same model.
    let from_cdf = ok(mprs(dir.path(), &["inspect", "moon.cdf"]));
    assert_eq!(hash_line(&o), hash_line(&from_cdf));
}
