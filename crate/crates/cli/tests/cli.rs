use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pcae_core::analysis::PcaModel;
use pcae_core::autoencoder::{init_params, AutoencoderParams, TrainConfig};
use pcae_core::io::parse_key_values;

fn pcae(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcae"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PCAE_OUT_DIR")
        .output()
        .expect("spawn pcae")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = pcae(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn manifest(dir: &Path) -> Vec<(String, String)> {
    parse_key_values(&fs::read_to_string(dir.join("manifest.txt")).unwrap())
}

fn lookup<'a>(kv: &'a [(String, String)], key: &str) -> &'a str {
    &kv.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("missing {key}")).1
}

const SYNTH: &[&str] = &["synth", "--n", "6", "--count", "400", "--stds", "5,4,3,2,1,0.5", "--seed", "3"];

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[SYNTH, &["--out", "a"]].concat(), dir.path());
    ok(&[SYNTH, &["--out", "b"]].concat(), dir.path());
    for file in ["data.pcae", "basis.pcae", "stds.pcae", "mean.pcae", "manifest.txt"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcae(&["synth", "--n", "3", "--count", "10", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = pcae(&["synth", "--n", "3", "--count", "10", "--stds", "2,1", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = pcae(&["synth", "--n", "2", "--count", "10", "--stds", "1,2", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_dir_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_pcae"))
        .args(SYNTH)
        .current_dir(dir.path())
        .env("PCAE_OUT_DIR", "from_env")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("from_env/data.pcae").exists());
}

#[test]
fn zero_epochs_reproduce_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[SYNTH, &["--out", "s"]].concat(), dir.path());
    ok(&["train", "--data", "s/data.pcae", "--m", "2", "--epochs", "0", "--seed", "11", "--out", "t"], dir.path());
    let saved = AutoencoderParams::load(dir.path().join("t/params")).unwrap();
    let config = TrainConfig { seed: 11, epochs: 0, ..TrainConfig::default() };
    let expected = init_params(6, 2, &config).unwrap();
    assert_eq!(saved.w1, expected.w1);
    assert_eq!(saved.w2, expected.w2);
    assert!(saved.b1.iter().chain(&saved.b2).all(|b| *b == 0.0));
    assert_eq!(lookup(&manifest(&dir.path().join("t")), "steps"), "0");
}

#[test]
fn oracle_on_axis_aligned_csv() {
    let dir = tempfile::tempdir().unwrap();
    // Variance 8 along x and 2 along y, zero mean, per-sample normalization.
    let rows = ["4,0", "-4,0", "0,2", "0,-2"];
    fs::write(dir.path().join("xy.csv"), rows.join("\n")).unwrap();
    ok(&["oracle", "--data", "xy.csv", "--m", "2", "--out", "o"], dir.path());
    let model = PcaModel::load(dir.path().join("o/model")).unwrap();
    let v = model.variances().unwrap();
    let n = 4.0;
    assert!((v[0] / n - 8.0).abs() < 1e-12 && (v[1] / n - 2.0).abs() < 1e-12, "{v:?}");
    let p = model.loading_vectors();
    assert!((p.column(0)[0].abs() - 1.0).abs() < 1e-12);
    assert!((p.column(1)[1].abs() - 1.0).abs() < 1e-12);
}

#[test]
fn oracle_refuses_wide_data() {
    let dir = tempfile::tempdir().unwrap();
    let row: Vec<String> = (0..4097).map(|i| (i % 7).to_string()).collect();
    let other: Vec<String> = (0..4097).map(|i| (i % 5).to_string()).collect();
    fs::write(dir.path().join("wide.csv"), format!("{}\n{}\n", row.join(","), other.join(","))).unwrap();
    let out = pcae(&["oracle", "--data", "wide.csv", "--m", "1", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4096"));
}

#[test]
fn missing_weights_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[SYNTH, &["--out", "s"]].concat(), dir.path());
    ok(&["train", "--data", "s/data.pcae", "--m", "2", "--epochs", "1", "--out", "t"], dir.path());
    fs::remove_file(dir.path().join("t/params/w2.pcae")).unwrap();
    let out = pcae(&["recover", "--params", "t/params", "--data", "s/data.pcae", "--out", "r"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn corrupt_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.pcae"), b"PCAE\x01\x00\x00\x00\x02").unwrap();
    let out = pcae(&["oracle", "--data", "bad.pcae", "--m", "1", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[SYNTH, &["--out", "s"]].concat(), d);
    ok(&["train", "--data", "s/data.pcae", "--m", "2", "--epochs", "60", "--out", "t"], d);
    ok(&["recover", "--params", "t/params", "--data", "s/data.pcae", "--out", "r"], d);
    ok(&["recover", "--params", "t/params", "--data", "s/data.pcae", "--source", "w1", "--out", "r1"], d);
    ok(&["oracle", "--data", "s/data.pcae", "--m", "2", "--out", "o"], d);
    ok(&["report", "--model", "r", "--data", "s/data.pcae", "--params", "t/params", "--reference", "o", "--out", "rep"], d);
    ok(&["report", "--no-svd", "--data", "s/data.pcae", "--params", "t/params", "--out", "raw"], d);
    ok(&["render", "--model", "o", "--shape", "2x3", "--grid-cols", "2", "--out", "g"], d);

    let train = manifest(&d.join("t"));
    assert_eq!(lookup(&train, "steps"), (60 * 100).to_string());
    let loss = fs::read_to_string(d.join("t/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 61);

    let cross: f64 = lookup(&manifest(&d.join("r")), "cross_source_angle_deg").parse().unwrap();
    let cross_w1: f64 = lookup(&manifest(&d.join("r1")), "cross_source_angle_deg").parse().unwrap();
    assert!(cross < 5.0, "{cross}");
    assert!((cross - cross_w1).abs() < 1e-9);

    let report = parse_key_values(&fs::read_to_string(d.join("rep/report.txt")).unwrap());
    let angles: Vec<f64> = lookup(&report, "principal_angles_deg").split(',').map(|a| a.parse().unwrap()).collect();
    assert_eq!(angles.len(), 2);
    assert!(angles.iter().all(|a| *a < 5.0), "{angles:?}");
    let offdiag: f64 = lookup(&report, "offdiag_ratio").parse().unwrap();
    let raw = parse_key_values(&fs::read_to_string(d.join("raw/report.txt")).unwrap());
    let raw_offdiag: f64 = lookup(&raw, "offdiag_ratio").parse().unwrap();
    assert!(offdiag < raw_offdiag, "{offdiag} vs raw {raw_offdiag}");
    assert!(fs::read_to_string(d.join("rep/covariance.csv")).unwrap().lines().count() == 2);

    ok(&["report", "--model", "o", "--data", "s/data.pcae", "--out", "self"], d);
    let own = parse_key_values(&fs::read_to_string(d.join("self/report.txt")).unwrap());
    let own_offdiag: f64 = lookup(&own, "offdiag_ratio").parse().unwrap();
    assert!(own_offdiag < 1e-8, "{own_offdiag}");

    let pgm = fs::read(d.join("g/grid.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
}

#[test]
fn repeated_runs_write_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[SYNTH, &["--out", "s"]].concat(), d);
    for out in ["t1", "t2"] {
        ok(&["train", "--data", "s/data.pcae", "--m", "2", "--epochs", "5", "--out", out], d);
    }
    for file in ["params/w1.pcae", "params/b1.pcae", "params/w2.pcae", "params/b2.pcae", "loss.csv"] {
        assert_eq!(fs::read(d.join("t1").join(file)).unwrap(), fs::read(d.join("t2").join(file)).unwrap(), "{file}");
    }
    let strip = |kv: Vec<(String, String)>| kv.into_iter().filter(|(k, _)| k != "data").collect::<Vec<_>>();
    assert_eq!(strip(manifest(&d.join("t1"))), strip(manifest(&d.join("t2"))));
}
