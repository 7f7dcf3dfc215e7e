use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bwb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwb"))
        .args(args)
        .env_remove("BWB_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = bwb(args);
    assert!(
        out.status.success(),
        "bwb {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, preset: &str, n: usize, seed: u64) {
    ok(&["gen", "--preset", preset, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", p(dir)]);
}

fn write_identities(dir: &Path, d: usize, n: usize) {
    let mats: Vec<_> = (0..n).map(|_| bwb_core::SymMatrix::identity(d)).collect();
    bwb_core::dataset::save_dataset(&mats, dir, None, Value::Null).unwrap();
}

#[test]
fn full_preset_writes_all_files() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("data");
    gen(&dir, "paper6", 800, 1);
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["n"], 800);
    assert_eq!(manifest["d"], 20);
    let csvs = fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 800);
}

#[test]
fn zero_samples_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let out = bwb(&["gen", "--preset", "desk", "--n", "0", "--seed", "1", "--out", p(tmp.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("n must be at least 1"));
}

#[test]
fn mismatched_dimension_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let out = bwb(&["gen", "--preset", "desk", "--d", "20", "--n", "3", "--seed", "1", "--out", p(tmp.path())]);
    assert!(!out.status.success());
}

#[test]
fn seed_is_required() {
    let tmp = TempDir::new().unwrap();
    let out = bwb(&["gen", "--preset", "desk", "--n", "3", "--out", p(tmp.path())]);
    assert!(!out.status.success());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, "desk", 12, 5);
    gen(&b, "desk", 12, 5);
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());

    for (data, out, threads) in [(&a, "ra", "1"), (&b, "rb", "3")] {
        let out = tmp.path().join(out);
        ok(&[
            "--threads", threads, "bootstrap", "--data", p(data), "--B", "30", "--scheme", "po1", "--seed", "9",
            "--out", p(&out),
        ]);
    }
    let ra = fs::read(tmp.path().join("ra/bootstrap.json")).unwrap();
    let rb = fs::read(tmp.path().join("rb/bootstrap.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn different_seeds_differ() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, "desk", 4, 5);
    gen(&b, "desk", 4, 6);
    assert_ne!(json(&a.join("manifest.json"))["sha256"], json(&b.join("manifest.json"))["sha256"]);
}

#[test]
fn singleton_barycenter_is_the_sample() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 1, 2);
    let out = tmp.path().join("fit");
    ok(&["barycenter", "--data", p(&data), "--out", p(&out)]);
    let log = json(&out.join("barycenter.json"));
    assert_eq!(log["converged"], true);
    assert!(log["residual"].as_f64().unwrap() <= 1e-10);

    let fitted = bwb_core::dataset::read_matrix(&out.join("barycenter.csv"), Some(8)).unwrap();
    let sample = bwb_core::dataset::read_matrix(&data.join("s_00000.csv"), Some(8)).unwrap();
    let diff = fitted.sub(&sample).unwrap().frobenius_norm();
    assert!(diff <= 1e-10 * sample.frobenius_norm(), "diff {diff}");
}

#[test]
fn barycenter_log_reports_convergence() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 40, 3);
    let out = tmp.path().join("fit");
    ok(&["barycenter", "--data", p(&data), "--out", p(&out)]);
    let log = json(&out.join("barycenter.json"));
    assert_eq!(log["n"], 40);
    assert!(log["residual"].as_f64().unwrap() <= 1e-10);
    assert!(log["mean_map"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn missing_manifest_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let out = bwb(&["barycenter", "--data", p(tmp.path()), "--out", p(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("manifest"));
}

#[test]
fn zero_replicates_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 5, 1);
    let out = bwb(&["bootstrap", "--data", p(&data), "--B", "0", "--seed", "1", "--out", p(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("B must be at least 1"));
}

#[test]
fn unit_weights_give_zero_statistics() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 15, 4);
    let out = tmp.path().join("boot");
    ok(&["bootstrap", "--data", p(&data), "--B", "7", "--scheme", "ones", "--seed", "1", "--out", p(&out)]);
    let report = json(&out.join("bootstrap.json"));
    assert_eq!(report["scheme"], "ones");
    for v in report["replicates"].as_array().unwrap() {
        assert!(v.as_f64().unwrap().abs() <= 1e-6, "{v}");
    }
}

#[test]
fn bootstrap_writes_requested_replicates() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 20, 4);
    let out = tmp.path().join("boot");
    ok(&["bootstrap", "--data", p(&data), "--B", "100", "--stat", "frob", "--seed", "2", "--out", p(&out)]);
    let report = json(&out.join("bootstrap.json"));
    assert_eq!(report["B"], 100);
    assert_eq!(report["replicates"].as_array().unwrap().len(), 100);
    assert_eq!(report["stat_kind"], "frobenius");
    let table = fs::read_to_string(out.join("bootstrap_cdf.csv")).unwrap();
    assert_eq!(table.lines().count(), 101);
}

#[test]
fn single_repetition_truth() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("truth");
    ok(&[
        "truth", "--preset", "desk", "--n", "10", "--n-truth", "40", "--n-reps", "1", "--seed", "3", "--out", p(&out),
    ]);
    let table = fs::read_to_string(out.join("truth.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn small_reference_warns() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("truth");
    let res = ok(&[
        "truth", "--preset", "desk", "--n", "20", "--n-truth", "10", "--n-reps", "3", "--seed", "3", "--out", p(&out),
    ]);
    assert!(stderr(&res).contains("warning"));
}

#[test]
fn identity_sample_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("eye");
    write_identities(&data, 4, 6);
    let out = tmp.path().join("diag");
    ok(&["diag", "--data", p(&data), "--draws", "100", "--seed", "1", "--out", p(&out)]);
    let d = json(&out.join("diag.json"));
    assert!((d["f_lambda_min"].as_f64().unwrap() - 0.5).abs() <= 1e-10);
    assert!((d["f_lambda_max"].as_f64().unwrap() - 0.5).abs() <= 1e-10);
    assert!(d["trace_sigma"].as_f64().unwrap().abs() <= 1e-12);
    assert!((d["kappa_q"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
}

#[test]
fn diag_against_bootstrap_and_reference() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 60, 8);
    let boot = tmp.path().join("boot");
    ok(&["bootstrap", "--data", p(&data), "--B", "40", "--seed", "2", "--out", p(&boot)]);
    let out = tmp.path().join("diag");
    ok(&[
        "diag", "--data", p(&data), "--reference", p(&data), "--bootstrap", p(&boot.join("bootstrap.json")),
        "--draws", "2000", "--seed", "1", "--out", p(&out),
    ]);
    let d = json(&out.join("diag.json"));
    let ks = d["ks_gaussian_vs_bootstrap"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ks));
    assert!(d["discrepancy"]["q"].as_f64().unwrap() <= 1e-8);
    assert!(d["xi"]["gamma"].as_f64().unwrap() >= 1.0);
    assert_eq!(fs::read_to_string(out.join("gaussian_cdf.csv")).unwrap().lines().count(), 2001);
}

#[test]
fn comparing_a_report_with_itself() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 20, 8);
    let boot = tmp.path().join("boot");
    ok(&["bootstrap", "--data", p(&data), "--B", "25", "--seed", "2", "--out", p(&boot)]);
    let report = boot.join("bootstrap.json");
    let out = tmp.path().join("cmp");
    let res = ok(&["compare", "--truth", p(&report), "--bootstrap", p(&report), "--bootstrap", p(&report), "--out", p(&out)]);
    let summary = json(&out.join("compare.json"));
    assert_eq!(summary["ks_mean_bootstrap"].as_f64().unwrap(), 0.0);
    assert!(String::from_utf8_lossy(&res.stdout).contains("KS(mean bootstrap, truth) = 0.0000"));
    let bands = fs::read_to_string(out.join("bands.csv")).unwrap();
    assert!(bands.starts_with("x,lo,mean,hi"));
    assert_eq!(bands.lines().count(), 201);
}

#[test]
fn compare_against_truth_table() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 30, 8);
    let boot = tmp.path().join("boot");
    ok(&["bootstrap", "--data", p(&data), "--B", "50", "--seed", "2", "--out", p(&boot)]);
    let truth = tmp.path().join("truth");
    ok(&[
        "truth", "--preset", "desk", "--n", "30", "--n-truth", "300", "--n-reps", "50", "--seed", "4", "--out", p(&truth),
    ]);
    let out = tmp.path().join("cmp");
    ok(&[
        "compare", "--truth", p(&truth.join("truth.csv")), "--bootstrap", p(&boot.join("bootstrap_cdf.csv")),
        "--grid", "0,0.5,1,2", "--out", p(&out),
    ]);
    let summary = json(&out.join("compare.json"));
    let ks = summary["ks_mean_bootstrap"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ks));
    assert_eq!(summary["grid_points"], 4);
}

#[test]
fn unsorted_grid_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    gen(&data, "desk", 10, 8);
    let boot = tmp.path().join("boot");
    ok(&["bootstrap", "--data", p(&data), "--B", "10", "--seed", "2", "--out", p(&boot)]);
    let report = boot.join("bootstrap.json");
    let out = bwb(&[
        "compare", "--truth", p(&report), "--bootstrap", p(&report), "--grid", "1,0.5", "--out", p(&tmp.path().join("c")),
    ]);
    assert!(!out.status.success());
}
