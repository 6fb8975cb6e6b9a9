use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use circle::{evaluate, load_dataset, EvalConfig, Model64};
use tempfile::TempDir;

fn circle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circle")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = circle(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn small_data(tmp: &TempDir, seed: &str) -> std::path::PathBuf {
    let dir = tmp.path().join(format!("data{seed}"));
    ok(&["synth", "--seed", seed, "--per-cluster", "30", "--dims", "12,10,8", "--out", p(&dir)]);
    dir
}

const FAST: [&str; 8] = ["--epochs", "3", "--lambda", "3", "--hidden", "16,12,12", "--latent-dim", "6"];

fn train(data: &Path, out: &Path, seed: &str, extra: &[&str]) {
    let mut args = vec!["train", "--data", p(data), "--out", p(out), "--seed", seed];
    args.extend_from_slice(&FAST);
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn synth_writes_dataset_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let dir = small_data(&tmp, "4");
    for f in ["view_1.csv", "view_2.csv", "view_3.csv", "labels.csv", "aligned_mask.csv", "corr_2.csv", "manifest.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let data = load_dataset::<f64>(&dir).unwrap();
    assert_eq!(data.num_samples(), 150);
    assert_eq!(data.view_dims(), vec![12, 10, 8]);
    let m = manifest(&dir);
    assert_eq!(m["command"], "synth");
    assert_eq!(m["seeds"][0], 4);
    assert!(m["checksums"]["view_1.csv"].is_string());
}

#[test]
fn synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = small_data(&tmp, "9");
    let b = tmp.path().join("again");
    ok(&["synth", "--seed", "9", "--per-cluster", "30", "--dims", "12,10,8", "--out", p(&b)]);
    assert_eq!(manifest(&a)["checksums"], manifest(&b)["checksums"]);
}

#[test]
fn fully_unaligned_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = circle(&["synth", "--seed", "1", "--unaligned", "1.0", "--out", p(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--unaligned"));
}

#[test]
fn missing_data_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = circle(&["train", "--data", p(&tmp.path().join("none")), "--out", p(&tmp.path().join("o")), "--seed", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn output_over_input_is_refused() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "1");
    let out = circle(&["train", "--data", p(&data), "--out", p(&data), "--seed", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_artifacts_deterministically() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "2");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    train(&data, &a, "5", &[]);
    train(&data, &b, "5", &[]);
    for f in ["model.bin", "curve.csv", "manifest.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let curve = fs::read_to_string(a.join("curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "epoch,L_REC,L_CGC,total");
    assert_eq!(lines.len(), 4);
    assert_eq!(manifest(&a)["checksums"]["model.bin"], manifest(&b)["checksums"]["model.bin"]);
    assert_eq!(manifest(&a)["config"]["seed"], 5);
}

#[test]
fn zero_lambda_total_is_reconstruction() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "3");
    let out = tmp.path().join("t");
    train(&data, &out, "0", &["--lambda", "0"]);
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    for line in curve.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(f[1], f[3]);
        assert!(f[2] > 0.0);
    }
}

#[test]
fn eval_report_matches_library() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "6");
    let model = tmp.path().join("m");
    train(&data, &model, "1", &[]);
    for mode in ["greedy", "bijective"] {
        let out = tmp.path().join(format!("e-{mode}"));
        ok(&[
            "eval", "--model", p(&model.join("model.bin")), "--data", p(&data), "--out", p(&out),
            "--align-mode", mode, "--eval-seeds", "0,1", "--dump-alignment",
        ]);
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        for key in ["acc", "nmi"] {
            let v = report["clustering"][key].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        let ari = report["clustering"]["ari"].as_f64().unwrap();
        assert!((-1.0..=1.0).contains(&ari));
        for key in ["p80", "p50", "p20"] {
            assert!((0.0..=1.0).contains(&report["classification"][key].as_f64().unwrap()));
        }
        let inst = report["alignment"]["instance"].as_f64().unwrap();
        let clus = report["alignment"]["cluster"].as_f64().unwrap();
        assert!(inst <= clus && clus <= 1.0);
        assert!(out.join("alignment_2.csv").exists() && out.join("alignment_3.csv").exists());

        let m = Model64::load(model.join("model.bin")).unwrap();
        let d = load_dataset::<f64>(&data).unwrap();
        let config = EvalConfig {
            align_mode: if mode == "greedy" { circle::AlignMode::Greedy } else { circle::AlignMode::Bijective },
            seeds: vec![0, 1],
            ..EvalConfig::default()
        };
        let lib = evaluate(&m, &d, &config).unwrap();
        assert_eq!(report["clustering"]["acc"].as_f64().unwrap(), lib.clustering.acc);
        assert_eq!(report["alignment"]["cluster"].as_f64().unwrap(), lib.alignment.cluster);
    }
}

#[test]
fn eval_rejects_mismatched_model() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "6");
    let model = tmp.path().join("m");
    train(&data, &model, "1", &[]);
    let other = tmp.path().join("other");
    ok(&["synth", "--seed", "1", "--per-cluster", "10", "--dims", "5,6,7", "--out", p(&other)]);
    let out = circle(&["eval", "--model", p(&model.join("model.bin")), "--data", p(&other), "--out", p(&tmp.path().join("e"))]);
    assert_eq!(out.status.code(), Some(3));
    let out = circle(&["eval", "--data", p(&other), "--out", p(&tmp.path().join("e"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn baseline_needs_no_model() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "8");
    let out = tmp.path().join("b");
    ok(&["eval", "--baseline", "pca-hungarian", "--data", p(&data), "--out", p(&out), "--eval-seeds", "0"]);
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("baseline"));
}

#[test]
fn sweep_writes_one_row_per_cell_and_means() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "2");
    let out = tmp.path().join("s");
    let mut args = vec![
        "sweep", "--data", p(&data), "--out", p(&out), "--axis", "unaligned", "--values", "0.1:0.5:0.2",
        "--seeds", "0,1", "--jobs", "3", "--eval-seeds", "0",
    ];
    args.extend_from_slice(&FAST);
    ok(&args);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 3 * 2 + 3);
    assert_eq!(rows.iter().filter(|r| r.contains(",mean,")).count(), 3);
    assert!(rows[1..].iter().all(|r| r.split(',').nth(3) == Some("ok")));
    assert!(out.join("cells/unaligned=0.3/seed=1/report.json").exists());
}

#[test]
fn sweep_is_independent_of_job_count() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "2");
    let run = |jobs: &str| {
        let out = tmp.path().join(format!("s{jobs}"));
        let mut args = vec![
            "sweep", "--data", p(&data), "--out", p(&out), "--axis", "lambda", "--values", "0,1",
            "--seeds", "3", "--jobs", jobs, "--eval-seeds", "0",
        ];
        args.extend_from_slice(&FAST);
        ok(&args);
        fs::read_to_string(out.join("sweep.csv")).unwrap()
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn bad_sweep_values_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "2");
    for (axis, values) in [("k", "0.5"), ("unaligned", "1.0"), ("lambda", "1:0:1"), ("dz", "x")] {
        let out = circle(&["sweep", "--data", p(&data), "--out", p(&tmp.path().join("s")), "--axis", axis, "--values", values]);
        assert_eq!(out.status.code(), Some(2), "{axis} {values}");
    }
}

#[test]
fn ablate_reports_three_variants() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "5");
    let out = tmp.path().join("a");
    let mut args = vec!["ablate", "--data", p(&data), "--out", p(&out), "--seeds", "0,1", "--jobs", "2", "--eval-seeds", "0"];
    args.extend_from_slice(&FAST);
    ok(&args);
    let summary = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let names: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["rec-only", "cgc-only", "full"]);
    let runs = fs::read_to_string(out.join("ablation_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 2);
}

#[test]
fn replay_reproduces_checksums() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(&tmp, "7");
    let first = tmp.path().join("t");
    train(&data, &first, "2", &[]);
    let again = tmp.path().join("r");
    let out = ok(&["replay", "--manifest", p(&first.join("manifest.json")), "--out", p(&again)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("reproduced"));
    assert_eq!(manifest(&first)["checksums"], manifest(&again)["checksums"]);
}
