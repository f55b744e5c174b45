use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spectral-fusion"));
    cmd.env_remove("SPECTRAL_FUSION_OUT_DIR")
        .env_remove("SPECTRAL_FUSION_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_column(p: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let at = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(at).unwrap().to_string()).collect()
}

fn without_clock(mut report: Value) -> Value {
    report.as_object_mut().unwrap().remove("wall_clock_seconds");
    report
}

#[test]
fn synth_is_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--preset", "sbm-paper", "--seed", "42", "--out", path(&a)]);
    ok(&["synth", "--preset", "sbm-paper", "--seed", "42", "--out", path(&b)]);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "affinity_0.bin",
            "affinity_1.bin",
            "affinity_2.bin",
            "affinity_3.bin",
            "labels.csv",
            "provenance.json"
        ]
    );
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
    let prov = read_json(&a.join("provenance.json"));
    assert_eq!(prov["config"]["n"], 300);
    assert_eq!(prov["cluster_sizes"].as_array().unwrap().len(), 6);
}

#[test]
fn synth_rejects_more_clusters_than_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--n", "10", "--k", "20", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n >= k"));
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let unused = run(&["run", "--method", "rjd-base", "--lambda", "0.5", "--out", out]);
    assert_eq!(unused.status.code(), Some(2));
    let missing = dir.path().join("missing");
    let absent = run(&[
        "run",
        "--method",
        "mvsc",
        "--k",
        "3",
        "--data",
        path(&missing),
        "--out",
        out,
    ]);
    assert_eq!(absent.status.code(), Some(3));
    let modality = run(&[
        "run",
        "--method",
        "single-laplacian",
        "--modality",
        "9",
        "--n",
        "60",
        "--out",
        out,
    ]);
    assert_eq!(modality.status.code(), Some(2));
}

#[test]
fn rjd_base_report_selects_ledger_maximum() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "run",
        "--method",
        "rjd-base",
        "--T",
        "200",
        "--k",
        "6",
        "--out",
        path(dir.path()),
    ]);
    let report = read_json(&dir.path().join("report.json"));
    let objectives: Vec<f64> = csv_column(&dir.path().join("trials.csv"), "objective")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(objectives.len(), 200);
    let best = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(report["extras"]["selected_objective"].as_f64().unwrap(), best);
    assert_eq!(report["config"]["params"]["trials"], 200);
    assert_eq!(report["config"]["params"]["method_seed"], 0);
    assert_eq!(report["config"]["dataset"]["sbm"]["seed"], 0);
    let nmi = report["nmi"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&nmi));
    assert_eq!(csv_column(&dir.path().join("landscape.csv"), "nmi").len(), 200);
    assert_eq!(csv_column(&dir.path().join("assignments.csv"), "label").len(), 300);
}

#[test]
fn single_laplacian_reports_one_modality() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "run",
        "--method",
        "single-laplacian",
        "--modality",
        "0",
        "--out",
        path(dir.path()),
    ]);
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["method"], "single-laplacian");
    assert_eq!(report["config"]["params"]["modality"], 0);
    assert_eq!(report["extras"]["eigenvalues"].as_array().unwrap().len(), 6);
    assert!(report["nmi"].as_f64().is_some());
}

#[test]
fn jd_refine_learning_curve_offdiag_is_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "run",
        "--method",
        "jd-refine",
        "--init",
        "rjd-base",
        "--sweeps",
        "200",
        "--T",
        "20",
        "--n",
        "90",
        "--k",
        "4",
        "--out",
        path(dir.path()),
    ]);
    let mass: Vec<f64> = csv_column(&dir.path().join("learning_curve.csv"), "offdiag_mass")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(mass.len() >= 2);
    for w in mass.windows(2) {
        assert!(w[1] <= w[0] + 1e-12 * mass[0], "{w:?}");
    }
    let nmi = csv_column(&dir.path().join("learning_curve.csv"), "nmi");
    assert!(nmi.iter().all(|v| !v.is_empty()));
}

#[test]
fn sweep_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    ok(&[
        "sweep",
        "--method",
        "rjd-base",
        "--T",
        "10",
        "--n",
        "90",
        "--seeds",
        "1",
        "--out",
        path(&one),
    ]);
    assert_eq!(csv_column(&one.join("sweep.csv"), "seed"), ["0"]);
    let frac = read_json(&one.join("sweep.json"))["extras"]["above_mean_fraction"]
        .as_f64()
        .unwrap();
    assert!(frac == 0.0 || frac == 1.0);

    let three = dir.path().join("three");
    ok(&[
        "sweep",
        "--method",
        "rjd-base",
        "--T",
        "10",
        "--n",
        "90",
        "--seed-start",
        "5",
        "--seeds",
        "3",
        "--out",
        path(&three),
    ]);
    assert_eq!(csv_column(&three.join("sweep.csv"), "seed"), ["5", "6", "7"]);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["run", "--method", "rjd-base", "--T", "30", "--n", "120", "--seed", "3"];
    ok(&[&args[..], &["--threads", "1", "--out", path(&a)]].concat());
    let out = bin()
        .args(args)
        .args(["--out", path(&b)])
        .env("SPECTRAL_FUSION_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        without_clock(read_json(&a.join("report.json"))),
        without_clock(read_json(&b.join("report.json")))
    );
    for name in ["trials.csv", "landscape.csv", "assignments.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--method", "mvsc", "--n", "60", "--k", "3"])
        .env("SPECTRAL_FUSION_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[dataset]\nseed = 4\nn = 60\n\n[method]\nmethod = \"coreg\"\nk = 3\nlambda = 0.1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["run", "--config", path(&cfg), "--lambda", "0.3", "--out", path(&out)]);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["config"]["params"]["method"], "coreg");
    assert_eq!(report["config"]["params"]["lambda"], 0.3);
    assert_eq!(report["config"]["dataset"]["sbm"]["seed"], 4);
    assert_eq!(report["config"]["k"], 3);
}

#[test]
fn exported_affinities_round_trip_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--seed", "8", "--n", "80", "--k", "3", "--out", path(&data)]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "run",
        "--method",
        "rjd-base",
        "--T",
        "15",
        "--seed",
        "8",
        "--n",
        "80",
        "--k",
        "3",
        "--out",
        path(&a),
    ]);
    ok(&[
        "run",
        "--method",
        "rjd-base",
        "--T",
        "15",
        "--data",
        path(&data),
        "--out",
        path(&b),
    ]);
    let (ra, rb) = (read_json(&a.join("report.json")), read_json(&b.join("report.json")));
    assert_eq!(rb["config"]["k"], 3);
    assert_eq!(ra["nmi"], rb["nmi"]);
    assert_eq!(
        fs::read(a.join("trials.csv")).unwrap(),
        fs::read(b.join("trials.csv")).unwrap()
    );
}

#[test]
fn feature_tables_drive_multiview_methods() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("feats");
    fs::create_dir(&feats).unwrap();
    let mut labels = String::from("label\n");
    let mut views = [String::from("x,y\n"), String::from("a,b,c\n")];
    // Overlapping clouds keep the self-tuning graphs connected.
    for p in 0..40 {
        let c = (p % 2) as f64;
        let (u, v) = ((p as f64 * 12.9898).sin() * 0.6, (p as f64 * 78.233).cos() * 0.6);
        labels.push_str(&format!("{}\n", p % 2));
        views[0].push_str(&format!("{},{}\n", 1.0 * c + u, 1.0 + v));
        views[1].push_str(&format!("{},{},{}\n", v, 1.0 * c - u, 1.0 + 0.1 * u));
    }
    fs::write(feats.join("labels.csv"), labels).unwrap();
    fs::write(feats.join("view_0.csv"), &views[0]).unwrap();
    fs::write(feats.join("view_1.csv"), &views[1]).unwrap();
    for method in ["mvsc", "coreg", "mv-kmeans", "mv-sphkmeans", "rjd-base"] {
        let out = dir.path().join(method);
        let mut args = vec![
            "run",
            "--method",
            method,
            "--features",
            path(&feats),
            "--out",
            path(&out),
        ];
        if method == "rjd-base" {
            args.extend(["--T", "10"]);
        }
        ok(&args);
        let report = read_json(&out.join("report.json"));
        assert_eq!(report["config"]["k"], 2, "{method}");
        assert_eq!(report["config"]["dataset"]["nn_index"], 7);
        assert!(report["nmi"].as_f64().is_some(), "{method}");
    }
}

#[test]
fn info_summarizes_spectra() {
    let out = ok(&["info", "--n", "60", "--k", "3", "--seed", "2"]);
    let info: Value = serde_json::from_slice(&out.stdout).unwrap();
    let modalities = info["modalities"].as_array().unwrap();
    assert_eq!(modalities.len(), 4);
    for m in modalities {
        assert_eq!(m["passes"], true);
        assert_eq!(m["components"], 1);
    }
}

#[test]
fn sampler_switch_is_recorded_and_used() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let base = ["run", "--method", "rjd-base", "--T", "5", "--n", "60", "--k", "3"];
    ok(&[&base[..], &["--out", path(&a)]].concat());
    ok(&[&base[..], &["--sampler", "flat-dirichlet", "--out", path(&b)]].concat());
    assert_eq!(
        read_json(&a.join("report.json"))["config"]["params"]["sampler"],
        "normalized-uniform"
    );
    assert_eq!(
        read_json(&b.join("report.json"))["config"]["params"]["sampler"],
        "flat-dirichlet"
    );
    assert_ne!(
        fs::read(a.join("trials.csv")).unwrap(),
        fs::read(b.join("trials.csv")).unwrap()
    );
}
