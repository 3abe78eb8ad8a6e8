use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ndfem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndfem"))
        .current_dir(dir)
        .args(args)
        .env_remove("NDFEM_THREADS")
        .output()
        .expect("spawn ndfem")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ndfem(dir, args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

/// A coarse Setup-1 simulation with a boundary-only noisy dataset.
fn fixture() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--setup", "1", "--material", "mr", "--out", "sim"]);
    ok(dir.path(), &["dataset", "make", "--from", "sim", "--mask", "boundary", "--noise", "1e-3", "--seed", "1", "--out", "data.json"]);
    let ds = dir.path().join("data.json");
    (dir, ds)
}

const SHORT: [&str; 6] = ["--seeds", "1", "--max-epochs", "3", "--checkpoint-every", "0"];

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--dataset", "data.json", "--out", out];
    args.extend_from_slice(&SHORT);
    args.extend_from_slice(extra);
    ok(dir, &args)
}

#[test]
fn fem_suite_passes_and_bad_suite_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["verify", "properties", "--suite", "fem"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS newton_order"));
    let bad = ndfem(dir.path(), &["verify", "properties", "--suite", "everything"]);
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("error category=config"));
}

#[test]
fn constitutive_suite_is_a_passing_release_gate() {
    let dir = tempfile::tempdir().unwrap();
    let out = ndfem(dir.path(), &["verify", "properties", "--suite", "constitutive", "--out", "report.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&read(dir.path().join("report.json"))).unwrap();
    assert!(report[0]["checks"].as_array().unwrap().len() >= 10);
}

#[test]
fn usage_errors_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ndfem(dir.path(), &["train", "--no-such-flag"])), 2);
    assert_eq!(code(&ndfem(dir.path(), &["simulate", "--setup", "1"])), 2);
    assert_eq!(code(&ndfem(dir.path(), &["simulate", "--setup", "9", "--material", "mr", "--out", "x"])), 2);
    assert_eq!(code(&ndfem(dir.path(), &["simulate", "--setup", "1", "--material", "ogden", "--out", "x"])), 2);
    assert_eq!(code(&ndfem(dir.path(), &["mesh", "gen", "--setup", "1", "--h", "-0.1", "--out", "m.msh"])), 2);
    assert_eq!(code(&ndfem(dir.path(), &["--threads", "0", "verify", "properties", "--suite", "fem"])), 2);
    std::fs::write(dir.path().join("bad.toml"), "[train]\nmax_epoch = 3\n").unwrap();
    assert_eq!(code(&ndfem(dir.path(), &["--config", "bad.toml", "train", "--dataset", "d", "--out", "o"])), 2);
    assert!(ndfem(dir.path(), &["--help"]).status.success());
}

#[test]
fn malformed_inputs_exit_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"meta\": 1}").unwrap();
    let out = ndfem(dir.path(), &["train", "--dataset", "bad.json", "--out", "run"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("error category=data"));
    assert!(!dir.path().join("run").exists(), "failed run must not leave outputs");
    assert_eq!(code(&ndfem(dir.path(), &["evaluate", "--model", "bad.json", "--setup", "2", "--out", "ev"])), 4);
    assert_eq!(code(&ndfem(dir.path(), &["dataset", "make", "--from", "missing-dir"])), 4);
    assert_eq!(code(&ndfem(dir.path(), &["analyze", "export", "--run", "."])), 4);
}

#[test]
fn mesh_gen_writes_mesh_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["mesh", "gen", "--setup", "3", "--geometry", "2", "--seed", "4", "--out", "m/plate.msh"]);
    let mesh = ndfem::mesh::load_mesh(&dir.path().join("m/plate.msh")).unwrap();
    assert_eq!(mesh.dim(), 2);
    assert!(mesh.n_nodes() > 20);
    let snap = String::from_utf8(read(dir.path().join("m/plate.config.toml"))).unwrap();
    assert!(snap.contains("[mesh_gen]") && snap.contains("geometry = 2"));
    assert_eq!(code(&ndfem(dir.path(), &["mesh", "gen", "--setup", "3", "--geometry", "10", "--out", "x.msh"])), 2);
}

#[test]
fn dataset_noise_is_determined_by_the_seed() {
    let (dir, ds) = fixture();
    let d = dir.path();
    ok(d, &["dataset", "make", "--from", "sim", "--mask", "boundary", "--noise", "1e-3", "--seed", "1", "--out", "again.json"]);
    ok(d, &["dataset", "make", "--from", "sim", "--mask", "boundary", "--noise", "1e-3", "--seed", "2", "--out", "other.json"]);
    assert_eq!(read(&ds), read(d.join("again.json")));
    assert_ne!(read(&ds), read(d.join("other.json")));
    // Default output name encodes the settings.
    ok(d, &["dataset", "make", "--from", "sim", "--mask", "full", "--noise", "0.01", "--seed", "3"]);
    assert!(d.join("sim/dataset-full-1e-2-s3.json").is_file());
}

#[test]
fn training_is_deterministic_across_runs_and_thread_counts() {
    let (dir, _) = fixture();
    let d = dir.path();
    train(d, "a", &[]);
    train(d, "b", &[]);
    train(d, "c", &["--threads", "2"]);
    let model = read(d.join("a/model.json"));
    for run in ["b", "c"] {
        assert_eq!(model, read(d.join(run).join("model.json")), "{run}");
        assert_eq!(read(d.join("a/history.csv")), read(d.join(run).join("history.csv")), "{run}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&read(d.join("a/summary.json"))).unwrap();
    assert_eq!(summary["epochs"], 3);
}

#[test]
fn snapshot_reproduces_run_and_flags_override_config() {
    let (dir, _) = fixture();
    let d = dir.path();
    train(d, "first", &[]);
    ok(d, &["--config", "first/config.toml", "train", "--out", "second"]);
    assert_eq!(read(d.join("first/model.json")), read(d.join("second/model.json")));

    std::fs::write(d.join("cfg.toml"), "[train]\ndataset = \"data.json\"\nseeds = 1\nmax_epochs = 4\ncheckpoint_every = 0\n").unwrap();
    ok(d, &["--config", "cfg.toml", "train", "--max-epochs", "2", "--out", "flag"]);
    ok(d, &["--config", "cfg.toml", "train", "--out", "file"]);
    let lines = |run: &str| String::from_utf8(read(d.join(run).join("history.csv"))).unwrap().lines().count();
    assert_eq!(lines("flag"), 1 + 3);
    assert_eq!(lines("file"), 1 + 5);
    let snap = String::from_utf8(read(d.join("flag/config.toml"))).unwrap();
    assert!(snap.contains("max_epochs = 2"), "{snap}");
}

#[test]
fn full_pipeline_produces_every_artifact_without_touching_inputs() {
    let (dir, ds) = fixture();
    let d = dir.path();
    let before = (read(d.join("sim/simulation.json")), read(&ds));
    std::fs::write(d.join("arch.toml"), "neurons = [4]\nskip = false\nisochoric = false\nw_scale = 10.0\nsigma_init = 0.1\n").unwrap();
    ok(d, &["train", "--dataset", "data.json", "--out", "run", "--seeds", "1", "--max-epochs", "3", "--checkpoint-every", "2", "--arch-file", "arch.toml"]);
    for f in ["config.toml", "model.json", "history.csv", "summary.json", "history/seed0.csv", "checkpoints/seed0-epoch00002.json", "checkpoints/seed0-final.json"] {
        assert!(d.join("run").join(f).is_file(), "{f}");
    }
    let out = ok(d, &["evaluate", "--model", "run/model.json", "--setup", "2", "--out", "eval"]);
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().strip_prefix("mean_vrmse=").unwrap().parse().unwrap();
    assert!(v.is_finite() && v > 0.0);
    let artifact: ndfem::analysis::EvaluationArtifact = serde_json::from_slice(&read(d.join("eval/evaluation-setup2.json"))).unwrap();
    assert_eq!(artifact.report.per_experiment.len(), 10);
    assert_eq!(artifact.sigma_noise, 1e-3);
    assert!(d.join("eval/metrics-setup2.csv").is_file() && d.join("eval/reactions-setup2.csv").is_file());

    ok(d, &["simulate", "--setup", "2", "--material", "mr", "--out", "sim2"]);
    ok(d, &["analyze", "stretches", "--run", "sim", "--run", "sim2", "--out", "eval"]);
    ok(d, &["analyze", "sinkhorn", "--run", "eval", "--max-samples", "300", "--reference", "setup1-mr"]);
    let csv = String::from_utf8(read(d.join("eval/sinkhorn.csv"))).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], ["setup2-mr", "setup1-mr"]);
    assert!(row[5].parse::<f64>().unwrap() > 0.0);
    ok(d, &["analyze", "export", "--run", "eval"]);
    for f in ["load_reaction.csv", "error_boxplot.csv", "canonical.csv", "load_reaction.svg", "stretches.svg"] {
        assert!(d.join("eval/plots").join(f).is_file(), "{f}");
    }
    assert_eq!(before, (read(d.join("sim/simulation.json")), read(&ds)));
}

#[test]
fn analytic_calibration_runs_and_model_sources_are_exclusive() {
    let (dir, _) = fixture();
    let d = dir.path();
    train(d, "cal", &["--analytic", "nh"]);
    let ckpt = String::from_utf8(read(d.join("cal/model.json"))).unwrap();
    assert!(ckpt.contains("\"model_kind\": \"nh\""));
    let both = ndfem(d, &["train", "--dataset", "data.json", "--out", "x", "--grid", "desk", "--analytic", "mr"]);
    assert_eq!(code(&both), 2);
}
