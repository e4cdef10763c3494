//! End-to-end tests of the command line binary via subprocess invocation.

use std::path::Path;
use std::process::{Command, Output};

use moremnas::moo::ConstraintBounds;
use moremnas::pipeline::checkpoint::{load_checkpoint, save_checkpoint};
use moremnas::pipeline::{run_search, SearchConfig, SearchState};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moremnas"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn small_cfg() -> SearchConfig {
    SearchConfig {
        seed: 7,
        population: 6,
        generations: 4,
        bounds: ConstraintBounds { psnr_min: Some(25.0), ..ConstraintBounds::default() },
        workers: 2,
        ..SearchConfig::default()
    }
}

fn write_cfg(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("cfg.json");
    let text = serde_json::to_string_pretty(&small_cfg()).unwrap();
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn search_writes_checkpoint_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "search",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("search complete: generation 4"), "got {stdout}");
    for name in ["checkpoint.json", "front.csv", "front.json", "front.svg", "history.csv", "hv.csv", "hv.svg"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }

    // The CLI product must match a plain library run bit for bit.
    let lib_dir = dir.path().join("lib");
    std::fs::create_dir_all(&lib_dir).unwrap();
    let state = run_search(small_cfg()).unwrap();
    save_checkpoint(&state, &lib_dir.join("checkpoint.json")).unwrap();
    let cli_bytes = std::fs::read(out_dir.join("checkpoint.json")).unwrap();
    let lib_bytes = std::fs::read(lib_dir.join("checkpoint.json")).unwrap();
    assert_eq!(cli_bytes, lib_bytes);
}

#[test]
fn resume_finishes_a_midpoint_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("checkpoint.json");

    let mut half = SearchState::new(small_cfg()).unwrap();
    half.step().unwrap();
    half.step().unwrap();
    save_checkpoint(&half, &ck).unwrap();

    let out = run(&["resume", "--checkpoint", ck.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("resume complete: generation 4 of 4"));
    assert!(dir.path().join("front.csv").exists(), "reports land next to the checkpoint");

    let resumed = load_checkpoint(&ck, None).unwrap();
    assert_eq!(resumed.generation, 4);
    let straight = run_search(small_cfg()).unwrap();
    let straight_ck = dir.path().join("straight.json");
    save_checkpoint(&straight, &straight_ck).unwrap();
    assert_eq!(
        std::fs::read(&ck).unwrap(),
        std::fs::read(&straight_ck).unwrap(),
        "resumed run must equal the uninterrupted one"
    );

    // Resuming a complete checkpoint is a no-op.
    let again = run(&["resume", "--checkpoint", ck.to_str().unwrap()]);
    assert!(again.status.success());
    assert!(String::from_utf8_lossy(&again.stdout).contains("already complete"));
}

#[test]
fn worker_env_override_keeps_results_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let run_with = |workers: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = bin()
            .args(["search", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
            .env("MOREMNAS_WORKERS", workers)
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_dir.join("checkpoint.json")).unwrap()
    };
    assert_eq!(run_with("1", "w1"), run_with("8", "w8"));
}

#[test]
fn seed_env_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path());
    let out_dir = dir.path().join("seeded");
    let out = bin()
        .args(["search", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .env("MOREMNAS_SEED", "12345")
        .output()
        .unwrap();
    assert!(out.status.success());
    let state = load_checkpoint(&out_dir.join("checkpoint.json"), None).unwrap();
    assert_eq!(state.cfg.seed, 12345);
}

#[test]
fn report_subcommand_prints_each_flavor() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("checkpoint.json");
    save_checkpoint(&run_search(small_cfg()).unwrap(), &ck).unwrap();
    let ck = ck.to_str().unwrap();

    let front = run(&["report", "--checkpoint", ck, "--what", "front"]);
    assert!(front.status.success());
    assert!(String::from_utf8_lossy(&front.stdout).starts_with("genome,arch,psnr"));

    let svg = run(&["report", "--checkpoint", ck, "--what", "front", "--svg"]);
    assert!(svg.status.success());
    assert!(String::from_utf8_lossy(&svg.stdout).contains("<svg"));

    let hv = run(&["report", "--checkpoint", ck, "--what", "hv"]);
    assert!(hv.status.success());
    assert_eq!(String::from_utf8_lossy(&hv.stdout).lines().count(), 6, "header plus 5 generations");

    let history_svg = run(&["report", "--checkpoint", ck, "--what", "history", "--svg"]);
    assert!(!history_svg.status.success());
    assert_eq!(history_svg.status.code(), Some(2), "config misuse is an input error");
}

#[test]
fn eval_one_and_space_outputs() {
    let eval = run(&["eval-one", "--genome", "62,74,53,96,92,165,86"]);
    assert!(eval.status.success());
    let body: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(body["params"], serde_json::json!(1_138_208u64));
    assert_eq!(body["multi_adds"], serde_json::json!(262_243_123_200u64));

    let describe = run(&["space", "--describe", "165"]);
    assert!(describe.status.success());
    let body: serde_json::Value = serde_json::from_slice(&describe.stdout).unwrap();
    assert_eq!(body["label"], "groupConG4_f64_k1_b1_isskip");

    let list = run(&["space", "--list"]);
    assert!(list.status.success());
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), 192);
}

#[test]
fn exit_codes_separate_input_runtime_and_storage_errors() {
    // Input errors: out-of-range genome index, malformed config.
    let bad_genome = run(&["eval-one", "--genome", "200"]);
    assert_eq!(bad_genome.status.code(), Some(2));
    let bad_index = run(&["space", "--describe", "192"]);
    assert_eq!(bad_index.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    let bad_cfg = run(&["search", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad_cfg.status.code(), Some(2));

    // Storage errors: missing and tampered checkpoints.
    let missing = run(&["report", "--checkpoint", "/nonexistent/ck.json", "--what", "front"]);
    assert_eq!(missing.status.code(), Some(4));

    let ck = dir.path().join("checkpoint.json");
    save_checkpoint(&run_search(small_cfg()).unwrap(), &ck).unwrap();
    let text = std::fs::read_to_string(&ck).unwrap();
    std::fs::write(&ck, text.replace("\"generation\":4", "\"generation\":3")).unwrap();
    let tampered = run(&["resume", "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(tampered.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&tampered.stderr).starts_with("error: "));
}
