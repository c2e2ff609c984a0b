//! End-to-end checks of the command-line interface: exit codes, CSV
//! contracts, seed reproducibility, and the run manifest.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_isac-cd")
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn demo_model() -> String {
    repo_root().join("models/demo.json").display().to_string()
}

fn demo_policy() -> String {
    repo_root()
        .join("models/demo_policy.json")
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn validate_demo_model_is_clean() {
    let out = run(&["validate", &demo_model()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "path,message\n");
}

#[test]
fn validate_broken_model_exits_2_with_named_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    let mut model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(demo_model()).unwrap()).unwrap();
    model["distortion"][1][0] = serde_json::json!(-2.0);
    std::fs::write(&path, model.to_string()).unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("distortion[1][0]"));
}

#[test]
fn missing_model_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing.json");
    let mut model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(demo_model()).unwrap()).unwrap();
    model.as_object_mut().unwrap().remove("channel_kernel");
    std::fs::write(&path, model.to_string()).unwrap();
    let out = run(&["estimator", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channel_kernel"));
    // no partial CSV on failure
    assert!(stdout(&out).is_empty());
}

#[test]
fn unknown_flag_exits_2() {
    let out = run(&["capacity", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dpc_all_ones_prints_one_third() {
    let out = run(&[
        "gaussian", "dpc", "--px", "1", "--sigma", "0.5", "--sigma-z", "1", "--sigma-e", "1",
        "--sigma-s", "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "rate_nats,distortion,coeff_z,coeff_x,coeff_se"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "0.3333333333");
    assert_eq!(row[2], "0.3333333333");
    assert_eq!(row[3], "-0.3333333333");
}

#[test]
fn capacity_exhaustive_matches_library_value() {
    let model = isac_cd::IsacModel::load(repo_root().join("models/demo.json")).unwrap();
    let opts = isac_cd::solver::SolveOpts {
        u_size: Some(2),
        ..isac_cd::solver::SolveOpts::exhaustive(10)
    };
    let expect = isac_cd::solver::capacity_at(&model, 0.25, &opts).unwrap();

    let out = run(&[
        "capacity",
        "--model",
        &demo_model(),
        "--d",
        "0.25",
        "--u-size",
        "2",
        "--mode",
        "exhaustive",
        "--pa-grid",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    let c_nats: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!(
        (c_nats - expect.c_nats).abs() < 1e-9,
        "cli {c_nats} vs library {}",
        expect.c_nats
    );
    // header contract
    assert!(text.starts_with("D,C_nats,C_bits,feasible,optimizer_mode,restarts_used,seed\n"));
}

#[test]
fn infeasible_distortion_exits_1() {
    let out = run(&[
        "capacity",
        "--model",
        &demo_model(),
        "--d",
        "0.0",
        "--u-size",
        "2",
        "--mode",
        "exhaustive",
        "--pa-grid",
        "6",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).is_empty());
}

#[test]
fn simulate_seed_fixes_output_exactly() {
    let args = [
        "simulate",
        "--model",
        &demo_model(),
        "--policy",
        &demo_policy(),
        "--n",
        "6",
        "--trials",
        "40",
        "--seed",
        "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("trial,decoded_ok,distortion,in_B\n"));
    assert!(stdout(&a).contains("threshold_note,"));
}

#[test]
fn spectrum_emits_summary_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let samples_path = dir.path().join("densities.csv");
    let out = run(&[
        "spectrum",
        "--model",
        &demo_model(),
        "--policy",
        &demo_policy(),
        "--n",
        "50",
        "--samples",
        "1000",
        "--seed",
        "5",
        "--samples-out",
        samples_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text
        .starts_with("n,samples,delta,inf_rate_nats,sup_rate_nats,mean_density_nats,sd_density"));
    // requested delta plus the two sensitivity rows
    assert_eq!(text.lines().count(), 4);
    let body = std::fs::read_to_string(&samples_path).unwrap();
    assert_eq!(body.lines().count(), 1001);
    assert!(body.starts_with("density_nats\n"));
}

#[test]
fn manifest_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = dir.path().join("manifest.json");
    let out = run(&[
        "--manifest",
        manifest_path.to_str().unwrap(),
        "validate",
        &demo_model(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "validate");
    assert_eq!(manifest["exit_code"], 0);
    assert!(manifest["duration_seconds"].as_f64().unwrap() >= 0.0);
    assert!(manifest["argv"].as_array().unwrap().len() >= 3);
}

#[test]
fn fading_curve_flags_infeasible_prefix() {
    let out = run(&[
        "gaussian",
        "fading",
        "--px",
        "1",
        "--sigma",
        "1",
        "--sigma-z",
        "2",
        "--sigma-s",
        "1",
        "--dgrid",
        "0.5:1.1:4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "D,C_nats,alpha_star,feasible");
    assert!(lines[1].ends_with(",false"));
    assert!(lines[4].ends_with(",true"));
}

#[test]
fn save_policy_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let policy_path = dir.path().join("best.json");
    let out = run(&[
        "capacity",
        "--model",
        &demo_model(),
        "--d",
        "0.3",
        "--u-size",
        "2",
        "--mode",
        "exhaustive",
        "--pa-grid",
        "8",
        "--save-policy",
        policy_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let model = isac_cd::IsacModel::load(repo_root().join("models/demo.json")).unwrap();
    let policy = isac_cd::Policy::load(&policy_path, &model).unwrap();
    let report = isac_cd::solver::evaluate_policy(&model, &policy).unwrap();
    assert!(report.distortion <= 0.3 + 1e-9);
}
