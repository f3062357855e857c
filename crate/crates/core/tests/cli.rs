//! Black-box tests of the `bolt-tamp` binary: subcommand output shapes
//! and the 0/1/2 exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bolt-tamp"))
}

fn domains() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../domains")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn plan_prints_the_nominal_plan() {
    let out = bin()
        .arg("plan")
        .arg("--domain")
        .arg(domains().join("bolt_disassembly.pddl"))
        .arg("--problem")
        .arg(domains().join("bolt_task.pddl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains("plan: [Approach, Insert, Disassemble]"),
        "{text}"
    );
    assert!(text.contains("likelihood=1.000000"), "{text}");
}

#[test]
fn plan_on_the_shorthand_listing_needs_lenient() {
    let shorthand = domains().join("bolt_shorthand.pddl");
    let strict = bin()
        .arg("plan")
        .arg("--domain")
        .arg(&shorthand)
        .arg("--problem")
        .arg(&shorthand)
        .output()
        .unwrap();
    assert_eq!(strict.status.code(), Some(1), "strict parse is a usage error");

    let lenient = bin()
        .arg("plan")
        .arg("--domain")
        .arg(&shorthand)
        .arg("--problem")
        .arg(&shorthand)
        .arg("--lenient")
        .output()
        .unwrap();
    assert_eq!(lenient.status.code(), Some(0));
    assert!(stdout(&lenient).contains("Disassemble"), "{}", stdout(&lenient));
}

#[test]
fn plan_without_a_plan_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("impossible.pddl");
    // goal predicate exists but nothing in init makes any action applicable
    std::fs::write(
        &problem,
        "(define (problem impossible) (:init (cramped sensor)) (:goal (have coarse_pose)))",
    )
    .unwrap();
    let out = bin()
        .arg("plan")
        .arg("--domain")
        .arg(domains().join("bolt_disassembly.pddl"))
        .arg("--problem")
        .arg(&problem)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flags_and_bad_values_exit_1() {
    let out = bin().arg("run").arg("--no-such-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["run", "--sigma", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["run", "--mode", "zero_g"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_prints_one_episode_record() {
    let out = bin()
        .args(["run", "--sigma", "1.0", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.starts_with("success="), "{text}");
}

#[test]
fn run_trace_prepends_step_records() {
    let out = bin()
        .args(["run", "--sigma", "1.0", "--seed", "3", "--trace"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().count() >= 2, "{text}");
    assert!(text.lines().next().unwrap().starts_with("step=0 action="), "{text}");
    assert!(text.lines().last().unwrap().starts_with("success="), "{text}");
    // same seed, same record
    let again = bin()
        .args(["run", "--sigma", "1.0", "--seed", "3", "--trace"])
        .output()
        .unwrap();
    assert_eq!(text, stdout(&again));
}

#[test]
fn calibrate_reports_accuracies() {
    let out = bin()
        .args(["calibrate", "--samples", "10000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("target_aim_accuracy=0.9"), "{text}");
    assert!(text.contains("target_clear_accuracy=0.9"), "{text}");
}

#[test]
fn bad_config_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[experiment]\nsigma_list = []\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["run", "--sigma", "1.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_csvs_and_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        "[experiment]\nsigma_list = [1.0]\nepisodes_per_sigma = 10\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("sweep")
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "no_obstacles_neurosymbolic.csv",
        "no_obstacles_baseline.csv",
        "no_obstacles_sr.svg",
        "no_obstacles_steps.svg",
    ] {
        let path = out_dir.join(name);
        assert!(path.is_file(), "missing {name}");
        assert!(std::fs::metadata(&path).unwrap().len() > 0);
    }
    let csv = std::fs::read_to_string(out_dir.join("no_obstacles_neurosymbolic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("sigma,episodes,successes,sr,mean_steps,mean_replans,push_freq\n"));
}
