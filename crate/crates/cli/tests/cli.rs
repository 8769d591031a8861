use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stackstl::dynamics::read_trajectory_csv;
use stackstl::milp::parse_lp;
use stackstl::scenarios::toy_1d;
use stackstl::synth::SynthesisOutcome;
use stackstl::{parse, robustness, ScenarioFile};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackstl")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Writes the blocking toy (the leader holds the follower below 1.38) and
/// returns its path.
fn toy_file(dir: &Path) -> PathBuf {
    let s = toy_1d("F[1,3] x >= 0.63", "F[1,3] x >= 1.38", 3).unwrap();
    let p = dir.join("toy.json");
    std::fs::write(&p, ScenarioFile::from_scenario(&s).to_json()).unwrap();
    p
}

fn synthesize(dir: &Path) -> (PathBuf, Output) {
    let scenario = toy_file(dir);
    let out = dir.join("out");
    let o = run(&[
        "synthesize",
        "--scenario",
        scenario.to_str().unwrap(),
        "--mode",
        "ant",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    (out, o)
}

#[test]
fn synthesize_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (out, o) = synthesize(dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for ext in ["json", "timing.json", "leader.csv", "svg"] {
        assert!(out.join(format!("toy_1d.{ext}")).exists(), "missing {ext}");
    }
    let scenario = dir.path().join("toy.json");
    let outcome = out.join("toy_1d.json");
    let v = run(&["verify", outcome.to_str().unwrap(), "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).contains("certificate: PASSED"));

    // pushing the follower up lets it reach its goal
    let mut bad = SynthesisOutcome::from_json(&std::fs::read_to_string(&outcome).unwrap()).unwrap();
    bad.u_leader[0][0] = 1.0;
    bad.u_leader[1][0] = 1.0;
    let bad_path = dir.path().join("bad.json");
    std::fs::write(&bad_path, bad.to_json()).unwrap();
    let v = run(&["verify", bad_path.to_str().unwrap(), "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1), "{}", stdout(&v));
    assert!(stdout(&v).contains("certificate: FAILED"));
}

#[test]
fn monitor_matches_the_library_on_a_written_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (out, o) = synthesize(dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = out.join("toy_1d.leader.csv");
    let scenario = dir.path().join("toy.json");
    let text = "F[1,3] x >= 0.63";
    let m = run(&["monitor", csv.to_str().unwrap(), text, "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(m.status.code(), Some(0), "{}", stdout(&m));
    let printed: f64 = stdout(&m)
        .lines()
        .find_map(|l| l.strip_prefix("robustness: "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let names = vec!["x".to_string()];
    let trace = read_trajectory_csv(File::open(&csv).unwrap(), Some(&names)).unwrap();
    let expected = robustness(&parse(text, &names).unwrap(), &trace, 0).unwrap();
    assert!((printed - expected).abs() <= 1e-9);

    // without a scenario the columns are named x_i
    let m = run(&["monitor", csv.to_str().unwrap(), "G[0,3] x_0 >= 5"]);
    assert_eq!(m.status.code(), Some(1));
    assert!(stdout(&m).contains("satisfied: false"));
}

#[test]
fn bad_inputs_exit_with_the_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = dir.path().join("out");
    let o = run(&["synthesize", "--scenario", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["reproduce", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["monitor"]);
    assert_eq!(o.status.code(), Some(4));
    let scenario = toy_file(dir.path());
    let o = run(&[
        "synthesize",
        "--scenario",
        scenario.to_str().unwrap(),
        "--backend",
        "no-such-solver",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn exported_lp_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = toy_file(dir.path());
    let lp = dir.path().join("master.lp");
    let o = run(&[
        "export-lp",
        "--scenario",
        scenario.to_str().unwrap(),
        "--output",
        lp.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let model = parse_lp(&std::fs::read_to_string(&lp).unwrap()).unwrap();
    assert!(model.num_binaries() > 0);
}
