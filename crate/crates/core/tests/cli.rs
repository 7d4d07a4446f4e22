use std::path::PathBuf;
use std::process::{Command, Output};

const GOLDEN: &str = "n=2\n1 update 0 2 arg=2\n0 update 1 4 arg=1\n1 update 3 7 arg=3\n0 scan 5 6 ret=1,2\n";
const CROSSED: &str = "n=2\n0 scan 0 3 ret=0,1\n1 scan 1 6 ret=1,0\n0 update 4 5 arg=1\n1 update 7 8 arg=1\n";

fn file(name: &str, contents: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{name}"));
    std::fs::write(&path, contents).unwrap();
    path
}

fn snapcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snapcheck")).args(args).env_remove("SNAPCHECK_ORACLE_BOUND").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn check_prints_witness_for_golden() {
    let t = file("golden.trace", GOLDEN);
    let o = snapcheck(&["check", t.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("LINEARIZABLE\n"));
    assert!(out.contains("alpha 0 p0.2 p0.1\n"));
    assert!(out.contains("alpha 1 p0.2 p1.1\n"));
    let lin: Vec<&str> = out.lines().filter_map(|l| l.strip_prefix("LIN ")).collect();
    let at = |id: &str| lin.iter().position(|&l| l == id).unwrap();
    assert!(at("p0.2") < at("p1.2"));
}

#[test]
fn check_all_alphas_lists_each_assignment() {
    let t = file("golden-all.trace", GOLDEN);
    let o = snapcheck(&["check", "--all-alphas", t.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("# assignment 1\n"));
}

#[test]
fn empty_trace_is_linearizable() {
    let t = file("empty.trace", "n=2\n");
    let o = snapcheck(&["check", t.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn crossed_scans_exit_one_from_both_deciders() {
    let t = file("crossed.trace", CROSSED);
    for cmd in ["check", "oracle"] {
        let o = snapcheck(&[cmd, t.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{cmd}");
        assert_eq!(stdout(&o), "NOT_LINEARIZABLE\n");
    }
}

#[test]
fn input_errors_exit_two() {
    let overlap = file("overlap.trace", "n=2\n0 update 0 3 arg=1\n0 scan 2 4 ret=0,0\n");
    let o = snapcheck(&["check", overlap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("overlap"));

    let syntax = file("syntax.trace", "n=2\n0 frob 0 1\n");
    let o = snapcheck(&["oracle", syntax.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));

    assert_eq!(snapcheck(&["check", "/nonexistent/trace"]).status.code(), Some(2));
    assert_eq!(snapcheck(&["hunt", "NoSuchModel"]).status.code(), Some(2));
    assert_eq!(snapcheck(&["hunt", "AtomicMock", "--bound-steps", "0"]).status.code(), Some(2));
    assert_eq!(snapcheck(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn oracle_bound_from_environment() {
    let t = file("golden-bound.trace", GOLDEN);
    let run = |bound: &str| {
        Command::new(env!("CARGO_BIN_EXE_snapcheck"))
            .args(["oracle", t.to_str().unwrap()])
            .env("SNAPCHECK_ORACLE_BOUND", bound)
            .output()
            .unwrap()
    };
    assert_eq!(run("3").status.code(), Some(2));
    assert_eq!(run("many").status.code(), Some(2));
    let ok = run("4");
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("LINEARIZABLE\n"));
}

#[test]
fn props_reports_per_property() {
    let t = file("golden-props.trace", GOLDEN);
    let good = file("golden.alpha", "alpha 0 p0.2 p0.1\nalpha 1 p0.2 p1.1\n");
    let o = snapcheck(&["props", t.to_str().unwrap(), good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "no violations\n");

    // the scan returned 2 for p1, which the initial update did not write
    let bad = file("golden-bad.alpha", "alpha 0 p0.2 p0.1\nalpha 1 p0.2 p1.0\n");
    let o = snapcheck(&["props", t.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().all(|l| l.starts_with('P')));
    assert!(stdout(&o).contains("P1 "));

    let unknown = file("golden-unknown.alpha", "alpha 0 p0.9 p0.1\n");
    assert_eq!(snapcheck(&["props", t.to_str().unwrap(), unknown.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn simulate_reproduces_golden() {
    let s = file("golden.sim", "n=2\np0: update(1) scan\np1: update(2) update(3)\nschedule: 1 0 1 1 0 0 0 1\n");
    let o = snapcheck(&["simulate", "AtomicMock", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), GOLDEN);
}

#[test]
fn hunt_exit_codes_and_replayable_output() {
    let o = snapcheck(&["hunt", "AtomicMock", "--bound-steps", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("CLEAN count="));

    let args = ["hunt", "SingleCollect", "--processes", "3", "--bound-ops", "1", "--bound-steps", "8"];
    let o = snapcheck(&args);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("COUNTEREXAMPLE\n"));
    assert!(out.ends_with("NOT_LINEARIZABLE\n"));

    // the embedded trace is a valid trace file on its own
    let trace: String = out
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#') && *l != "NOT_LINEARIZABLE")
        .map(|l| format!("{l}\n"))
        .collect();
    let t = file("hunt.trace", &trace);
    assert_eq!(snapcheck(&["oracle", t.to_str().unwrap()]).status.code(), Some(1));

    let parallel = snapcheck(&[&args[..], &["--jobs", "4"]].concat());
    assert_eq!(stdout(&parallel), out);
}

#[test]
fn reduction_flags_breach_for_value_sensitive_model() {
    let o = snapcheck(&["reduction", "ParityToy", "--bound-steps", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("REDUCTION BREACH\n"));
    let o = snapcheck(&["reduction", "AtomicMock", "--bound-steps", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("REDUCTION HOLDS\n"));
}

#[test]
fn out_flag_writes_report() {
    let t = file("golden-out.trace", GOLDEN);
    let dest = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-report.txt");
    let o = snapcheck(&["oracle", t.to_str().unwrap(), "--out", dest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(dest).unwrap().starts_with("LINEARIZABLE\n"));
}
