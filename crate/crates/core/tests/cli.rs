use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exclasso"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("exclasso-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn small_spec() -> PathBuf {
    let path = scratch("small.spec");
    std::fs::write(
        &path,
        "p = 20\nn = 30\nsigma2 = 0.01\nstring_starts = 2\nstring_len = 4\ngroup_scheme = modulo(4)\n\
         lambda_grid = logspace(0.01, 1, 3)\ntrials = 2\nalgorithms = excl-prox, excl-active, classic\n",
    )
    .unwrap();
    path
}

#[test]
fn gen_problem_is_deterministic() {
    let (a, b) = (scratch("a.txt"), scratch("b.txt"));
    for out in [&a, &b] {
        let o = run(&["gen-problem", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = scratch("c.txt");
    run(&["gen-problem", "--seed", "8", "--out", c.to_str().unwrap()]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn solve_at_zero_regularization() {
    let spec = small_spec();
    let out = scratch("x.csv");
    let o = run(&[
        "solve", "--spec", spec.to_str().unwrap(), "--lambda", "0", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("converged"), "{stdout}");
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 20 + 1);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    let bad = scratch("bad.spec");
    std::fs::write(&bad, "p = 0\n").unwrap();
    let o = run(&["sweep", "--spec", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let missing = run(&["solve", "--problem", "/nonexistent/problem.txt", "--lambda", "0.1"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_writes_trial_and_mean_rows() {
    let spec = small_spec();
    let out = scratch("sweep.csv");
    let o = run(&["sweep", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["algorithm", "lambda", "n", "sigma2", "trial", "errors", "runtime_ms", "converged"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    // 3 algorithms × 3 values × (2 trials + 1 mean).
    assert_eq!(rows.len(), 27);
    assert_eq!(rows.iter().filter(|r| &r[4] == "mean").count(), 9);
}

#[test]
fn active_set_writes_a_trace() {
    let spec = small_spec();
    let trace = scratch("trace.txt");
    let o = run(&[
        "active-set", "--spec", spec.to_str().unwrap(), "--mu", "0.1", "--trace", trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(trace).unwrap();
    assert!(text.lines().count() >= 1);
}

#[test]
fn prox_check_passes() {
    let o = run(&["prox-check", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn consistency_report_header() {
    let spec = small_spec();
    let out = scratch("cons.csv");
    let o = run(&[
        "consistency-report", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["n", "seed", "trial", "c_min", "c_inf", "gamma", "phi_J", "dual_feasible", "sign_ok", "recovered"]
    );
    assert_eq!(r.records().count(), 2);
}

#[test]
fn in_process_entry_point() {
    assert_eq!(exclasso::cli::cli_main(["exclasso", "prox-check", "--trials", "10"]), 0);
    assert_eq!(exclasso::cli::cli_main(["exclasso", "nope"]), 2);
}
