use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bigsample"))
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn estimate_line(o: &Output) -> Vec<String> {
    let text = stdout(o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,theta_hat,se_hat,ci_low,ci_high"));
    lines.next().unwrap().split(',').map(String::from).collect()
}

const SMALL1: [&str; 10] = ["--n", "60", "--pop-size", "6000", "--reps", "8", "--seed", "7", "--format", "csv"];

#[test]
fn simulate_study1_emits_six_rows() {
    let o = run(&[&["simulate", "study1", "--phi", "-0.2"][..], &SMALL1].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "study,scenario_or_phi,parameter,n,method,bias,se,rb_se,cr,reps,failed_reps");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("study1,-0.2,Y_N,60,Naive,"));
}

#[test]
fn simulate_study2_emits_four_rows() {
    let o = run(&[&["simulate", "study2", "--scenario", "II"][..], &SMALL1].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    let methods: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(methods, ["Naive", "Rivers", "PS", "DR"]);
}

#[test]
fn simulate_output_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "2", "5"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        let o = run(&[
            &["simulate", "study1", "--phi", "-0.5", "--threads", threads, "--full-precision"][..],
            &SMALL1,
            &["--out", out.to_str().unwrap()],
        ]
        .concat());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let written = fs::read(&out).unwrap();
        assert_eq!(written, o.stdout);
        files.push(written);
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
    // no temporary files left behind
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 3);
}

#[test]
fn config_file_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small\nscenario = III\nn = 40\npop_size = 4000\nreps = 5\nseed = 3\n").unwrap();
    let o = run(&["simulate", "study2", "--config", cfg.to_str().unwrap(), "--n", "50", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("study2,III,Y_N,50,Naive,"), "{first}");
    assert!(first.ends_with(",5,0"), "{first}");

    fs::write(&cfg, "reps = lots\n").unwrap();
    let o = run(&["simulate", "study2", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["simulate", "study2", "--scenario", "IV"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "study1", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "tilt"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "magic", "--big", "x.csv"]).status.code(), Some(2));
    let big = fixture("dr_big.csv");
    let o = run(&["estimate", "tilt", "--big", &big]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--target-means"));
    assert_eq!(run(&["estimate", "ps", "--big", &big]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "study1", "--n", "1", "--reps", "3"]).status.code(), Some(2));
}

#[test]
fn failed_run_leaves_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = run(&["simulate", "study1", "--n", "5000", "--pop-size", "6000", "--reps", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn tilt_at_sample_mean_returns_plain_mean() {
    let o = run(&["estimate", "tilt", "--big", &fixture("dr_big.csv"), "--target-means", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let f = estimate_line(&o);
    assert_eq!(f[0], "tilt");
    assert!((f[1].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn invsample_infeasible_n_reports_cap() {
    let o = run(&["estimate", "invsample", "--big", &fixture("dr_big.csv"), "--target-means", "1.2", "--n", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("max feasible n is 2"), "{}", stderr(&o));

    let o = run(&["estimate", "invsample", "--big", &fixture("dr_big.csv"), "--target-means", "1", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("n / N_B"));
}

#[test]
fn dr_fixture_matches_hand_arithmetic() {
    let o = run(&[
        "estimate",
        "dr",
        "--big",
        &fixture("dr_big.csv"),
        "--aux-sample",
        &fixture("dr_aux.csv"),
        "--population-size",
        "6",
        "--ps-columns",
        "none",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let f = estimate_line(&o);
    assert_eq!(f[0], "dr");
    assert!((f[1].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
    assert!((f[2].parse::<f64>().unwrap() - (1.0f64 / 6.0).sqrt()).abs() < 1e-12);
}

#[test]
fn runtime_failures_exit_1() {
    // two-unit auxiliary sample with a slope term is perfectly separated
    let o = run(&["estimate", "ps", "--big", &fixture("dr_big.csv"), "--aux-sample", &fixture("dr_aux.csv")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("separation"), "{}", stderr(&o));
    let o = run(&["estimate", "tilt", "--big", "/nonexistent/big.csv", "--target-means", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ddi_fixture_and_full_population() {
    let o = run(&["diagnose", "ddi", "--population", &fixture("ddi_population.csv"), "--big", &fixture("ddi_big.csv")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("error = 1\n"));
    assert!(text.contains("cov_delta_y = 0.5\n"));
    assert!(text.contains("identity check: PASS"));

    let pop = fixture("ddi_population.csv");
    let o = run(&["diagnose", "ddi", "--population", &pop, "--big", &pop]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("error = 0\n"));
    assert!(stdout(&o).contains("identity check: PASS"));

    // big sample that is not part of the population
    let o = run(&["diagnose", "ddi", "--population", &fixture("ddi_big.csv"), "--big", &pop]);
    assert_eq!(o.status.code(), Some(1));
}
