use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chebclust::cli::document::{CheckDocument, RunDocument};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chebclust"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The two-line example: S1 = 1 − t/2 and S2 = t/2 on 101 points.
fn two_lines(dir: &TempDir) -> PathBuf {
    let ts: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let row = |f: &dyn Fn(f64) -> f64| ts.iter().map(|&t| format!("{:?}", f(t))).collect::<Vec<_>>().join(",");
    let header = ts.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(",");
    let text = format!("id,{header}\ns1,{}\ns2,{}\n", row(&|t| 1.0 - 0.5 * t), row(&|t| 0.5 * t));
    let path = dir.path().join("two.csv");
    fs::write(&path, text).unwrap();
    path
}

/// Six wavy signals in two groups on 40 points.
fn wavy(dir: &TempDir) -> PathBuf {
    let ts: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
    let header = ts.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(",");
    let mut text = format!("id,{header}\n");
    for s in 0..6 {
        let base = if s < 3 { 0.0 } else { 4.0 };
        let vals: Vec<String> = ts
            .iter()
            .map(|&t| format!("{:?}", base + (3.0 * t + s as f64).sin() + 0.3 * (11.0 * t * (s + 1) as f64).cos()))
            .collect();
        text.push_str(&format!("w{s},{}\n", vals.join(",")));
    }
    let path = dir.path().join("wavy.csv");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn approx_reports_the_double_point_optimum() {
    let dir = TempDir::new().unwrap();
    let input = two_lines(&dir);
    let out = dir.path().join("a.json");
    let o = run(&["approx", path_str(&input), "--degree", "1", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("optimal-double-point"), "{stdout}");
    let doc: RunDocument = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.schema_version, 1);
    assert!((doc.clusters[0].delta - 0.5).abs() <= 1e-9);
    assert_eq!(doc.clusters[0].termination, "optimal-double-point");
}

#[test]
fn check_accepts_every_optimal_line() {
    let dir = TempDir::new().unwrap();
    let input = two_lines(&dir);
    for coeffs in ["0.5,0.25", "0.5,0", "0.5,-0.25"] {
        let out = dir.path().join("c.json");
        let o = run(&["check", path_str(&input), "--coeffs", coeffs, "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(0));
        let doc: CheckDocument = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(doc.verdicts[0].optimal, "{coeffs}");
        assert!((doc.verdicts[0].delta - 0.5).abs() <= 1e-9);
    }
    let out = dir.path().join("c.json");
    run(&["check", path_str(&input), "--coeffs", "0.4,0", "--out", path_str(&out)]);
    let doc: CheckDocument = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!doc.verdicts[0].optimal);
    assert!(doc.verdicts[0].improving_direction.is_some());
}

#[test]
fn approx_and_cluster_results_round_trip_through_check() {
    let dir = TempDir::new().unwrap();
    let input = wavy(&dir);
    for (cmd, extra) in [("approx", vec!["--degree", "3"]), ("cluster", vec!["--k", "2", "--degree", "2", "--basis", "chebyshev"])] {
        let out = dir.path().join(format!("{cmd}.json"));
        let mut args = vec![cmd, path_str(&input), "--out", path_str(&out)];
        args.extend(extra);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let verdicts = dir.path().join(format!("{cmd}-check.json"));
        let o = run(&["check", path_str(&input), "--from-result", path_str(&out), "--out", path_str(&verdicts)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let doc: CheckDocument = serde_json::from_str(&fs::read_to_string(&verdicts).unwrap()).unwrap();
        let run_doc: RunDocument = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(doc.verdicts.len(), run_doc.clusters.len());
        for (v, c) in doc.verdicts.iter().zip(&run_doc.clusters) {
            assert!(v.optimal, "{cmd} cluster {}", v.cluster);
            assert_eq!(v.delta.to_bits(), c.delta.to_bits());
        }
    }
}

#[test]
fn documents_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = wavy(&dir);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = run(&["cluster", path_str(&input), "--k", "2", "--degree", "1", "--seed", "7", "--out", path_str(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn trace_deviations_stay_within_delta() {
    let dir = TempDir::new().unwrap();
    let input = wavy(&dir);
    let out = dir.path().join("a.json");
    let trace = dir.path().join("t.csv");
    let o = run(&["approx", path_str(&input), "--degree", "2", "--out", path_str(&out), "--trace-out", path_str(&trace)]);
    assert_eq!(o.status.code(), Some(0));
    let doc: RunDocument = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let delta = doc.clusters[0].delta;
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,s_max,s_min,prototype,upper_deviation,lower_deviation");
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert!(v[4].max(v[5]) <= delta + 1e-9);
        rows += 1;
    }
    assert_eq!(rows, 40);
}

#[test]
fn long_layout_matches_wide() {
    let dir = TempDir::new().unwrap();
    let wide = dir.path().join("w.csv");
    let long = dir.path().join("l.csv");
    fs::write(&wide, "id,0,0.5,1\na,1,0.75,0.5\nb,0,0.25,0.5\n").unwrap();
    fs::write(&long, "id,t,value\nb,1,0.5\na,0,1\nb,0,0\na,0.5,0.75\nb,0.5,0.25\na,1,0.5\n").unwrap();
    let (wo, lo) = (dir.path().join("w.json"), dir.path().join("l.json"));
    run(&["envelope", path_str(&wide), "--out", path_str(&wo)]);
    let o = run(&["envelope", path_str(&long), "--layout", "long", "--out", path_str(&lo)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let w = fs::read_to_string(&wo).unwrap();
    assert!(w.contains("\"delta_star\": 5.0000000000000000e-1"), "{w}");
    // signal order differs, so only the curves are compared
    let curves = |s: &str| s[s.find("\"t\"").unwrap()..].to_owned();
    assert_eq!(curves(&w), curves(&fs::read_to_string(&lo).unwrap()));
}

#[test]
fn input_and_usage_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let input = two_lines(&dir);
    let o = run(&["cluster", path_str(&input), "--k", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient data"));

    let o = run(&["check", path_str(&input), "--coeffs", "0.5,0", "--from-result", "x.json"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("nan.csv");
    fs::write(&bad, "id,0,1\na,1,NaN\n").unwrap();
    let o = run(&["approx", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let missing = dir.path().join("missing.csv");
    fs::write(&missing, "a,0,1\na,1,2\nb,0,3\n").unwrap();
    let o = run(&["envelope", path_str(&missing), "--layout", "long"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`b`") && err.contains("t = 1"), "{err}");

    let o = run(&["approx", path_str(&input), "--solver", "simplex"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_rejects_a_result_from_other_input() {
    let dir = TempDir::new().unwrap();
    let a = two_lines(&dir);
    let b = wavy(&dir);
    let out = dir.path().join("a.json");
    run(&["approx", path_str(&a), "--out", path_str(&out)]);
    let o = run(&["check", path_str(&b), "--from-result", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn iteration_limit_exits_with_1() {
    let dir = TempDir::new().unwrap();
    let input = wavy(&dir);
    let out = dir.path().join("a.json");
    let o = run(&["approx", path_str(&input), "--degree", "4", "--max-iter", "2", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let doc: RunDocument = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!doc.converged);
    assert_eq!(doc.clusters[0].termination, "iteration-limit");
}

#[test]
fn solvers_agree_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let input = wavy(&dir);
    let mut deltas = Vec::new();
    for solver in ["exchange", "lp", "cross-check"] {
        let out = dir.path().join(format!("{solver}.json"));
        let o = run(&["approx", path_str(&input), "--degree", "2", "--solver", solver, "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(0), "{solver}: {}", String::from_utf8_lossy(&o.stderr));
        let doc: RunDocument = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        deltas.push(doc.clusters[0].delta);
    }
    assert!((deltas[0] - deltas[1]).abs() <= 1e-7, "{deltas:?}");
    assert_eq!(deltas[0], deltas[2]);
}

#[test]
fn lp_dump_writes_mps() {
    let dir = TempDir::new().unwrap();
    let input = two_lines(&dir);
    let mps = dir.path().join("p.mps");
    let o = run(&["approx", path_str(&input), "--lp-dump", path_str(&mps)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&mps).unwrap();
    for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
        assert!(text.contains(section), "missing {section}");
    }
}
