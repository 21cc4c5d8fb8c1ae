use std::path::{Path, PathBuf};
use std::process::Command;

use gwb_cli::commands::{ProjectionReport, SolveReport};
use gwb_cli::problem::{load_measure, ProblemFile};
use gwb_cli::{run, EXIT_CAP, EXIT_INPUT, EXIT_NOT_CONVERGED};
use gwb_core::measures::{DiscreteMeasure, Measure};
use gwb_core::ot::w2_discrete_exact;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn gwb(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("gwb").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn solve(problem: &Path, route: &str, out: &Path, extra: &[&str]) -> (i32, SolveReport) {
    let mut args = vec!["solve", problem.to_str().unwrap(), "--route", route, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let (code, _, err) = gwb(&args);
    assert!(code == 0 || code == EXIT_NOT_CONVERGED, "exit {code}: {err}");
    let text = std::fs::read_to_string(out.join("result.json")).unwrap();
    (code, serde_json::from_str(&text).unwrap())
}

fn sorted_atoms(m: &DiscreteMeasure) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = (0..m.len()).map(|k| (m.points()[(k, 0)], m.weights()[k])).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (x, w) in v {
        match merged.last_mut() {
            Some(last) if (last.0 - x).abs() < 1e-12 => last.1 += w,
            _ => merged.push((x, w)),
        }
    }
    merged
}

#[test]
fn gaussian_route_recovers_the_correlated_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = solve(&data("correlated.json"), "gaussian", dir.path(), &[]);
    assert_eq!(code, 0);
    assert!(report.converged);
    let Measure::Gaussian(g) = load_measure(&dir.path().join("gaussian.json")).unwrap() else { panic!() };
    let truth = nalgebra::dmatrix![0.06, 0.05; 0.05, 0.05];
    assert!((g.cov() - truth).norm() < 1e-8);
    assert!((g.mean() - nalgebra::dvector![0.5, 0.5]).norm() < 1e-10);
    assert_eq!(report.diagnostics.monotone, Some(true));
    assert_eq!(report.diagnostics.uniqueness.as_deref(), Some("rank 3/3: unique"));
}

#[test]
fn exact_route_on_consistent_file_has_zero_objective() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = solve(&data("consistent.json"), "mm-exact", dir.path(), &[]);
    assert!(report.objective.abs() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("barycenter.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,weight\n"));
}

#[test]
fn sinkhorn_route_is_close_to_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (_, exact) = solve(&data("tiny.json"), "mm-exact", &dir.path().join("a"), &[]);
    let (_, ent) = solve(&data("tiny.json"), "mm-sinkhorn", &dir.path().join("b"), &["--epsilon", "1e-3"]);
    assert!((ent.objective - exact.objective).abs() <= 0.01 * exact.objective);
}

#[test]
fn classical_route_matches_exact_route() {
    let dir = tempfile::tempdir().unwrap();
    let (_, exact) = solve(&data("tiny.json"), "mm-exact", &dir.path().join("a"), &[]);
    let (_, classical) = solve(&data("tiny.json"), "classical-mm", &dir.path().join("b"), &[]);
    assert!((classical.objective - exact.objective).abs() < 1e-8);
}

#[test]
fn free_support_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = solve(&data("tiny.json"), "free-support", &dir.path().join("a"), &["--seed", "7"]);
    let (_, b) = solve(&data("tiny.json"), "free-support", &dir.path().join("b"), &["--seed", "7"]);
    assert_eq!(a, b);
    assert_eq!(a.diagnostics.seed, Some(7));
    let ra = std::fs::read(dir.path().join("a/result.json")).unwrap();
    let rb = std::fs::read(dir.path().join("b/result.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn uniqueness_reports() {
    assert_eq!(gwb(&["check-uniqueness", data("two_axes.json").to_str().unwrap()]).1, "rank 2/3: non-unique\n");
    assert_eq!(gwb(&["check-uniqueness", data("three_axes.json").to_str().unwrap()]).1, "rank 3/3: unique\n");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("identity.json");
    std::fs::write(
        &path,
        r#"{"version": 1, "d": 3, "projections": [{"rows": 3, "cols": 3, "matrix": [1,0,0, 0,1,0, 0,0,1]}], "weights": [1.0]}"#,
    )
    .unwrap();
    assert_eq!(gwb(&["check-uniqueness", path.to_str().unwrap()]).1, "rank 6/6: unique\n");
}

#[test]
fn projections_of_a_consistent_result_equal_the_marginals() {
    let dir = tempfile::tempdir().unwrap();
    solve(&data("consistent.json"), "mm-exact", dir.path(), &[]);
    let out = dir.path().join("proj");
    let (code, _, err) = gwb(&[
        "project",
        data("consistent.json").to_str().unwrap(),
        dir.path().join("result.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let file = ProblemFile::load(&data("consistent.json")).unwrap();
    let spec = file.to_spec(&data("")).unwrap();
    for (i, m) in spec.discrete_marginals().unwrap().iter().enumerate() {
        let mut reader = csv::Reader::from_path(out.join(format!("projection_{}.csv", i + 1))).unwrap();
        let mut rows: Vec<(f64, f64)> = reader
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[0].parse().unwrap(), r[1].parse().unwrap())
            })
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let expected = sorted_atoms(m);
        assert_eq!(rows.len(), expected.len());
        for (a, b) in rows.iter().zip(&expected) {
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn projections_of_a_gaussian_result_list_axis_moments() {
    let dir = tempfile::tempdir().unwrap();
    solve(&data("correlated.json"), "gaussian", dir.path(), &[]);
    let out = dir.path().join("proj");
    gwb(&[
        "project",
        data("correlated.json").to_str().unwrap(),
        dir.path().join("result.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(out.join("projection_3.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("axis,mean,variance"));
    let fields: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((fields[1] - 1.0 / 2f64.sqrt()).abs() < 1e-10);
    assert!((fields[2] - 0.105).abs() < 1e-8);
}

#[test]
fn projections_of_a_disagreeing_instance_report_terms() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p2.json");
    std::fs::write(
        &problem,
        r#"{"version": 1, "d": 1,
            "projections": [{"rows": 1, "cols": 1, "matrix": [1.0]}, {"rows": 1, "cols": 1, "matrix": [1.0]}],
            "weights": [0.5, 0.5],
            "marginals": [{"discrete": {"points": [[0.0], [1.0]]}}, {"discrete": {"points": [[3.0], [5.0]]}}]}"#,
    )
    .unwrap();
    solve(&problem, "mm-exact", dir.path(), &[]);
    let out = dir.path().join("proj");
    gwb(&[
        "project",
        problem.to_str().unwrap(),
        dir.path().join("result.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let report: ProjectionReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("projections.json")).unwrap()).unwrap();
    let terms = report.terms.unwrap();
    let Measure::Discrete(gamma) = load_measure(&dir.path().join("result.json")).unwrap() else { panic!() };
    let spec = ProblemFile::load(&problem).unwrap().to_spec(dir.path()).unwrap();
    for (i, nu) in spec.discrete_marginals().unwrap().iter().enumerate() {
        let direct = w2_discrete_exact(&gamma, nu).unwrap().plan.cost;
        assert!(terms[i] > 1.0);
        assert!((terms[i] - direct).abs() < 1e-12);
    }
}

#[test]
fn distance_between_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = solve(&data("tiny.json"), "mm-exact", &dir.path().join("a"), &[]);
    let (code, out, _) = gwb(&[
        "distance",
        dir.path().join("a/result.json").to_str().unwrap(),
        dir.path().join("a/result.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let value: f64 = out.trim().strip_prefix("discrete W2^2 = ").unwrap().parse().unwrap();
    assert!(value.abs() < 1e-12, "{out}");
    assert_eq!(a.route, "exact-mm");
}

#[test]
fn every_data_file_round_trips() {
    for name in ["correlated.json", "two_axes.json", "three_axes.json", "consistent.json", "tiny.json"] {
        let a = ProblemFile::load(&data(name)).unwrap();
        let b: ProblemFile = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn json_keeps_full_precision_and_csv_has_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = solve(&data("correlated.json"), "gaussian", dir.path(), &[]);
    let text = std::fs::read_to_string(dir.path().join("result.json")).unwrap();
    let again: SolveReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.objective.to_bits(), again.objective.to_bits());
    solve(&data("tiny.json"), "mm-exact", &dir.path().join("t"), &[]);
    let csv = std::fs::read_to_string(dir.path().join("t/barycenter.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let mantissa = first.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
    assert_eq!(mantissa.len(), 12, "{first}");
}

#[test]
fn malformed_input_exits_with_one_and_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"version\": 1,\n  \"d\": 2,\n  oops\n}").unwrap();
    let (code, _, err) = gwb(&["solve", bad.to_str().unwrap(), "--route", "mm-exact"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains(":4:"), "{err}");

    let (code, _, err) = gwb(&["solve", data("tiny.json").to_str().unwrap(), "--route", "gaussian"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("marginals"), "{err}");

    let (code, _, _) = gwb(&["solve", data("tiny.json").to_str().unwrap(), "--route", "nope"]);
    assert_eq!(code, EXIT_INPUT);
}

#[test]
fn non_convergence_exits_with_three_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = solve(&data("correlated.json"), "gaussian", dir.path(), &["--max-iter", "3"]);
    assert_eq!(code, EXIT_NOT_CONVERGED);
    assert!(!report.converged);
    assert!(dir.path().join("gaussian.json").exists());
}

#[test]
fn tensor_cap_from_environment_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_gwb"))
        .args(["solve", data("tiny.json").to_str().unwrap(), "--route", "mm-exact", "--out"])
        .arg(dir.path())
        .env("GWB_TENSOR_CAP", "5")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_CAP));
    assert!(String::from_utf8_lossy(&status.stderr).contains("cap of 5"));
}
