use std::path::{Path, PathBuf};

use metro_junction_cli::{run_cli, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_USAGE};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let full = std::iter::once("metro-junction").chain(args.iter().copied());
    let code = run_cli(full, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn out_dir(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn validate_summarizes_the_line() {
    let r = run(&["validate", "--config", &fixture("t9.json")]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("segments 12"));
    assert!(r.stdout.contains("capacity 12"));
}

#[test]
fn oracle_check_agrees_at_a_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "check");
    let r = run(&[
        "oracle-check",
        "--config",
        &fixture("t9.json"),
        "--m",
        "2",
        "--dm",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let csv = std::fs::read_to_string(out.join("oracle_check.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0..3], ["2", "0", "false"]);
    assert!(row[3].parse::<f64>().unwrap() < 1e-9);
    assert!(row[6].parse::<f64>().unwrap() < 1e-9);
    assert!(out.join("maxplus_matrix.csv").exists());
}

#[test]
fn sweep_writes_one_row_per_feasible_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "sweep");
    let r = run(&[
        "sweep",
        "--config",
        &fixture("t9.json"),
        "--out",
        out.to_str().unwrap(),
        "--counts",
        "200",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let csv = std::fs::read_to_string(out.join("phase_diagram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 53);
    assert!(r.stdout.contains("53 points"));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("t9.json")).unwrap()).unwrap();
    value["run"]["periods"] = serde_json::json!("many");
    std::fs::write(&path, value.to_string()).unwrap();
    let r = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_CONFIG);
    assert!(r.stderr.contains("run.periods"), "{}", r.stderr);
}

#[test]
fn missing_file_is_an_io_error() {
    let r = run(&["validate", "--config", "/nonexistent/line.json"]);
    assert_eq!(r.code, EXIT_IO);
    assert!(r.stderr.contains("/nonexistent/line.json"));
}

#[test]
fn bad_usage() {
    assert_eq!(run(&["teleport"]).code, EXIT_USAGE);
    assert_eq!(run(&["sweep"]).code, EXIT_USAGE);
    assert_eq!(
        run(&["sweep", "--config", &fixture("t9.json"), "--counts", "0"]).code,
        EXIT_USAGE
    );
    assert_eq!(run(&["--help"]).code, EXIT_OK);
}

#[test]
fn transient_fraction_is_checked() {
    let r = run(&[
        "validate",
        "--config",
        &fixture("t9.json"),
        "--transient",
        "1.5",
    ]);
    assert_eq!(r.code, EXIT_CONFIG);
    assert!(r.stderr.contains("--transient"));
}

#[test]
fn deadlocked_point_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "sim");
    let r = run(&[
        "simulate",
        "--config",
        &fixture("t9.json"),
        "--m",
        "1",
        "--dm",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_INFEASIBLE);
    assert!(r.stderr.contains("deadlock"));
}

#[test]
fn simulate_reports_the_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(&dir, "sim");
    let r = run(&[
        "simulate",
        "--config",
        &fixture("t9.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["m"], 2);
    assert_eq!(summary["converged"], true);
    assert!((summary["h0_s"].as_f64().unwrap() - 350.0).abs() < 1e-9);
    assert!(out.join("departures.csv").exists());
}

#[test]
fn compare_needs_a_variant() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&[
        "compare",
        "--config",
        &fixture("t9.json"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_CONFIG);
    assert!(r.stderr.contains("variant"));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let read = |threads: &str| {
        let out = out_dir(&dir, threads);
        let r = run(&[
            "boundaries",
            "--config",
            &fixture("t9_eight_phase.json"),
            "--out",
            out.to_str().unwrap(),
            "--counts",
            "300",
            "--parallel",
            threads,
        ]);
        assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
        ["phase_diagram.csv", "boundaries.csv", "boundary_fit.csv"]
            .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(read("1"), read("3"));
}
