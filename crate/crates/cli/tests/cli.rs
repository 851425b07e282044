use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mudp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mudp"))
        .args(args)
        .args(["--out", out.to_str().unwrap()])
        .output()
        .expect("run mudp")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.ends_with("\r\n"));
    text.split_terminator("\r\n").map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Keys appear in `text` in the given order (serde_json::Value would sort them).
fn assert_in_order(text: &str, keys: &[&str]) {
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap_or_else(|| panic!("missing {k}"))).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{keys:?} at {pos:?}");
}

#[test]
fn constant_datum_stays_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["solve", "--init", "0.3", "--n", "64", "--dt", "1e-3", "--t-end", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(rows[0], ["t", "x", "u"]);
    assert_eq!(rows.len(), 1 + 1001 * 64);
    for r in &rows[1..] {
        assert!((r[2].parse::<f64>().unwrap() - 0.3).abs() <= 1e-14, "{r:?}");
    }
    assert_eq!(rows.last().unwrap()[0], "1.0");
}

#[test]
fn reference_solve_meets_monitor_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["solve", "--monitor-every", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("monitors.csv"));
    assert_eq!(rows[0], ["t", "mean_drift", "momentum_drift", "min_slope", "sup_ux"]);
    assert_eq!(rows.len(), 1 + 101);
    for r in &rows[1..] {
        assert!(r[1].parse::<f64>().unwrap() <= 1e-11);
        // Eulerian runs have no flow map
        assert!(r[2].is_empty() && r[3].is_empty());
    }
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "solve");
    assert_eq!(m["termination"], "completed");
    assert_eq!(m["init"]["value"], "0.2 + 0.05*cos(2*pi*x)");
    assert_eq!(m["choices"]["rhs_mode"], "momentum_form");
    assert_eq!(m["files"], serde_json::json!(["trajectory.csv", "monitors.csv", "manifest.json"]));
    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert_in_order(&text, &["\"command\"", "\"version\"", "\"init\"", "\"config\"", "\"files\"", "\"wall_time_seconds\""]);
}

#[test]
fn reference_geodesic_conserves_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["geodesic", "--monitor-every", "50", "--wide"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let monitors = csv_rows(&dir.path().join("monitors.csv"));
    for r in &monitors[1..] {
        assert!(r[1].parse::<f64>().unwrap() <= 1e-11);
        assert!(r[2].parse::<f64>().unwrap() <= 1e-8);
        assert!(r[3].parse::<f64>().unwrap() > 0.5);
    }
    let traj = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(traj.len(), 1 + 21);
    assert_eq!(traj[0].len(), 1 + 2 * 256);
    assert_eq!(traj[0][1], "phi_disp_0");
    assert_eq!(traj[0][257], "xi_0");
}

#[test]
fn zero_time_step_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["solve", "--dt", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--dt"), "{}", stderr(&o));
    for (flag, value) in [("--n", "7"), ("--t-end", "-1"), ("--monitor-every", "0")] {
        let o = mudp(&["solve", flag, value], dir.path());
        assert_eq!(o.status.code(), Some(2), "{flag}");
        assert!(stderr(&o).contains(flag), "{flag}: {}", stderr(&o));
    }
}

#[test]
fn bad_expressions_are_config_errors_with_positions() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["solve", "--init", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("position 0"), "{}", stderr(&o));
    let o = mudp(&["solve", "--init", "sin(3*pi*x)"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("non-periodic"), "{}", stderr(&o));
}

#[test]
fn blowup_exits_3_and_still_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["solve", "--init", "5*sin(2*pi*x)", "--n", "64"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    for f in ["trajectory.csv", "monitors.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["termination"], "blowup_detected");
    assert!(m["final_time"].as_f64().unwrap() < 1.0);

    let o = mudp(&["geodesic", "--init", "5*sin(2*pi*x)", "--n", "64"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = mudp(&["expmap", "--init", "5*sin(2*pi*x)", "--n", "64"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn fourier_input_matches_expression() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("modes.json");
    fs::write(&spec, "[[0, 0.2, 0], [1, 0.05, 0]]").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["solve", "--n", "32", "--t-end", "0.1"];
    let mut fa = args.to_vec();
    fa.extend(["--fourier", spec.to_str().unwrap()]);
    assert_eq!(mudp(&fa, &a).status.code(), Some(0));
    assert_eq!(mudp(&args, &b).status.code(), Some(0));
    let (ra, rb) = (csv_rows(&a.join("trajectory.csv")), csv_rows(&b.join("trajectory.csv")));
    for (x, y) in ra.iter().zip(&rb).skip(1) {
        let d = (x[2].parse::<f64>().unwrap() - y[2].parse::<f64>().unwrap()).abs();
        assert!(d <= 1e-15);
    }
    let o = mudp(&["solve", "--init", "1", "--fourier", spec.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_filters_by_group() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["validate", "--only", "conservation"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = json(&dir.path().join("validate.json"));
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["conservation.momentum", "conservation.mean"]);
    let text = fs::read_to_string(dir.path().join("validate.json")).unwrap();
    assert_in_order(&text, &["\"name\"", "\"paper_anchor\"", "\"measured\"", "\"tolerance\"", "\"pass\""]);
    let o = mudp(&["validate", "--only", "nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn default_validation_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["validate"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    let report = json(&dir.path().join("validate.json"));
    assert_eq!(report["failed"], 0);
    assert_eq!(report["passed"].as_u64().unwrap() as usize, mudp_core::validate::check_names().len());
}

#[test]
fn converge_rejects_short_ladders() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["converge", "--dt-ladder", "1e-3,2e-3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 3"), "{}", stderr(&o));
}

#[test]
fn converge_writes_json_and_dat() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["converge", "--n", "32", "--t-end", "0.5", "--dt-ladder", "0.01,0.005,0.0025"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(&dir.path().join("converge.json"));
    assert_eq!(report["ladder"], "dt");
    let order = report["rows"][0]["observed_order"].as_f64().unwrap();
    assert!((order - 4.0).abs() <= 0.2, "{order}");
    let dat = fs::read_to_string(dir.path().join("converge.dat")).unwrap();
    let lines: Vec<&str> = dat.lines().collect();
    assert!(lines[0].starts_with('#'));
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split_whitespace().count() == 5));
}

#[test]
fn expmap_writes_jacobian() {
    let dir = tempfile::tempdir().unwrap();
    let o = mudp(&["expmap", "--init", "0.05*cos(2*pi*x)", "--n", "32", "--dt", "1e-2", "--modes", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let jac = csv_rows(&dir.path().join("jacobian.csv"));
    assert_eq!(jac.len(), 5);
    assert!(jac.iter().all(|r| r.len() == 5));
    let report = json(&dir.path().join("expmap.json"));
    assert!(report["jacobian"]["smallest_singular_value"].as_f64().unwrap() >= 0.5);
    assert!(report["min_slope"].as_f64().unwrap() > 0.0);
    let o = mudp(&["expmap", "--n", "32", "--modes", "9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
