use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hyperpol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperpol")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const RUN: &str = r#"{
    "system": {"omega": 1.0, "a_perp": 0.05},
    "sequence": {"n_p": 1, "tau": "2 pi/omega", "t_s": "3/2 pi/omega", "t_w": "3/2 pi/omega",
                 "t_c": "3/2 pi/omega", "n_r": 2},
    "cycles": 50
}"#;

#[test]
fn simulate_writes_series_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", RUN);
    let out = dir.path().join("series.csv");
    let o = hyperpol(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# {"));
    assert_eq!(lines[1], "cycle,polarization");
    assert_eq!(lines.len(), 52);
    assert!(lines[2].starts_with("1,0."));
    let last: f64 = lines[51].split(',').nth(1).unwrap().parse().unwrap();
    assert!(last > 0.5);
}

#[test]
fn simulate_both_engines_side_by_side() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", RUN);
    let o = hyperpol(&["simulate", "--config", &cfg, "--engine", "both"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("cycle,polarization_exact,polarization_analytic"));
    for line in text.lines().skip(2) {
        let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - v[1]).abs() < 0.02, "{line}");
    }
}

#[test]
fn steady_reports_both_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", RUN);
    let o = hyperpol(&["steady", "--config", &cfg]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let pe = v["exact"]["p_s"].as_f64().unwrap();
    let pa = v["analytic"]["p_s"].as_f64().unwrap();
    assert!(pe > 0.98 && (pa - 1.0).abs() < 1e-12);
    assert!(v["exact"]["gamma"].as_f64().unwrap() > 0.0);
    assert!(v["analytic"]["phases"]["theta"].is_number());

    let o = hyperpol(&["steady", "--config", &cfg, "--engine", "analytic"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.get("exact").is_none());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = write(dir.path(), "a.json", "{ not json");
    assert_eq!(hyperpol(&["steady", "--config", &bad_json]).status.code(), Some(2));

    let negative = write(
        dir.path(),
        "b.json",
        r#"{"system": {"omega": 1.0, "a_perp": 0.05}, "sequence": {"n_p": 1, "tau": -1.0}}"#,
    );
    let o = hyperpol(&["simulate", "--config", &negative]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau"));

    let bad_expr = write(
        dir.path(),
        "c.json",
        r#"{"system": {"omega": 1.0, "a_perp": 0.05}, "sequence": {"n_p": 1, "tau": "two pi"}}"#,
    );
    assert_eq!(hyperpol(&["steady", "--config", &bad_expr]).status.code(), Some(2));

    let unknown = write(
        dir.path(),
        "d.json",
        r#"{"system": {"omega": 1.0, "a_perp": 0.05}, "sequence": {"n_p": 1, "tau": 2.0}, "cylces": 3}"#,
    );
    assert_eq!(hyperpol(&["simulate", "--config", &unknown]).status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    assert_eq!(hyperpol(&["steady", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(hyperpol(&["steady"]).status.code(), Some(2));
}

#[test]
fn exhausted_iteration_budget_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "slow.json",
        r#"{"system": {"omega": 1.0, "a_perp": 1e-3},
            "sequence": {"n_p": 1, "tau": "2 pi/omega", "t_s": "3/2 pi/omega", "t_w": "3/2 pi/omega"},
            "exact": {"max_iterations": 1000}}"#,
    );
    let o = hyperpol(&["steady", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no convergence"));

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"system": {"omega": 1.0, "a_perp": 0.01}, "sequence": {"n_p": 1, "tau": 2.0},
            "exact": {"tol": -1.0}}"#,
    );
    assert_eq!(hyperpol(&["steady", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn magic_table_csv_and_json() {
    let o = hyperpol(&["magic-table", "--max-np", "2"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,sign,n_p,tau,t_s,t_w,t_c,gamma_window,sideband_fraction");
    assert_eq!(lines.len(), 9);
    assert_eq!(lines[1], "I,+1,1,2 pi/omega,3/2 pi/omega,3/2 pi/omega,3/2 pi/omega,2/7,2/7");

    let o = hyperpol(&["magic-table", "--max-np", "3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0]["tau"], "2 pi/omega");
    assert_eq!(rows[0]["sign"], 1);
    assert_eq!(rows[0]["method"], "I");
}

#[test]
fn sweep_is_deterministic_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"target": "rate",
            "system": {"omega": 1.0, "a_perp": 0.02},
            "sequence": {"n_p": 1, "tau": "2 pi/omega", "t_s": "3/2 pi/omega", "t_w": "3/2 pi/omega",
                         "t_c": "3/2 pi/omega", "n_r": 4},
            "axes": [{"name": "t_s", "start": 0.0, "stop": 6.0, "count": 7},
                     {"name": "n_p", "start": 1, "stop": 2, "count": 2}]}"#,
    );
    let a = hyperpol(&["sweep", "--config", &cfg, "--jobs", "1", "--engine", "both"]);
    let b = hyperpol(&["sweep", "--config", &cfg, "--jobs", "3", "--engine", "both"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("t_s,n_p,engine,P_s,lambda,gamma,status"));
    assert_eq!(text.lines().count(), 2 + 7 * 2 * 2);
}

#[test]
fn sweep_spec_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"system": {"omega": 1.0, "a_perp": 0.02}, "sequence": {"n_p": 1, "tau": 2.0},
            "axes": [{"name": "colour", "start": 0.0, "stop": 1.0, "count": 3}]}"#,
    );
    assert_eq!(hyperpol(&["sweep", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn find_tau_res_reports_the_shift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tau.json",
        r#"{"system": {"omega": 1.0, "a_perp": 0.01},
            "sequence": {"n_p": 1, "tau": "2 pi/omega", "t_s": "3/2 pi/omega", "t_w": "3/2 pi/omega",
                         "t_c": "3/2 pi/omega", "n_r": 8},
            "tau_pi": "0.2 pi/omega", "search_halfwidth": "0.1 pi/omega", "grid_step": "0.01 pi/omega"}"#,
    );
    let o = hyperpol(&["find-tau-res", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let t = v["tau_res"].as_f64().unwrap() / std::f64::consts::PI;
    assert!((t - 1.8).abs() < 0.01, "{t}");
}

#[test]
fn find_tau_res_without_coupling_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tau.json",
        r#"{"system": {"omega": 1.0, "a_perp": 0.0},
            "sequence": {"n_p": 1, "tau": "2 pi/omega", "n_r": 2},
            "tau_pi": 0.1, "search_halfwidth": 0.2, "grid_step": 0.1}"#,
    );
    assert_eq!(hyperpol(&["find-tau-res", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn robustness_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rob.json",
        r#"{"system": {"omega": 1.0, "a_perp": 0.01},
            "configs": [{"method": "I", "sign": 1, "n_p": 1, "n_r": 13},
                        {"method": "II", "sign": 1, "n_p": 1, "n_r": 8}],
            "tau_pi": [0.0, "0.4 pi/omega"]}"#,
    );
    let o = hyperpol(&["robustness", "--config", &cfg, "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "config,tau_pi,tau,abs_P_s,gamma,status");
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().skip(2).all(|l| l.ends_with(",ok")));
}
