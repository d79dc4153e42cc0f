//! End-to-end runs of the command-line binary: artifact layout, exit
//! codes, and byte-level determinism across processes and thread counts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helmbal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn sweep_artifacts_are_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        r#"{
            "medium": {"dim": 2, "k": 1.0},
            "rho": 1.0,
            "measure": {"atoms": [{"point": [0.0, 0.0, 0.0], "mass": 5.2584277032597378}]},
            "grid": {"h": 0.05, "box": "auto"}
        }"#,
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let ra = run(&["sweep", "--scenario", &scenario, "--out", out_a.to_str().unwrap(), "--threads", "1"]);
    let rb = run(&["sweep", "--scenario", &scenario, "--out", out_b.to_str().unwrap(), "--threads", "4"]);
    assert_eq!(ra.status.code(), Some(0), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(rb.status.code(), Some(0));

    for name in [
        "manifest.json",
        "summary.json",
        "u.f64",
        "u.f64.json",
        "v.f64",
        "b.f64",
        "source.f64",
        "omega.pgm",
        "omega.pgm.json",
        "saturated.pgm",
    ] {
        let a = fs::read(out_a.join(name)).unwrap_or_else(|_| panic!("{name} missing"));
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }

    // The swept mass fills the disc the closed form predicts: the atom
    // carries c_k(1.5), so omega has area near pi 1.5^2.
    let summary = read_json(&out_a.join("summary.json"));
    assert_eq!(summary["feasible"], serde_json::Value::Bool(true));
    assert_eq!(summary["converged"], serde_json::Value::Bool(true));
    let cells = summary["omega_cell_count"].as_u64().unwrap() as f64;
    let area = cells * 0.05 * 0.05;
    let target = std::f64::consts::PI * 1.5 * 1.5;
    assert!((area - target).abs() < 0.1 * target, "area {area} vs {target}");
    // The result is rho on the saturated disc, so its mass is the disc
    // area, not the source mass: the k^2 u term generates mass.
    let mass = summary["B_total_mass"].as_f64().unwrap();
    assert!((mass - target).abs() < 0.02 * target, "mass {mass} vs {target}");
    assert!(summary["lambda1_omega"].as_f64().unwrap() > 1.0);

    let manifest = read_json(&out_a.join("manifest.json"));
    assert_eq!(manifest["tool"], "helmbal");
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["scenario_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["grid"]["h"].as_f64().unwrap(), 0.05);
}

#[test]
fn infeasible_sweep_exits_with_the_documented_code() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        r#"{
            "medium": {"dim": 2, "k": 1.0},
            "rho": 1.0,
            "measure": {"atoms": [{"point": [0.0, 0.0, 0.0], "mass": 12.0}]},
            "grid": {"h": 0.1, "box": "auto"},
            "solver": {"compute_lambda1": false}
        }"#,
    );
    let out = dir.path().join("out");
    let r = run(&["sweep", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["feasible"], serde_json::Value::Bool(false));
    assert!(summary["infeasible_reason"].as_str().unwrap().len() > 3);
    assert!(!out.join("omega.pgm").exists(), "no masks for infeasible runs");
    assert!(!out.join("u.f64").exists());
}

#[test]
fn bad_scenarios_exit_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), r#"{"medium": {"dim": 4, "k": 1.0}, "rho": 1.0}"#);
    let out = dir.path().join("out");
    let r = run(&["sweep", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("error:"));
}

#[test]
fn radial_table_lists_the_kernel_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        r#"{
            "medium": {"dim": 2, "k": 1.0},
            "rho": 1.0,
            "measure": {"atoms": [{"point": [0.0, 0.0, 0.0], "mass": 1.0}]},
            "radial": {"rows": [
                {"kind": "constants"},
                {"kind": "constants", "dim": 3},
                {"kind": "kernels", "r_start": 0.5, "r_stop": 1.5, "count": 3},
                {"kind": "point_mass", "mass": 5.2584277032597378},
                {"kind": "growth", "initial_radius": 0.8, "times": [0.2]}
            ]}
        }"#,
    );
    let out = dir.path().join("out");
    let r = run(&["radial-table", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));

    let mut rk = Vec::new();
    let mut seen = Vec::new();
    let mut rdr = csv::Reader::from_path(out.join("radial.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        vec!["quantity", "medium", "parameters", "value"]
    );
    for rec in rdr.records() {
        let rec = rec.unwrap();
        seen.push(rec[0].to_owned());
        if &rec[0] == "R_k" {
            rk.push((rec[1].to_owned(), rec[3].parse::<f64>().unwrap()));
        }
        if &rec[0] == "point_mass_radius" {
            assert!((rec[3].parse::<f64>().unwrap() - 1.5).abs() < 1e-9);
        }
        if &rec[0] == "growth_radius" {
            assert!((rec[3].parse::<f64>().unwrap() - 0.84617334640882208).abs() < 1e-9);
        }
    }
    assert_eq!(rk.len(), 2);
    assert!((rk[0].1 - 2.4048255576957728).abs() < 1e-12, "2D threshold");
    assert!((rk[1].1 - std::f64::consts::PI).abs() < 1e-12, "3D threshold");
    for q in ["c_k", "d_k", "psi", "null_ball_radius"] {
        assert!(seen.iter().any(|s| s == q), "{q} row missing");
    }
}

#[test]
fn verify_passes_on_a_swept_ball_and_reports_the_family() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        r#"{
            "medium": {"dim": 2, "k": 1.0},
            "rho": 1.0,
            "measure": {"balls": [{"center": [0.0, 0.0, 0.0], "radius": 1.0, "density": 2.0}]},
            "grid": {"h": 0.05, "box": "auto"},
            "verify": {"nodes": 48, "interior_points": 16}
        }"#,
    );
    let out = dir.path().join("out");
    let r = run(&["verify", "--scenario", &scenario, "--out", out.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report = read_json(&out.join("summary.json"));
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert_eq!(report["test_family"], "fundamental solution translates");
    assert!(report["max_exterior_gap"].as_f64().unwrap() < report["tolerance"].as_f64().unwrap());
    assert!(report["interior_points_used"].as_u64().unwrap() > 0);
}

#[test]
fn lambda1_command_rates_a_disc() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        r#"{
            "medium": {"dim": 2, "k": 1.0},
            "rho": 1.0,
            "grid": {"h": 0.05, "box": "auto"},
            "lambda1": {"ball": {"center": [0.0, 0.0, 0.0], "radius": 1.0}}
        }"#,
    );
    let out = dir.path().join("out");
    let r = run(&["lambda1", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = read_json(&out.join("summary.json"));
    let l1 = summary["lambda1"].as_f64().unwrap();
    // Unit disc ground energy is j_{0,1}^2, up to the staircase offset.
    assert!((5.2..6.2).contains(&l1), "lambda1 {l1}");
    assert_eq!(summary["coercive"], serde_json::Value::Bool(true));
    assert_eq!(summary["region"], "ball");
    assert!(out.join("region.pgm").exists());
}

#[test]
fn heleshaw_writes_the_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        r#"{
            "medium": {"dim": 2, "k": 1.0},
            "rho": 1.0,
            "measure": {"atoms": [{"point": [0.0, 0.0, 0.0], "mass": 1.0}]},
            "grid": {"h": 0.05, "box": {"lo": [-1.4, -1.4, 0.0], "hi": [1.4, 1.4, 0.0]}},
            "heleshaw": {
                "initial": {"ball": {"center": [0.0, 0.0, 0.0], "radius": 0.8}},
                "injection_point": [0.0, 0.0, 0.0],
                "times": [0.2, 0.5]
            }
        }"#,
    );
    let out = dir.path().join("out");
    let r = run(&["heleshaw", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("domain_000.pgm").exists());
    assert!(out.join("domain_001.pgm").exists());
    let summary = read_json(&out.join("summary.json"));
    let steps = summary["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 2);
    // Saturated discs of the predicted radii at both times.
    let expect = [0.84617334640882208, 0.91274267182945616];
    for (step, target) in steps.iter().zip(expect) {
        let r = step["equivalent_radius"].as_f64().unwrap();
        assert!((r - target).abs() < 2.0 * 0.05, "radius {r} vs {target}");
        assert_eq!(step["feasible"], serde_json::Value::Bool(true));
    }
    assert!(summary["halted"].is_null());
    assert_eq!(summary["containment_violations"].as_u64(), Some(0));
}
