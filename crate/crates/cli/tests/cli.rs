use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plab_core::field::read_dump;
use plab_core::ScalarField;
use serde_json::{json, Value};

fn plab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plab"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Write `config` into a fresh directory and run `cmd` on it.
fn run_config(cmd: &str, config: &Value, extra: &[&str]) -> (tempfile::TempDir, Output) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let mut args = vec![cmd, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = plab(&args);
    (dir, out)
}

fn out_dir(dir: &tempfile::TempDir) -> PathBuf {
    dir.path().join("out")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn grid(cells: usize, lo: f64, hi: f64) -> Value {
    let h = (hi - lo) / cells as f64;
    json!({"nx": cells + 1, "ny": cells + 1, "x0": lo, "y0": lo, "h": h})
}

fn affine_config(p: f64) -> Value {
    json!({
        "p": p,
        "grid": grid(128, 0.0, 1.0),
        "boundary": {"catalogue": {"name": "affine", "a": [0.7, -1.2], "b": 0.3}},
        "balls": {"explicit": [
            {"center": [0.5, 0.5], "radius": 0.3},
            {"center": [0.4, 0.6], "radius": 0.35}
        ]},
        "decay": {"K": 4}
    })
}

#[test]
fn affine_solve_reproduces_the_data() {
    let (dir, out) = run_config("solve", &affine_config(3.0), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let u: ScalarField = read_dump(&out_dir(&dir).join("u")).unwrap();
    for k in 0..u.grid().len() {
        let q = u.grid().node_position(k);
        assert!((u.at(k) - (0.7 * q.x - 1.2 * q.y + 0.3)).abs() < 1e-10);
    }
    for name in ["grad_u", "A_grad", "V_grad"] {
        assert!(out_dir(&dir).join(format!("{name}.csv")).is_file());
    }
    let conv = read_json(&out_dir(&dir).join("convergence.json"));
    assert!(conv["error"]["max"].as_f64().unwrap() < 1e-10);
}

fn manufactured_error(cells: usize) -> f64 {
    let config = json!({
        "p": 2,
        "grid": grid(cells, 0.0, 1.0),
        "forcing": {"manufactured": {"solution": {"catalogue": {
            "name": "trig", "terms": [{"amp": 1.0, "kx": 3.141592653589793, "ky": 3.141592653589793, "px": 0.0, "py": 0.0}]
        }}}}
    });
    let (dir, out) = run_config("solve", &config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    read_json(&out_dir(&dir).join("convergence.json"))["error"]["l2"].as_f64().unwrap()
}

#[test]
fn manufactured_solve_refines_quadratically() {
    let ratio = manufactured_error(16) / manufactured_error(32);
    assert!((3.5..=4.5).contains(&ratio), "refinement ratio {ratio}");
}

#[test]
fn missing_p_is_a_config_error() {
    let mut config = affine_config(3.0);
    config.as_object_mut().unwrap().remove("p");
    let (_dir, out) = run_config("solve", &config, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing field `p`"));
}

#[test]
fn unseeded_sampling_is_a_config_error() {
    let mut config = affine_config(3.0);
    config["balls"] = json!({"sampler": {"count": 3, "radius_range": [0.3, 0.35]}});
    let (_dir, out) = run_config("decay", &config, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let (_dir, out) = run_config("decay", &config, &["--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solver_failure_exits_with_two() {
    let mut config = affine_config(4.5);
    config["boundary"] = json!({"random": {"modes": 3, "max_wavenumber": 6.0, "amplitude": 1.0}});
    config["seed"] = json!(1);
    config["solver"] = json!({"max_iter": 1});
    let (_dir, out) = run_config("solve", &config, &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn affine_decay_is_flagged_exact() {
    let (dir, out) = run_config("decay", &affine_config(3.0), &["--plot-tables"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&out_dir(&dir).join("decay_summary.json"));
    for q in ["A_grad", "grad", "V_grad"] {
        assert_eq!(summary["all_exact_decay"][q], json!(true), "{q}: {summary}");
    }
    let csv = fs::read_to_string(out_dir(&dir).join("decay.csv")).unwrap();
    assert!(csv.starts_with("# seed=0\ncenter_x,center_y,t0,theta,k,t_k,osc,quantity,w\n"));
    assert!(out_dir(&dir).join("decay.dat").is_file());
}

#[test]
fn tiny_balls_fail_the_resolution_guard() {
    let mut config = affine_config(3.0);
    config["balls"] = json!({"explicit": [
        {"center": [0.5, 0.5], "radius": 0.1},
        {"center": [0.4, 0.4], "radius": 0.1},
        {"center": [0.5, 0.5], "radius": 0.4}
    ]});
    let (dir, out) = run_config("decay", &config, &[]);
    assert_eq!(out.status.code(), Some(4));
    let summary = read_json(&out_dir(&dir).join("decay_summary.json"));
    assert_eq!(summary["failed_balls"], json!(2));
}

fn besov_config() -> Value {
    let mut config = affine_config(3.0);
    config["grid"] = grid(160, 0.0, 1.0);
    config["boundary"] = json!({"random": {"modes": 3, "max_wavenumber": 6.0, "amplitude": 1.0}});
    config["seed"] = json!(3);
    config["smoothness"] = json!([
        {"s": 0.5, "rho": 2, "q": 2, "w": 1.5},
        {"s": 0.7, "rho": 1.5, "q": 1.5, "w": 1}
    ]);
    config["seminorms"] = json!(["besov", "triebel"]);
    config
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn besov_and_triebel_agree_when_rho_equals_q() {
    let (dir, out) = run_config("besov", &besov_config(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&out_dir(&dir).join("besov.csv"));
    assert_eq!(rows.len(), 2 * 2 * 2);
    let key = |r: &Vec<String>| (r[0].clone(), r[1].clone(), r[5].clone());
    for b in rows.iter().filter(|r| r[4] == "besov") {
        let t = rows.iter().find(|r| r[4] == "triebel" && key(r) == key(b)).unwrap();
        let (vb, vt): (f64, f64) = (b[9].parse().unwrap(), t[9].parse().unwrap());
        assert!(vb > 0.0 && (vb - vt).abs() <= 1e-10 * vb, "{vb} {vt}");
    }
}

#[test]
fn constant_fields_have_zero_seminorms() {
    let mut config = besov_config();
    config["boundary"] = json!({"catalogue": {"name": "affine", "a": [0.0, 0.0], "b": 2.0}});
    config["besov_quantity"] = json!("scalar");
    let (dir, out) = run_config("besov", &config, &[]);
    assert!(out.status.success());
    for row in csv_rows(&out_dir(&dir).join("besov.csv")) {
        assert!(row[9].parse::<f64>().unwrap().abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn all_rows_skipped_exits_with_five() {
    let mut config = besov_config();
    config["smoothness"] = json!([{"s": 1.5, "rho": 2, "q": 2, "w": 1}]);
    let (dir, out) = run_config("besov", &config, &[]);
    assert_eq!(out.status.code(), Some(5));
    let rows = csv_rows(&out_dir(&dir).join("besov.csv"));
    assert!(rows.iter().all(|r| r[10] == "invalid_parameters"));
}

#[test]
fn transfer_skips_inadmissible_rows_and_reports_ratios() {
    let mut config = besov_config();
    config["p"] = json!(3);
    config["forcing"] = json!({"manufactured": {
        "solution": {"random": {"modes": 3, "max_wavenumber": 5.0, "amplitude": 0.5, "linear": [1.0, 0.5]}},
        "psi": {"random": {"modes": 3, "max_wavenumber": 5.0, "amplitude": 0.3, "stream": 1}}
    }});
    config.as_object_mut().unwrap().remove("boundary");
    config["balls"] = json!({"explicit": [{"center": [0.5, 0.5], "radius": 0.25}]});
    config["smoothness"] = json!([
        {"s": 0.5, "rho": 2, "q": 2, "w": 1.5},
        {"s": 0.5, "rho": 1, "q": "inf", "w": 1}
    ]);
    config["seminorms"] = json!(["besov"]);
    let (dir, out) = run_config("transfer", &config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&out_dir(&dir).join("transfer.csv"));
    assert_eq!(rows[0][13], "ok");
    assert!(rows[0][11].parse::<f64>().unwrap().is_finite());
    assert_eq!(rows[1][13], "embedding_violated");
    let summary = read_json(&out_dir(&dir).join("transfer_summary.json"));
    assert!(summary["rows"][0]["max_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn selftest_passes_and_repeats() {
    let a = plab(&["selftest"]);
    let b = plab(&["selftest"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn injected_fault_is_named() {
    let out = plab(&["selftest", "--inject-fault", "a-map-sign"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL monotonicity"));
}

#[test]
fn catalogue_lists_and_samples() {
    let out = plab(&["catalogue"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("harmonic_poly"));
    let (dir, out) = run_config("catalogue", &affine_config(3.0), &[]);
    assert!(out.status.success());
    assert!(out_dir(&dir).join("catalogue_grad.json").is_file());
}

#[test]
fn solution_dumps_feed_later_commands() {
    let (dir, out) = run_config("solve", &besov_config(), &[]);
    assert!(out.status.success());
    let mut config = besov_config();
    config["solution"] = json!("out/u");
    let path = dir.path().join("reuse.json");
    fs::write(&path, config.to_string()).unwrap();
    let fresh = dir.path().join("fresh");
    let reused = dir.path().join("reused");
    let run = |cfg: &Path, dest: &Path| plab(&["besov", "--config", cfg.to_str().unwrap(), "--out", dest.to_str().unwrap()]);
    assert!(run(&dir.path().join("config.json"), &fresh).status.success());
    assert!(run(&path, &reused).status.success());
    assert_eq!(
        fs::read(fresh.join("besov.csv")).unwrap(),
        fs::read(reused.join("besov.csv")).unwrap()
    );
}
