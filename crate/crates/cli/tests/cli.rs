use std::path::Path;
use std::process::{Command, Output};

use alphasplit_cli::config::ExperimentConfig;
use serde_json::Value;

fn run(sub: &str, dir: &Path, toml: &str) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, toml).unwrap();
    Command::new(env!("CARGO_BIN_EXE_alphasplit"))
        .arg(sub)
        .arg(&cfg)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const CC_SWEEP: &str = r#"
[geometry]
lx = 3
ly = 2
[perturbation]
family = "cc_exp"
[path]
start = 0.0
step = 0.1
count = 5
"#;

#[test]
fn sweep_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run("sweep", d.path(), CC_SWEEP);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["surface.csv", "report.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn cc_sweep_report() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run("sweep", d.path(), CC_SWEEP)), 0);
    let r = read_json(&d.path().join("report.json"));
    assert_eq!(r["command"], "sweep");
    assert_eq!(r["split"], false);
    assert_eq!(r["dlc"]["forward"], "convertible");
    assert_eq!(r["points"].as_array().unwrap().len(), 5);
    let echo: ExperimentConfig = serde_json::from_value(r["config_echo"].clone()).unwrap();
    assert_eq!(echo, ExperimentConfig::from_toml(CC_SWEEP).unwrap());

    let csv = std::fs::read_to_string(d.path().join("surface.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "lambda_index,lambda_params,alpha,S,rank,energy,lz1,lx2"
    );
    assert_eq!(lines.count(), 5 * 9);
}

#[test]
fn toric_code_star_entropy_on_smallest_torus() {
    let d = tempfile::tempdir().unwrap();
    let o = run("sweep", d.path(), "[geometry]\nlx = 2\nly = 2\n");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&d.path().join("report.json"));
    assert!(r["split"].is_null());
    let csv = std::fs::read_to_string(d.path().join("surface.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let s: f64 = f[3].parse().unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-10, "{line}");
        assert_eq!(f[4], "2");
    }
}

#[test]
fn bits_units_scale_entropies() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        "loopgas",
        d.path(),
        "[perturbation]\nfamily = \"cc_exp\"\n[output]\nunits = \"bits\"\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.path().join("surface.csv")).unwrap();
    let s: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!((s - 2.0).abs() < 1e-12);
    let r = read_json(&d.path().join("report.json"));
    assert_eq!(r["loop_gas"]["group_size"], 32);
    assert_eq!(r["loop_gas"]["length_weight"].as_f64(), Some(2.0));
}

#[test]
fn malformed_alpha_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let o = run("sweep", d.path(), "alphas = [0.5, -1.0]\n");
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alphas"));
    let o = run("sweep", d.path(), "alphas = [0.5, \"two\"]\n");
    assert_eq!(code(&o), 2);
    assert!(!d.path().join("surface.csv").exists());
}

#[test]
fn missing_config_exits_1() {
    let o = Command::new(env!("CARGO_BIN_EXE_alphasplit"))
        .args(["sweep", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn state_cap_exits_4() {
    let d = tempfile::tempdir().unwrap();
    let o = run("sweep", d.path(), "[geometry]\nlx = 4\nly = 4\n");
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn crosscheck_without_exact_path_exits_5() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        "crosscheck",
        d.path(),
        "[crosscheck]\nfamily = \"uniform_xz\"\n",
    );
    assert_eq!(code(&o), 5);
    let o = run(
        "loopgas",
        d.path(),
        "[perturbation]\nfamily = \"uniform_z\"\n",
    );
    assert_eq!(code(&o), 5);
}

fn max_deviation(report: &Value) -> f64 {
    report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["max_abs_deviation"].as_f64().unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn cc_crosscheck_agrees() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        "crosscheck",
        d.path(),
        "[geometry]\nlx = 2\nly = 2\n[path]\nvalues = [0.3]\n[crosscheck]\nfamily = \"cc_exp\"\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&d.path().join("report.json"));
    assert_eq!(r["pass"], true);
    assert!(max_deviation(&r) < 1e-8);
}

#[test]
fn tfim_crosscheck_agrees() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        "crosscheck",
        d.path(),
        "[path]\nvalues = [0.3, 0.5, 0.9]\n[chain]\nn = 12\n[crosscheck]\nfamily = \"tfim_v1\"\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&d.path().join("report.json"));
    for row in r["rows"].as_array().unwrap() {
        let dev = row["max_abs_deviation"].as_f64().unwrap();
        let gate = if row["quantity"].as_str().unwrap().starts_with("S_") {
            1e-8
        } else {
            1e-9
        };
        assert!(dev < gate, "{row}");
    }
}

#[test]
fn horizontal_crosscheck_agrees() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        "crosscheck",
        d.path(),
        "[path]\nvalues = [0.2]\n[crosscheck]\nfamily = \"horizontal_z\"\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(max_deviation(&read_json(&d.path().join("report.json"))) < 1e-8);
}

#[test]
fn chain_sweep_writes_half_chain_surface() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        "chain",
        d.path(),
        "alphas = [0.5, 1.0, 2.0]\n[path]\nvalues = [0.1, 0.2, 0.3]\n[chain]\nn = 8\n",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&d.path().join("report.json"));
    assert_eq!(r["region"], "half");
    let csv = std::fs::read_to_string(d.path().join("surface.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
}
