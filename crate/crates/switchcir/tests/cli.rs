use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn switchcir(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_switchcir"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("SWITCHCIR_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = switchcir(args, out);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

/// Rows of a CSV written by the tool, without the run comment and header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_owned).collect()
}

#[test]
fn validate_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["two_regime.toml", "three_regime.toml"] {
        let cfg = fixture(f);
        let stdout = ok(&["validate", "--config", cfg.to_str().unwrap()], dir.path());
        assert!(stdout.starts_with("valid:"));
    }
    assert_eq!(rows(&dir.path().join("validation.csv")).len(), 0);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "validate");
    assert_eq!(manifest["outputs"][0]["file"], "validation.csv");
}

#[test]
fn hamiltonian_grid_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("two_regime.toml");
    ok(&["hamiltonian-grid", "--config", cfg.to_str().unwrap()], dir.path());
    let path = dir.path().join("hamiltonian_grid.csv");
    assert_eq!(header(&path), ["x", "p", "H", "dHdx", "dHdp", "iters", "residual"]);
    let data = rows(&path);
    assert_eq!(data.len(), 2500);
    // An odd p count puts p = 0 on the grid.
    ok(&["hamiltonian-grid", "--config", cfg.to_str().unwrap(), "--x-count", "5", "--p-count", "51"], dir.path());
    let data = rows(&path);
    assert_eq!(data.len(), 255);
    let zero: Vec<_> = data.iter().filter(|r| r[1].parse::<f64>().unwrap() == 0.0).collect();
    assert_eq!(zero.len(), 5);
    for r in zero {
        assert!(r[2].parse::<f64>().unwrap().abs() <= 1e-12);
    }
    let first = fs::read_to_string(&path).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(first.lines().next().unwrap(), format!("# run {}", manifest["run_id"].as_str().unwrap()));
}

#[test]
fn every_subcommand_writes_its_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("two_regime.toml");
    let c = cfg.to_str().unwrap();
    let cases: &[(&[&str], &str, &[&str])] = &[
        (&["simulate", "--paths", "8", "--n", "50"], "ensemble.csv", &["t", "mean_x", "var_x", "n_paths"]),
        (&["simulate", "--n", "50"], "trajectory.csv", &["t", "x", "regime"]),
        (&["lagrangian-grid", "--x-count", "4", "--v-count", "5"], "lagrangian_grid.csv", &["x", "v", "L", "p_star"]),
        (&["stationary", "--count", "7"], "stationary.csv", &["x", "pi_1", "pi_2"]),
        (&["limit-ode"], "limit_ode.csv", &["t", "xbar"]),
        (&["optimal-path", "--segments", "10"], "optimal_path.csv", &["t", "gamma", "segment_action"]),
        (&["nisio", "--segments", "10"], "nisio.csv", &["x0", "t_end", "target", "value", "action", "endpoint"]),
        (&["verify-averaging", "--ladder", "100,1000", "--paths", "50"], "averaging.csv", &["n", "estimate", "stderr", "analytic", "gap"]),
        (&["verify-ldp", "--ladder", "20,40", "--paths", "100"], "ldp_laplace.csv", &["n", "estimate", "stderr", "analytic", "gap"]),
        (&["verify-ldp", "--mode", "tube", "--ladder", "20,40", "--paths", "100", "--displacement", "0.2", "--delta", "0.3"], "ldp_tube.csv", &["n", "estimate", "stderr", "analytic", "gap"]),
        (&["dv-check", "--count", "9"], "dv_check.csv", &["x", "dv_stationary", "stationary_residual"]),
    ];
    for (args, file, cols) in cases {
        let mut full = args.to_vec();
        full.extend(["--config", c, "--seed", "7"]);
        ok(&full, dir.path());
        assert_eq!(header(&dir.path().join(file)), *cols, "{args:?}");
        assert!(!rows(&dir.path().join(file)).is_empty(), "{args:?}");
    }
    let traj = rows(&dir.path().join("trajectory.csv"));
    assert_eq!(traj[0][2], "1");
    let path = rows(&dir.path().join("optimal_path.csv"));
    assert_eq!(path.len(), 11);
    assert_eq!(path[10][2], "");
    for r in rows(&dir.path().join("dv_check.csv")) {
        assert!(r[1].parse::<f64>().unwrap() <= 1e-10);
    }
}

#[test]
fn simulate_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = fixture("three_regime.toml");
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--seed", "42", "--paths", "100"];
    ok(&args, a.path());
    ok(&[&args[..], &["--threads", "3"]].concat(), b.path());
    for f in ["trajectory.csv", "ensemble.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    ok(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "43"], c.path());
    assert_ne!(fs::read(a.path().join("trajectory.csv")).unwrap(), fs::read(c.path().join("trajectory.csv")).unwrap());
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("two_regime.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_switchcir"))
        .args(["limit-ode", "--config", cfg.to_str().unwrap()])
        .env("SWITCHCIR_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("limit_ode.csv").exists());
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("model.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn config_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let good = fs::read_to_string(fixture("two_regime.toml")).unwrap();

    let typo = write_config(dir.path(), &good.replace("theta = 1.0", "theta = 1.0\nthteta = 1.0"));
    let o = switchcir(&["validate", "--config", typo.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("model.toml:7") && msg.contains("thteta"), "{msg}");

    let feller = write_config(dir.path(), &good.replace("theta = 1.0", "theta = 2.0"));
    let o = switchcir(&["validate", "--config", feller.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("model.theta") && msg.contains("Feller"), "{msg}");
    let stdout = ok(&["validate", "--config", feller.to_str().unwrap(), "--allow-nonfeller"], dir.path());
    assert!(stdout.contains("warning"));
    assert_eq!(rows(&dir.path().join("validation.csv"))[0][0], "warning");

    let o = switchcir(&["validate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = switchcir(&["no-such-command"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(switchcir(&["--help"], dir.path()).status.code(), Some(0));
    let cfg = fixture("two_regime.toml");
    let o = switchcir(&["simulate", "--config", cfg.to_str().unwrap(), "--regime0", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn extreme_boundary_value_problem_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("two_regime.toml");
    let stdout = ok(
        &["optimal-path", "--config", cfg.to_str().unwrap(), "--x-start", "1e-6", "--x-end", "1e3", "--t-end", "1e-3", "--segments", "4"],
        dir.path(),
    );
    assert!(stdout.starts_with("minimum action"));
}
