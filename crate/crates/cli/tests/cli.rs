use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn delayfb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delayfb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn steady_state_without_drive_is_ground() {
    let o = delayfb(&["steady-state", "--gamma", "1", "--alpha", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0 0 -1");
}

#[test]
fn gains_at_equator_are_flagged() {
    let o = delayfb(&["gains", "--theta0", "1.5707963", "--gamma", "1"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).trim(),
        "lambda=-0.5 alpha=0.0 [unstable-equator]"
    );
}

#[test]
fn degrees_convert_on_input() {
    let rad = delayfb(&["gains", "--theta0", "0.5235987755982988"]);
    let deg = delayfb(&["gains", "--theta0", "30", "--degrees"]);
    assert_eq!(stdout(&rad), stdout(&deg));
    assert_eq!(stdout(&deg).trim(), "lambda=-0.933013 alpha=0.108253");
}

#[test]
fn purity_scan_analytic_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = delayfb(&[
        "purity-scan",
        "--theta0",
        "0",
        "--tau-grid",
        "0.02,0.05,0.1",
        "--t-sim",
        "200",
        "--dt",
        "1e-3",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("tau,purity_sim,purity_err,purity_analytic\n"));
    let analytic: Vec<String> = rows(&out).into_iter().map(|r| r[3].clone()).collect();
    assert_eq!(analytic, ["0.92", "0.8", "0.6"]);
}

#[test]
fn analytic_column_is_nan_outside_validity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = delayfb(&[
        "purity-scan",
        "--tau-grid",
        "0.3",
        "--t-sim",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(rows(&out)[0][3], "NaN");
}

fn run_locus(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "locus",
        "--tau",
        "0.02",
        "--theta0-grid",
        "6",
        "--t-sim",
        "60",
        "--burn-in",
        "10",
        "--batch-length",
        "5",
        "--dt",
        "1e-3",
        "--seed",
        "9",
        "--n-traj",
        "2",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    delayfb(&args)
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run_locus(&a, &["--deterministic"]).status.success());
    assert!(run_locus(&b, &["--deterministic"]).status.success());
    let (ta, tb) = (
        fs::read_to_string(&a).unwrap(),
        fs::read_to_string(&b).unwrap(),
    );
    let strip = |t: &str| {
        t.lines()
            .filter(|l| !l.starts_with("# out="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&ta), strip(&tb));
    assert!(!ta.contains("generated="));

    let c = dir.path().join("c.csv");
    assert!(run_locus(&c, &[]).status.success());
    assert!(fs::read_to_string(&c)
        .unwrap()
        .contains("# generated=unix:"));
}

#[test]
fn locus_rows_follow_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("locus.csv");
    assert!(run_locus(&out, &["--deterministic"]).status.success());
    let thetas: Vec<f64> = rows(&out).iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(thetas.len(), 6);
    for (k, t) in thetas.iter().enumerate() {
        let expected = -std::f64::consts::PI + std::f64::consts::PI * (k + 1) as f64 / 3.0;
        assert!((t - expected).abs() < 1e-12);
    }
    for r in rows(&out) {
        let n_eff: f64 = r[5].parse().unwrap();
        assert_eq!(n_eff, 100.0);
    }
}

#[test]
fn output_header_reruns_the_same_job() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(run_locus(&a, &["--deterministic"]).status.success());
    let o = delayfb(&[
        "--config",
        a.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&a), rows(&b));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# a run file\ncommand=gains\ntheta0=0\ngamma=4\n").unwrap();
    let o = delayfb(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "lambda=-2.0 alpha=0.0");
    let o = delayfb(&["--config", cfg.to_str().unwrap(), "gains", "--gamma", "1"]);
    assert_eq!(stdout(&o).trim(), "lambda=-1.0 alpha=0.0");
}

#[test]
fn trajectory_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = delayfb(&[
        "trajectory",
        "--mode",
        "bloch3d",
        "--theta0",
        "0.5",
        "--tau",
        "0.0201",
        "--dt",
        "1e-3",
        "--t-end",
        "2",
        "--thin",
        "10",
        "--deterministic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("# tau=0.02\n"), "rounded tau is recorded");
    assert!(text.contains("\nt,theta,x,y,z,r\n"));
    let r = rows(&out);
    assert_eq!(r.len(), 201);
    assert_eq!(r[0][..5], ["0", "3.141592653589793", "0", "0", "-1"]);
}

#[test]
fn exit_codes() {
    assert_eq!(delayfb(&["--help"]).status.code(), Some(0));
    assert_eq!(delayfb(&["--version"]).status.code(), Some(0));
    assert_eq!(delayfb(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(delayfb(&["gains"]).status.code(), Some(1));
    assert_eq!(
        delayfb(&["steady-state", "--alpha", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(
        delayfb(&[
            "trajectory",
            "--mode",
            "theta",
            "--theta0",
            "0",
            "--tau",
            "0.0205",
            "--t-end",
            "1",
            "--out",
            "/dev/null"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        delayfb(&["spectral", "--tau", "0.6"]).status.code(),
        Some(2)
    );
    assert_eq!(
        delayfb(&["spectral", "--tau", "0.05", "--omega-max", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        delayfb(&["--config", "/nonexistent/run.cfg"]).status.code(),
        Some(1)
    );
}
