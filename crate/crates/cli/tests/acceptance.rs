//! The twelve acceptance criteria, one line each.

use std::process::Command;

use twoscale_cli::config::DEFAULT_CONFIG;
use twoscale_cli::validation::run_criterion;
use twoscale_cli::RunConfig;

fn check(id: u8) {
    let cfg = RunConfig::from_toml(DEFAULT_CONFIG).unwrap();
    let c = run_criterion(&cfg, id);
    println!("\n{}", c.line());
    assert_eq!(c.id, id);
    assert!(c.passed, "{}", c.line());
}

#[test]
fn criterion_01_unit_determinant() {
    check(1);
}

#[test]
fn criterion_02_ode_oracle() {
    check(2);
}

#[test]
fn criterion_03_two_layer_edges() {
    check(3);
}

#[test]
fn criterion_04_curvature_agreement() {
    check(4);
}

#[test]
fn criterion_05_stationarity() {
    check(5);
}

#[test]
fn criterion_06_identity_suite() {
    check(6);
}

#[test]
fn criterion_07_derivative_modes() {
    check(7);
}

#[test]
fn criterion_08_envelope_solvers() {
    check(8);
}

#[test]
fn criterion_09_beam_line() {
    check(9);
}

#[test]
fn criterion_10_residual_ordering() {
    check(10);
}

#[test]
fn criterion_11_zero_group_velocity() {
    check(11);
}

#[test]
fn criterion_12_determinism() {
    check(12);
    // two independent runs of the binary produce byte-identical reports
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_twoscale"))
            .args(["validate", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion")).count(), 12);
        std::fs::read(dir.path().join("validation.json")).unwrap()
    };
    let (a, b) = (run(), run());
    let same = a == b;
    println!(
        "\ncriterion 12 {:<28} {}  validation.json ({} bytes) compared across two binary runs",
        "binary rerun",
        if same { "PASS" } else { "FAIL" },
        a.len()
    );
    assert!(same);
}
