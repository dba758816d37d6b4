use std::path::Path;
use std::process::{Command, Output};

use twoscale_cli::config::DEFAULT_CONFIG;
use twoscale_cli::export::BinaryGrid;
use twoscale_cli::pipeline::{bands_csv, stationary_report};
use twoscale_cli::{CliError, RunConfig};

fn twoscale(dir: &Path, config: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_twoscale"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let p = dir.join("run.toml");
        std::fs::write(&p, text).unwrap();
        cmd.arg("--config").arg(p);
    }
    cmd.output().unwrap()
}

/// Small lattice and short fast window so the binary stages stay quick.
fn small_config() -> String {
    DEFAULT_CONFIG
        .replace("n_xi = 32", "n_xi = 16")
        .replace("n_eta = 32", "n_eta = 16")
        .replace("periods = 8", "periods = 1")
        .replace("samples_per_period = 32", "samples_per_period = 8")
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let chi = DEFAULT_CONFIG.replace("chi = 0.05", "chi = 0.5");
    let out = twoscale(dir.path(), Some(&chi), &["bands"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("envelope.chi"));

    let out = twoscale(dir.path(), Some("seed = 3\n"), &["bands"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("layer"));

    let missing = Command::new(env!("CARGO_BIN_EXE_twoscale"))
        .args(["bands", "--config"])
        .arg(dir.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let read = || {
        let out = twoscale(dir.path(), None, &["bands"]);
        assert!(out.status.success());
        std::fs::read(dir.path().join("out/bands.csv")).unwrap()
    };
    let (a, b) = (read(), read());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("omega,half_trace,p_z_b_over_pi,gap\n"));
    assert_eq!(text.lines().count(), 513);
    assert!(std::fs::read_to_string(dir.path().join("out/edges.csv")).unwrap().lines().count() > 2);
}

#[test]
fn homogeneous_stack_has_no_stationary_points() {
    let text = "[[layer]]\nthickness = 1.0\neps = 2.0\nmu = 1.0\n";
    let cfg = RunConfig::from_toml(text).unwrap();
    let rep = stationary_report(&cfg).unwrap();
    assert!(rep.points.is_empty());
    assert!(!rep.warnings.is_empty());
    assert_eq!(rep.csv.lines().count(), 1);
    // a single band never produces gaps
    assert!(bands_csv(&cfg).unwrap().lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn stationary_report_lists_both_edges() {
    let cfg = RunConfig::from_toml(DEFAULT_CONFIG).unwrap();
    let rep = stationary_report(&cfg).unwrap();
    assert_eq!(rep.points.len(), 2);
    assert!((rep.points[0].omega_star - 2.461918834682).abs() < 1e-10);
    assert!((rep.points[1].omega_star - 3.821266472498).abs() < 1e-10);
    assert_eq!(rep.csv.lines().count(), 3);
}

#[test]
fn stage_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    for stage in ["envelope", "synthesize"] {
        let out = twoscale(dir.path(), Some(&cfg), &[stage]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let env = BinaryGrid::read(&dir.path().join("out/envelope.bin")).unwrap();
    assert_eq!(&env.magic, b"ENV1");
    assert_eq!(env.arrays.len(), 2);
    assert_eq!(env.dims, [16, 16, 5]);
    let fld = BinaryGrid::read(&dir.path().join("out/field.bin")).unwrap();
    assert_eq!(&fld.magic, b"FLD1");
    assert_eq!(fld.arrays.len(), 6);
    assert_eq!(BinaryGrid::from_bytes(&fld.to_bytes().unwrap()).unwrap(), fld);
    for f in ["envelope.csv", "envelope_residuals.csv", "field.csv", "residual.csv"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
}

#[test]
fn corrupt_binary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = twoscale(dir.path(), Some(&small_config()), &["envelope"]);
    assert!(out.status.success());
    let p = dir.path().join("out/envelope.bin");
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[0] ^= 0xff;
    std::fs::write(&p, &bytes).unwrap();
    match BinaryGrid::read(&p) {
        Err(CliError::Core(twoscale_core::Error::ExportIntegrity(_))) => {}
        other => panic!("{other:?}"),
    }
    std::fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
    assert!(BinaryGrid::read(&p).is_err());
}
