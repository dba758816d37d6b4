use twoscale_core::curvature::{find_stationary_points, fit_slope, CurvatureOptions, StationaryPoint};
use twoscale_core::envelope::{solve_envelope, EnvelopeCoefficients, SpectralData};
use twoscale_core::lattice::SlowLattice;
use twoscale_core::linalg::C64;
use twoscale_core::medium::qw_stack;
use twoscale_core::field::Six;
use twoscale_core::synth::{basis_fields, diagnostics, diagnostics_point, first_order_field, period_averaged_sz, principal_field};

fn hyperbolic_point() -> StationaryPoint {
    let pts = find_stationary_points(&qw_stack(), (0.1, 3.0), &CurvatureOptions::default()).unwrap();
    pts.into_iter().next().unwrap()
}

#[test]
fn residual_ordering() {
    let sp = hyperbolic_point();
    let lat = SlowLattice::new(32, 32, 0.5, 0.5).unwrap();
    let data = SpectralData::gaussian_ring(lat, 1.5, 0.4, C64::new(1.0, 0.0), C64::new(0.0, 0.7)).unwrap();
    let chis = [0.02, 0.04, 0.08];
    let mut r0 = Vec::new();
    let mut r1 = Vec::new();
    for &chi in &chis {
        let coeffs = EnvelopeCoefficients::from_stationary(&sp, 0.0, chi).unwrap();
        let env = solve_envelope(&coeffs, &data, &[0.0]).unwrap();
        r0.push(principal_field(&sp, &env, chi).unwrap().maxwell_residual().l2);
        r1.push(first_order_field(&sp, &env, chi).unwrap().maxwell_residual().l2);
    }
    let x: Vec<f64> = chis.iter().map(|c: &f64| c.log2()).collect();
    let s0 = fit_slope(&x, &r0.iter().map(|r| r.log2()).collect::<Vec<_>>());
    let s1 = fit_slope(&x, &r1.iter().map(|r| r.log2()).collect::<Vec<_>>());
    assert!((s0 - 1.0).abs() <= 0.3);
    assert!((s1 - 2.0).abs() <= 0.3);
}

fn ring_solution(sp: &StationaryPoint, chi: f64, scale: C64) -> twoscale_core::envelope::EnvelopeSolution {
    let lat = SlowLattice::new(16, 16, 0.5, 0.5).unwrap();
    let data = SpectralData::gaussian_ring(lat, 1.5, 0.4, scale, scale * C64::new(0.0, 0.7)).unwrap();
    let coeffs = EnvelopeCoefficients::from_stationary(sp, 0.0, chi).unwrap();
    solve_envelope(&coeffs, &data, &[0.0]).unwrap()
}

fn max_diff(a: &[Six], b: &[Six]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max)
}

#[test]
fn basis_is_antiperiodic_at_the_band_edge() {
    let sp = hyperbolic_point();
    let b = qw_stack().period();
    let z: Vec<f64> = (0..17).map(|i| 0.37 + i as f64 * b / 16.0).collect();
    let shifted: Vec<f64> = z.iter().map(|z| z + b).collect();
    let (x0, y0) = basis_fields(&sp, &z);
    let (x1, y1) = basis_fields(&sp, &shifted);
    let neg = |v: &[Six]| v.iter().map(|s| s.map(|c| -c)).collect::<Vec<_>>();
    assert!(max_diff(&x1, &neg(&x0)) <= 1e-10);
    assert!(max_diff(&y1, &neg(&y0)) <= 1e-10);
}

#[test]
fn pointwise_diagnostics() {
    let zero = diagnostics(&[(2.0, 1.0, [C64::new(0.0, 0.0); 6])]);
    assert_eq!(zero.s[0], [0.0; 3]);
    assert_eq!(zero.u[0], 0.0);
    assert_eq!(zero.identity_defect, 0.0);
    // x-polarized plane wave along z: H_y = sqrt(ε/μ) E_x
    let (eps, mu) = (4.0f64, 1.0f64);
    let a = C64::new(0.6, -0.8);
    let z0 = C64::new(0.0, 0.0);
    let v = [a, z0, z0, z0, a * (eps / mu).sqrt(), z0];
    let (s, u) = diagnostics_point(eps, mu, &v);
    assert!((s[2] - 0.5 * (eps / mu).sqrt() * a.norm_sqr()).abs() <= 1e-15);
    assert!(s[0].abs() + s[1].abs() <= 1e-15);
    assert!((u - 0.5 * eps * a.norm_sqr()).abs() <= 1e-15);
    assert!(diagnostics(&[(eps, mu, v)]).identity_defect <= 1e-15);
}

#[test]
fn stationary_modes_carry_no_net_flux() {
    let sp = hyperbolic_point();
    for which in [0, 1] {
        assert!(period_averaged_sz(&sp, which).unwrap().abs() <= 1e-10);
    }
}

#[test]
fn field_is_linear_in_the_envelope() {
    let sp = hyperbolic_point();
    let lambda = C64::new(-1.3, 2.1);
    let f1 = first_order_field(&sp, &ring_solution(&sp, 0.05, C64::new(1.0, 0.0)), 0.05).unwrap();
    let f2 = first_order_field(&sp, &ring_solution(&sp, 0.05, lambda), 0.05).unwrap();
    let z = 1.234;
    let a: Vec<Six> = f1.psi_at(z).into_iter().map(|s| s.map(|c| c * lambda)).collect();
    let b = f2.psi_at(z);
    let scale = a.iter().flat_map(|s| s.iter()).map(|c| c.norm()).fold(0.0, f64::max);
    assert!(max_diff(&a, &b) <= 1e-13 * scale);
}

#[test]
fn frozen_envelope_is_an_exact_mode() {
    let sp = hyperbolic_point();
    let env = ring_solution(&sp, 0.05, C64::new(1.0, 0.0));
    let p = principal_field(&sp, &env, 0.0).unwrap();
    assert!(p.maxwell_residual().l2 <= 1e-10);
    // the correction enters as χ φ1 and vanishes with χ
    let f = first_order_field(&sp, &env, 0.0).unwrap();
    assert!(max_diff(&p.psi_at(0.61), &f.psi_at(0.61)) == 0.0);
    assert!(principal_field(&sp, &env, 0.3).is_err());
}
