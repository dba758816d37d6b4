use std::f64::consts::PI;

use proptest::prelude::*;
use twoscale_core::curvature::{
    find_stationary_points, identity_suite, omega11, omega33, stationary_point, CurvatureOptions, PointKind,
    StationaryPoint,
};
use twoscale_core::floquet::{band_edges, Polarization};
use twoscale_core::medium::{build_stack, qw_stack, Layer, LayerStack};

fn two_layer() -> impl Strategy<Value = LayerStack> {
    ((0.1f64..1.0, 1.0f64..12.0, 0.5f64..2.0), (0.1f64..1.0, 1.0f64..12.0, 0.5f64..2.0))
        .prop_filter("impedance contrast >= 1.5", |(a, b)| {
            let (za, zb) = ((a.2 / a.1).sqrt(), (b.2 / b.1).sqrt());
            za.max(zb) / za.min(zb) >= 1.5
        })
        .prop_map(|(a, b)| build_stack(&[Layer::new(a.0, a.1, a.2), Layer::new(b.0, b.1, b.2)], 1.0).unwrap())
}

/// Both edges of the first gap: the first two `F = -1` edges, centred near
/// the optical Bragg frequency `π / Σ n_i d_i`.
fn first_gap(s: &LayerStack) -> Vec<StationaryPoint> {
    let path: f64 = s.layers().iter().map(|l| (l.eps * l.mu).sqrt() * l.thickness).sum();
    let wb = PI / path;
    let opts = CurvatureOptions::default();
    band_edges(s, Polarization::Axial, 0.0, (0.2 * wb, 1.9 * wb), opts.scan_points)
        .unwrap()
        .iter()
        .filter(|e| e.edge_sign < 0)
        .map(|e| stationary_point(s, e, &opts).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn curvatures_agree_on_random_stacks(s in two_layer()) {
        let pts = first_gap(&s);
        prop_assert_eq!(pts.len(), 2);
        let kinds: Vec<PointKind> = pts.iter().map(|p| p.kind).collect();
        prop_assert_eq!(kinds, vec![PointKind::Hyperbolic, PointKind::Elliptic]);
        for sp in &pts {
            prop_assert!(omega33(sp).is_ok(), "{:?}", sp.estimates);
            let h = omega11(sp, Polarization::TM).unwrap();
            let e = omega11(sp, Polarization::TE).unwrap();
            prop_assert!(h > 0.0 && e > 0.0);
            prop_assert!(sp.u_xx > 0.0);
            prop_assert_eq!(sp.u_xx, sp.u_yy);
            let ex = sp.stationarity.gradient_exponent;
            prop_assert!((1.9..=2.1).contains(&ex), "exponent {}", ex);
            // the implicit-derivative formula is a fourth estimate
            let est = &sp.estimates;
            prop_assert!((est.w11_h_implicit - h).abs() <= 1e-6 * h);
            prop_assert!((est.w11_e_implicit - e).abs() <= 1e-6 * e);
        }
    }
}

#[test]
fn identity_suite_on_a_magnetic_stack() {
    let s = build_stack(&[Layer::new(0.3, 7.0, 1.6), Layer::new(0.55, 1.4, 0.7)], 1.0).unwrap();
    for sp in first_gap(&s) {
        let r = identity_suite(&sp, 11).unwrap();
        assert!(r.max_violation() <= 1e-9, "{r:?}");
        assert!(r.symmetry <= 1e-10, "{}", r.symmetry);
        assert!(r.negative_control >= 1e-3);
    }
}

#[test]
fn qw_band_edges_are_the_stationary_points() {
    let pts = find_stationary_points(&qw_stack(), (0.1, 4.5), &CurvatureOptions::default()).unwrap();
    assert_eq!(pts.len(), 2);
    let a = (1.0f64 / 3.0).acos();
    assert!((pts[0].omega_star - 2.0 * a).abs() < 1e-11);
    assert!((pts[1].omega_star - 2.0 * (PI - a)).abs() < 1e-11);
    // mirror symmetry of the two-layer trace: |ω̈33| equal at both edges
    assert!((pts[0].w33 + pts[1].w33).abs() < 1e-9);
    for sp in &pts {
        assert!(sp.stationarity.dw_dpz.abs() < 1e-8);
        assert!(sp.stationarity.dw_dpar.abs() < 1e-8);
    }
}
