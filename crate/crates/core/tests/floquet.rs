use std::f64::consts::PI;

use proptest::prelude::*;
use twoscale_core::floquet::{
    band_edges, band_solve_omega, dispersion_f, monodromy, propagator_ac, Polarization, TransferSystem,
};
use twoscale_core::linalg::{Mat2, C64};
use twoscale_core::medium::{build_stack, Layer, LayerStack};

fn layers() -> impl Strategy<Value = Vec<Layer>> {
    prop::collection::vec((0.1f64..1.0, 1.0f64..12.0, 0.5f64..2.0), 1..=6)
        .prop_map(|v| v.into_iter().map(|(d, e, m)| Layer::new(d, e, m)).collect())
}

fn pol() -> impl Strategy<Value = Polarization> {
    prop_oneof![Just(Polarization::Axial), Just(Polarization::TM), Just(Polarization::TE)]
}

/// `(p∥², ω)` propagating in every layer; `u`, `v` are uniform in `[0, 1)`.
fn propagating(stack: &LayerStack, u: f64, v: f64) -> (f64, f64) {
    let omega = 0.05 + u * 8.0 / stack.period();
    let k = stack.wavenumber(omega);
    let n2 = (0..stack.len())
        .map(|i| stack.medium(i).eps * stack.medium(i).mu)
        .fold(f64::MAX, f64::min);
    (0.95 * v * k * k * n2, omega)
}

fn rel_diff(a: &Mat2, b: &Mat2) -> f64 {
    a.max_abs_diff(b) / a.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unit_determinant_and_real_half_trace(l in layers(), p in pol(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let s = build_stack(&l, 1.0).unwrap();
        let (p2, w) = propagating(&s, u, v);
        let m = monodromy(&s, p, p2, w).unwrap();
        prop_assert!((m.m.det() - 1.0).norm() <= 1e-12);
        let f = m.half_trace_complex();
        prop_assert!(f.im.abs() <= 1e-12 * (1.0 + f.re.abs()));
    }

    #[test]
    fn half_trace_real_for_any_input(l in layers(), p in pol(), w in 0.01f64..10.0, p2 in 0.0f64..50.0) {
        let s = build_stack(&l, 1.0).unwrap();
        let f = monodromy(&s, p, p2, w).unwrap().half_trace_complex();
        prop_assert!(f.im.abs() <= 1e-12 * (1.0 + f.re.abs()));
    }

    #[test]
    fn two_periods_square(l in layers(), p in pol(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let s = build_stack(&l, 1.0).unwrap();
        let doubled: Vec<Layer> = l.iter().chain(l.iter()).copied().collect();
        // same normalization: doubling a period keeps the averages
        let s2 = build_stack(&doubled, 1.0).unwrap();
        let (p2, w) = propagating(&s, u, v);
        let m = monodromy(&s, p, p2, w).unwrap().m;
        let m2 = monodromy(&s2, p, p2, w).unwrap().m;
        prop_assert!(rel_diff(&m2, &(m * m)) <= 1e-11);
    }

    #[test]
    fn polarizations_agree_at_normal_incidence(l in layers(), w in 0.05f64..8.0) {
        let s = build_stack(&l, 1.0).unwrap();
        let a = monodromy(&s, Polarization::Axial, 0.0, w).unwrap().m;
        for p in [Polarization::TM, Polarization::TE] {
            prop_assert!(a.max_abs_diff(&monodromy(&s, p, 0.0, w).unwrap().m) <= 1e-12);
        }
    }

    #[test]
    fn multipliers_on_the_unit_circle(l in layers(), p in pol(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let s = build_stack(&l, 1.0).unwrap();
        let (p2, w) = propagating(&s, u, v);
        let m = monodromy(&s, p, p2, w).unwrap();
        let f = m.half_trace_complex().re;
        prop_assume!(f.abs() < 1.0 - 1e-6);
        let th = f.acos();
        let (l1, l2) = m.multipliers();
        let want = [C64::from_polar(1.0, th), C64::from_polar(1.0, -th)];
        let ok = |a: C64, b: C64| (a - b).norm() <= 1e-10;
        prop_assert!((ok(l1, want[0]) && ok(l2, want[1])) || (ok(l1, want[1]) && ok(l2, want[0])));
    }

    #[test]
    fn reverse_propagation_inverts(a in -20.0f64..20.0, c in -20.0f64..20.0, d in 0.01f64..1.0) {
        let (f, r) = (propagator_ac(a, c, d), propagator_ac(a, c, -d));
        // cancellation error grows with cosh² in evanescent layers
        prop_assert!((f * r).max_abs_diff(&Mat2::identity()) <= 1e-14 * f.norm() * r.norm());
    }

    #[test]
    fn fundamental_matrix_is_quasi_periodic(l in layers(), u in 0.0f64..1.0, z in 0.0f64..3.0, n in 1i64..4) {
        let s = build_stack(&l, 1.0).unwrap();
        let (_, w) = propagating(&s, u, 0.0);
        let sys = TransferSystem::new(&s, Polarization::Axial, 0.0, w).unwrap();
        let b = s.period();
        let z = z * b;
        let lhs = sys.fundamental(z + n as f64 * b);
        let rhs = sys.fundamental(z) * sys.monodromy().powi(n);
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn homogeneous_light_line(e in 1.0f64..12.0, m in 0.5f64..2.0, d in 0.2f64..2.0, w in 0.05f64..6.0) {
        let s = build_stack(&[Layer::new(d, e, m)], 1.0).unwrap();
        let f = dispersion_f(&s, Polarization::Axial, 0.0, w).unwrap();
        prop_assert!((f - ((e * m).sqrt() * w * d).cos()).abs() <= 1e-12);
    }
}

#[test]
fn band_solve_lands_on_the_dispersion_surface() {
    let s = build_stack(&[Layer::new(0.4, 6.0, 1.0), Layer::new(0.35, 1.5, 1.2)], 1.0).unwrap();
    let b = s.period();
    // F falls monotonically from 1 to -1 across the first band
    let top = band_edges(&s, Polarization::Axial, 0.0, (0.05, 10.0), 512).unwrap()[0].omega_star;
    for i in 1..10 {
        let pz = PI / b * i as f64 / 10.0;
        let w = band_solve_omega(&s, Polarization::Axial, 0.0, pz, (0.05, top)).unwrap();
        let f = dispersion_f(&s, Polarization::Axial, 0.0, w).unwrap();
        assert!((f - (pz * b).cos()).abs() < 1e-12, "{pz}: {f}");
    }
}
