use proptest::prelude::*;
use twoscale_core::medium::{build_stack, Layer};

fn layers() -> impl Strategy<Value = Vec<Layer>> {
    prop::collection::vec((0.05f64..2.0, 0.5f64..12.0, 0.5f64..3.0), 1..=6)
        .prop_map(|v| v.into_iter().map(|(d, e, m)| Layer::new(d, e, m)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn profile_is_periodic(l in layers(), u in 0.0f64..1.0, k in -1_000_000i64..=1_000_000) {
        let s = build_stack(&l, 1.0).unwrap();
        let z = u * s.period();
        let near = s.interfaces().iter().any(|&zi| (z - zi).abs() < 1e-6);
        prop_assume!(!near);
        let a = s.sample_profile(z);
        let b = s.sample_profile(z + k as f64 * s.period());
        prop_assert_eq!(a.layer_index, b.layer_index);
        prop_assert_eq!(a.eps, b.eps);
        prop_assert_eq!(a.mu, b.mu);
        prop_assert_eq!(a.eps_norm, b.eps_norm);
    }

    #[test]
    fn normalization_within_one_ulp(l in layers()) {
        let s = build_stack(&l, 1.0).unwrap();
        let twice = build_stack(&s.normalized_layers(), 1.0).unwrap();
        for (a, b) in twice.normalized_layers().iter().zip(s.normalized_layers()) {
            prop_assert!((a.eps - b.eps).abs() <= f64::EPSILON * b.eps);
            prop_assert!((a.mu - b.mu).abs() <= f64::EPSILON * b.mu);
            prop_assert_eq!(a.thickness, b.thickness);
        }
        prop_assert!((twice.eps_av() - 1.0).abs() <= 8.0 * f64::EPSILON);
    }

    #[test]
    fn averages_are_thickness_weighted(l in layers()) {
        let s = build_stack(&l, 1.0).unwrap();
        let b: f64 = l.iter().map(|x| x.thickness).sum();
        let e: f64 = l.iter().map(|x| x.eps * x.thickness).sum::<f64>() / b;
        let m: f64 = l.iter().map(|x| x.mu * x.thickness).sum::<f64>() / b;
        prop_assert!((s.eps_av() - e).abs() <= 1e-14 * e);
        prop_assert!((s.mu_av() - m).abs() <= 1e-14 * m);
        prop_assert!((s.light_speed() - 1.0 / (e * m).sqrt()).abs() <= 1e-14);
    }
}
