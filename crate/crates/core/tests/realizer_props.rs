use proptest::prelude::*;
use realizer_core::catalog::{catalog, sinh_field};
use realizer_core::flows::{FlowOptions, InversionOptions, Normalization, TripleCoordinates};
use realizer_core::invariants::{additivity, flow_options, monotonicity, NORMALIZATIONS};
use realizer_core::realizer::{compute_w, point_residual, ReconstructedW};
use realizer_core::{Point3, Vec3, VectorField};

fn opts() -> FlowOptions {
    flow_options()
}

fn anchored() -> Vec<(String, VectorField, Point3)> {
    catalog().into_iter().map(|e| (e.name, e.field, e.anchor)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn w_vanishes_on_the_anchor_surface(t1 in -1.0..1.0f64, t2 in -1.0..1.0f64) {
        for (name, f, x0) in anchored() {
            for n in NORMALIZATIONS {
                let Ok(s) = compute_w(&f, &TripleCoordinates::new(x0, t1, t2, 0.0), n, &opts()) else { continue };
                prop_assert_eq!(s.w, 0.0, "{} {:?}", name, n);
            }
        }
    }

    #[test]
    fn w_is_additive_along_the_third_leg(
        t1 in -0.8..0.8f64,
        t2 in -0.8..0.8f64,
        a in -0.8..0.8f64,
        b in -0.8..0.8f64,
    ) {
        for (name, f, x0) in anchored() {
            for n in NORMALIZATIONS {
                let r = additivity(&f, x0, n, t1, t2, a, b);
                prop_assert!(r.is_ok(), "{}: {:?}", name, r);
            }
        }
    }

    #[test]
    fn w_is_monotone_in_t3(t1 in -0.8..0.8f64, t2 in -0.8..0.8f64, a in -0.8..0.8f64, d in 0.05..0.8f64) {
        for (name, f, x0) in anchored() {
            for n in NORMALIZATIONS {
                let r = monotonicity(&f, x0, n, t1, t2, a, d);
                prop_assert!(r.is_ok(), "{}: {:?}", name, r);
            }
        }
    }

    #[test]
    fn sinh_directional_identities(
        x in prop_oneof![-1.5..-0.3f64, 0.3..1.5f64],
        y in -1.0..1.0f64,
        z in -1.0..1.0f64,
    ) {
        let f = sinh_field();
        let src = ReconstructedW::new(&f, Vec3::new(0.0, 1.0, 0.0), Normalization::Standard)
            .with_options(InversionOptions::default());
        let p = Vec3::new(x, y, z);
        let r = point_residual(&f, &src, p, 1e-3).unwrap();
        let c = f.curl_at(p).unwrap().norm();
        prop_assert!(r.curl_alignment <= 1e-4 * c, "{p:?}: {} vs {}", r.curl_alignment, c);
        prop_assert!(r.third_leg_rate <= 1e-4, "{p:?}: {}", r.third_leg_rate);
    }
}

#[test]
fn sinh_w_equals_t3() {
    let f = sinh_field();
    let x0 = Vec3::new(0.0, 1.0, 0.0);
    for &(t1, t2, t3) in &[(0.5, -0.3, 1.2), (-1.0, 0.7, -0.4), (1.5, 1.5, 1.5)] {
        let s = compute_w(&f, &TripleCoordinates::new(x0, t1, t2, t3), Normalization::Standard, &opts()).unwrap();
        assert!((s.w - t3).abs() < 1e-8, "{t1} {t2} {t3}: {}", s.w);
    }
}
