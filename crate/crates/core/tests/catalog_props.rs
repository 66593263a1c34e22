use realizer_core::catalog::{
    catalog, cex_local_sigma_growth, fgh_potential, find, shifted_sine_f, sinh_closed_form_w, sinh_family_entry,
    sinh_field, CatalogEntry, SinhGauge,
};
use realizer_core::flows::{InversionOptions, Normalization};
use realizer_core::func1d::Func1D;
use realizer_core::geometry::Halton;
use realizer_core::realizer::{verify_residuals, w_at_point, ClosedFormW};
use realizer_core::{Aabb, Vec3};

fn certify(e: &CatalogEntry) -> f64 {
    let sigma = e.closed_form_sigma.clone().expect("closed form");
    let src = ClosedFormW(move |p| sigma(p).ln());
    let r = verify_residuals(&e.field, &src, &e.sigma_region, 11, 1e-3);
    assert_eq!(r.failed, 0, "{}: {:?}", e.name, r.failures);
    r.max_curl_residual
}

#[test]
fn every_closed_form_sigma_is_certified() {
    for e in catalog().iter().filter(|e| e.closed_form_sigma.is_some()) {
        let r = certify(e);
        assert!(r < 5e-6, "{}: {r:e}", e.name);
    }
}

#[test]
fn reconstructed_sinh_w_matches_closed_form() {
    let f = sinh_field();
    let x0 = Vec3::new(0.0, 1.0, 0.0);
    let pts = Halton::sample(&Aabb::from_bounds([0.2, 2.0, -1.0, 1.0, -1.0, 1.0]), 50, 5);
    for (i, p) in pts.into_iter().enumerate() {
        // both half-spaces |x| ≥ 0.2
        let p = if i % 2 == 0 { p } else { Vec3::new(-p.x, p.y, p.z) };
        let s = w_at_point(&f, x0, p, Normalization::Standard, &InversionOptions::default()).unwrap();
        let want = sinh_closed_form_w(p);
        assert!((s.w - want).abs() < 1e-5, "{p:?}: {} vs {want}", s.w);
    }
}

#[test]
fn sinh_family_is_infinite() {
    let a = sinh_family_entry(SinhGauge::flow());
    let b = sinh_family_entry(SinhGauge::log_atan());
    for e in [&a, &b] {
        assert!(certify(e) < 5e-6, "{}", e.name);
    }
    let ratios: Vec<f64> = Halton::sample(&a.sigma_region, 20, 1)
        .into_iter()
        .map(|p| a.sigma(p).unwrap() / b.sigma(p).unwrap())
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(hi / lo > 1.01, "ratio range [{lo}, {hi}]");
}

#[test]
fn user_gauge_is_flagged_unverified() {
    let g = SinhGauge::user(Func1D::new("ln|t| + t", |t| t.abs().ln() + t, |t| 1.0 / t + 1.0));
    assert!(!g.verified);
    assert!(g.c.abs() < 1e-6);
}

#[test]
fn product_potential_realizes_the_field() {
    let one = Func1D::one();
    let f = shifted_sine_f();
    let e = find("fgh").unwrap();
    for p in Halton::sample(&Aabb::unit_cell(), 20, 2) {
        let h = 1e-4;
        let grad = Vec3::from_array(std::array::from_fn(|k| {
            let d = Vec3::axis(k) * h;
            (fgh_potential(&f, &one, &one, p + d) - fgh_potential(&f, &one, &one, p - d)) / (2.0 * h)
        }));
        let j = e.field.evaluate(p).unwrap();
        let sigma = e.sigma(p).unwrap();
        assert!(sigma > 0.0);
        assert!((grad * sigma - j).norm_inf() < 1e-6, "{p:?}");
    }
}

#[test]
fn counter_example_local_w_grows_toward_the_edge() {
    let w = cex_local_sigma_growth(&[0.5, 0.5], 0.0);
    assert_eq!(w[0] - w[1], 0.0);
    let range = |xs: &[f64]| {
        let w = cex_local_sigma_growth(xs, 0.0);
        w.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - w.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    // modest on {0.5, 0.9, 0.99}; unbounded as x → 1⁻ because f′(1) = 0
    let near = range(&[0.5, 0.9, 0.99]);
    assert!(near > 2.0 && near < 5.0, "{near}");
    assert!(range(&[0.5, 0.9, 0.99, 1.0 - 1e-6]) > 5.0);
}
