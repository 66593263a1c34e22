//! Built-in example fields with closed-form conductivities.

use std::f64::consts::{LN_2, TAU};
use std::fmt;
use std::sync::Arc;

use crate::dsl::{FieldSpec, SpecError};
use crate::field::{FieldFamily, Periodicity, VectorField};
use crate::flows::TripleCoordinates;
use crate::func1d::Func1D;
use crate::geometry::{Aabb, Point3, Vec3};
use crate::optimize::{bisect, gauss_legendre, newton_bracketed};
use crate::periodic::TorusVerdict;
use crate::planar::{planar_conductivity, planar_field, PlanarOptions, PlanarPotential, PlanarVerdict};

pub type SigmaFn = Arc<dyn Fn(Point3) -> f64 + Send + Sync>;
pub type CoordsWFn = Arc<dyn Fn(&TripleCoordinates) -> f64 + Send + Sync>;

/// Verdicts the library is expected to reach on an entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedVerdicts {
    pub frobenius: bool,
    pub basis: bool,
    pub torus: Option<TorusVerdict>,
    pub planar: Option<PlanarVerdict>,
}

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub summary: String,
    pub field: VectorField,
    pub closed_form_sigma: Option<SigmaFn>,
    pub closed_form_w: Option<CoordsWFn>,
    pub expected: ExpectedVerdicts,
    pub anchor: Point3,
    /// Box for condition checks.
    pub region: Aabb,
    /// Box on which the closed-form conductivity is certified.
    pub sigma_region: Aabb,
    /// Same field in the expression language, when expressible.
    pub spec: Option<FieldSpec>,
}

impl fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("expected", &self.expected)
            .field("anchor", &self.anchor)
            .finish()
    }
}

impl CatalogEntry {
    pub fn sigma(&self, p: Point3) -> Option<f64> {
        self.closed_form_sigma.as_ref().map(|s| s(p))
    }
}

// ---------------------------------------------------------------- sinh

/// `j = (1, sinh x, 0)`, `curl j = (0, 0, cosh x)`.
pub fn sinh_field() -> VectorField {
    VectorField::new("sinh", |p| Vec3::new(1.0, p.x.sinh(), 0.0))
        .with_curl(|p| Vec3::new(0.0, 0.0, p.x.cosh()))
        .with_div(|_| 0.0)
        .with_regularity("C-infinity")
}

/// `atanh(1/cosh x)`, evaluated as `asinh(1/|sinh x|)`.
pub fn atanh_sech(x: f64) -> f64 {
    (1.0 / x.sinh().abs()).asinh()
}

/// `f(t) = −atanh(1/√(1+t²)) + √(1+t²)` for `t ≠ 0`.
pub fn sinh_f(t: f64) -> f64 {
    (1.0 + t * t).sqrt() - (1.0 / t.abs()).asinh()
}

/// Closed form of the triple flow of the sinh field from `(0, 1, 0)`.
pub fn sinh_x32(t1: f64, t2: f64, t3: f64) -> Point3 {
    if t1 == 0.0 {
        return Vec3::new(0.0, 1.0 - t3, t2);
    }
    let x = (t1 * t3.exp()).asinh();
    Vec3::new(x, atanh_sech(x) + sinh_f(t1), t2)
}

/// A function `f` with `f(t) = ln|t| + c + o(1)` and `f'(t) = 1/t + c' + o(1)`
/// near 0, increasing in `|t|` on each half-line, that parametrizes the
/// conductivities `σ_f` of the sinh field.
#[derive(Clone, Debug)]
pub struct SinhGauge {
    pub f: Func1D,
    pub c: f64,
    /// True for the shipped functions, whose expansions have been checked.
    pub verified: bool,
}

impl SinhGauge {
    /// The function of the triple-flow construction; `c = 1 − ln 2`.
    pub fn flow() -> Self {
        Self {
            f: Func1D::new("sqrt(1 + t^2) - atanh(1/sqrt(1 + t^2))", sinh_f, |t| (1.0 + t * t).sqrt() / t),
            c: 1.0 - LN_2,
            verified: true,
        }
    }

    /// `f(t) = ln|t| + atan t`; `c = 0`, `c' = 1`.
    pub fn log_atan() -> Self {
        Self {
            f: Func1D::new("ln|t| + atan(t)", |t| t.abs().ln() + t.atan(), |t| 1.0 / t + 1.0 / (1.0 + t * t)),
            c: 0.0,
            verified: true,
        }
    }

    /// A user function; `c` is read off `f(t) − ln|t|` near 0.
    pub fn user(f: Func1D) -> Self {
        let t = 1e-8;
        let c = 0.5 * ((f.value(t) - t.ln()) + (f.value(-t) - t.ln()));
        Self { f, c, verified: false }
    }

    /// Numerical evidence for the admissibility conditions: monotone in `|t|`
    /// on sampled points of both half-lines and `f(t) − ln|t|` settling near 0.
    pub fn looks_admissible(&self) -> bool {
        let grid: Vec<f64> = (-60..=60).map(|k| (0.25 * f64::from(k)).exp()).collect();
        let monotone = |sign: f64| {
            grid.windows(2)
                .all(|w| self.f.value(sign * w[1]) > self.f.value(sign * w[0]))
        };
        let settles = [1e-6, 1e-7, 1e-8].iter().all(|&t: &f64| {
            ((self.f.value(t) - t.ln()) - self.c).abs() < 1e-4 && ((self.f.value(-t) - t.ln()) - self.c).abs() < 1e-4
        });
        monotone(1.0) && monotone(-1.0) && settles
    }

    /// `t` with `x t > 0` and `f(t) = rhs`.
    pub fn solve(&self, x: f64, rhs: f64) -> f64 {
        let sign = x.signum();
        // φ(s) = f(sign e^s) is increasing in s
        let phi = |s: f64| {
            let t = sign * s.exp();
            (self.f.value(t) - rhs, t * self.f.deriv(t))
        };
        let guess = rhs - self.c;
        let (mut lo, mut hi) = (guess - 4.0, guess + 4.0);
        while phi(lo).0 > 0.0 && lo > -740.0 {
            lo -= 2.0 * (hi - lo);
        }
        while phi(hi).0 < 0.0 && hi < 700.0 {
            hi += 2.0 * (hi - lo);
        }
        let s = newton_bracketed(phi, lo, hi, 1e-16).unwrap_or(f64::NAN);
        sign * s.exp()
    }

    /// `σ_f`: `2 e^{c − y}` on `x = 0`, else `sinh x / t`.
    pub fn sigma(&self, p: Point3) -> f64 {
        if p.x == 0.0 {
            return 2.0 * (self.c - p.y).exp();
        }
        let t = self.solve(p.x, p.y - atanh_sech(p.x));
        p.x.sinh() / t
    }
}

/// Conductivity of the triple-flow construction for the sinh field.
pub fn sinh_closed_form_sigma(p: Point3) -> f64 {
    SinhGauge::flow().sigma(p)
}

/// `w = ln σ`: `1 − y` on `x = 0`, else `ln(sinh x / t)`.
pub fn sinh_closed_form_w(p: Point3) -> f64 {
    if p.x == 0.0 {
        return 1.0 - p.y;
    }
    let g = SinhGauge::flow();
    let t = g.solve(p.x, p.y - atanh_sech(p.x));
    (p.x.sinh() / t).ln()
}

// ------------------------------------------------------ counter-example

/// `f(x) = 8x³ − 6x⁴ − 1`.
pub fn cex_f(x: f64) -> f64 {
    8.0 * x.powi(3) - 6.0 * x.powi(4) - 1.0
}

pub fn cex_df(x: f64) -> f64 {
    24.0 * x * x * (1.0 - x)
}

pub fn cex_d2f(x: f64) -> f64 {
    24.0 * x * (2.0 - 3.0 * x)
}

/// `j = (f, f', −z f')`, `curl j = (0, z f'', f'')`.
pub fn cex_field() -> VectorField {
    VectorField::new("frobenius-cex", |p| {
        let d = cex_df(p.x);
        Vec3::new(cex_f(p.x), d, -p.z * d)
    })
    .with_curl(|p| {
        let d2 = cex_d2f(p.x);
        Vec3::new(0.0, p.z * d2, d2)
    })
    .with_div(|_| 0.0)
    .with_regularity("C-infinity")
}

/// Primitive of `f/f'` on `(0, 1)`.
#[allow(non_snake_case)]
pub fn cex_F(x: f64) -> f64 {
    x * x / 8.0 - x / 12.0 - (-x).ln_1p() / 24.0 - x.ln() / 24.0 + 1.0 / (24.0 * x)
}

/// Local log-conductivity on the strip `0 < x < 1`:
/// `w = ln f'(x) + ln(1 + s²)` with `s = y + F(x) − z²/2`, realizing
/// `j = e^w ∇u` for `u = atan(s)`.
pub fn cex_local_w(p: Point3) -> f64 {
    if !(p.x > 0.0 && p.x < 1.0) {
        return f64::NAN;
    }
    let s = p.y + cex_F(p.x) - 0.5 * p.z * p.z;
    cex_df(p.x).ln() + (s * s).ln_1p()
}

/// Local log-conductivity along the strip at `(x, y, 0)` for each `x`.
pub fn cex_local_sigma_growth(x_values: &[f64], y: f64) -> Vec<f64> {
    x_values.iter().map(|&x| cex_local_w(Vec3::new(x, y, 0.0))).collect()
}

// -------------------------------------------------------- product fields

/// `j = (g(y)h(z), f(x)h(z), f(x)g(y))`.
pub fn fgh_field(f: &Func1D, g: &Func1D, h: &Func1D) -> VectorField {
    let (f1, g1, h1) = (f.clone(), g.clone(), h.clone());
    let (f2, g2, h2) = (f.clone(), g.clone(), h.clone());
    let periodic = is_unit_periodic(f) && is_unit_periodic(g) && is_unit_periodic(h);
    VectorField::new(format!("fgh[{}; {}; {}]", f.label(), g.label(), h.label()), move |p| {
        let (a, b, c) = (f1.value(p.x), g1.value(p.y), h1.value(p.z));
        Vec3::new(b * c, a * c, a * b)
    })
    .with_curl(move |p| {
        let (a, b, c) = (f2.value(p.x), g2.value(p.y), h2.value(p.z));
        let (da, db, dc) = (f2.deriv(p.x), g2.deriv(p.y), h2.deriv(p.z));
        Vec3::new(a * (db - dc), b * (dc - da), c * (da - db))
    })
    .with_div(|_| 0.0)
    .with_periodicity(if periodic { Periodicity::FULL } else { Periodicity::NONE })
    .with_family(FieldFamily::ProductFgh {
        unit_gh: g.is_one() && h.is_one(),
    })
}

/// Spot check of `f(s + 1) = f(s)`.
pub fn is_unit_periodic(f: &Func1D) -> bool {
    if f.is_constant() {
        return true;
    }
    (0..37).all(|k| {
        let s = -2.0 + 0.1113 * f64::from(k);
        let (a, b) = (f.value(s), f.value(s + 1.0));
        (a - b).abs() <= 1e-9 * a.abs().max(1.0)
    })
}

/// Zeros of a 1-periodic `f` in `[0, 1)`, located to machine precision.
pub fn periodic_zeros(f: &Func1D) -> Vec<f64> {
    const N: usize = 1024;
    let xs: Vec<f64> = (0..=N).map(|k| k as f64 / N as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect();
    let mut zeros: Vec<f64> = Vec::new();
    for k in 0..N {
        if vals[k] == 0.0 {
            zeros.push(xs[k]);
        } else if vals[k + 1] != 0.0 && vals[k].signum() != vals[k + 1].signum() {
            if let Some(z) = bisect(|x| f.value(x), xs[k], xs[k + 1], 0.0) {
                zeros.push(z);
            }
        }
    }
    for z in &mut zeros {
        if *z >= 1.0 {
            *z -= 1.0;
        }
    }
    zeros.sort_by(f64::total_cmp);
    zeros.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if zeros.len() > 1 && zeros[0] + 1.0 - zeros[zeros.len() - 1] < 1e-9 {
        zeros.pop();
    }
    zeros
}

/// `σ = |f g h|`, realizing `j` with `u = ∫1/f + ∫1/g + ∫1/h` (sign-corrected).
pub fn fgh_sigma(f: &Func1D, g: &Func1D, h: &Func1D, p: Point3) -> f64 {
    (f.value(p.x) * g.value(p.y) * h.value(p.z)).abs()
}

/// `u = sign(fgh) (∫₀ˣ 1/f + ∫₀ʸ 1/g + ∫₀ᶻ 1/h)`, valid where none of them vanish.
pub fn fgh_potential(f: &Func1D, g: &Func1D, h: &Func1D, p: Point3) -> f64 {
    let prim = |q: &Func1D, s: f64| {
        if let Some(c) = q.constant_value() {
            return s / c;
        }
        let panels = (s.abs() * 16.0).ceil().max(1.0) as usize;
        gauss_legendre(|r| 1.0 / q.value(r), 0.0, s, panels)
    };
    let sign = (f.value(p.x) * g.value(p.y) * h.value(p.z)).signum();
    sign * (prim(f, p.x) + prim(g, p.y) + prim(h, p.z))
}

#[derive(Clone, Copy, Debug)]
struct Zero {
    at: f64,
    slope: f64,
    curvature: f64,
}

/// Below this distance to a zero, `f` is replaced by its second-order Taylor
/// polynomial.
const TAYLOR_F: f64 = 1e-6;
/// Below this distance, the regular part of `1/f` is taken as its limit.
const TAYLOR_G: f64 = 1e-5;

/// The `C¹` conductivity of `j = (1, f(x), f(x))` for a 1-periodic `f` with
/// simple zeros: on each interval `(a, b)` between consecutive zeros,
/// `σ = f(x) / f(t)` with `F(t) = y + z + F(x)`, `F = ∫_m 1/f` from the
/// midpoint `m`, and `σ = e^{−f'(a)(y+z)}` at a zero `a`.
#[derive(Clone, Debug)]
pub struct ZeroIntervalSigma {
    f: Func1D,
    zeros: Vec<Zero>,
}

impl ZeroIntervalSigma {
    /// `None` when `f` has no zero in a period.
    pub fn new(f: Func1D) -> Option<Self> {
        let zeros: Vec<Zero> = periodic_zeros(&f)
            .into_iter()
            .map(|a| Zero {
                at: a,
                slope: f.deriv(a),
                curvature: f.deriv2(a),
            })
            .collect();
        if zeros.is_empty() {
            return None;
        }
        Some(Self { f, zeros })
    }

    pub fn zeros(&self) -> Vec<f64> {
        self.zeros.iter().map(|z| z.at).collect()
    }

    /// Interval `(a, b)` of the reduced coordinate containing `r`, and `r`.
    fn interval(&self, x: f64) -> (Zero, Zero, f64) {
        let mut r = x - x.floor();
        let first = self.zeros[0];
        if r < first.at {
            r += 1.0;
        }
        let k = self.zeros.iter().rposition(|z| z.at <= r).unwrap_or(0);
        let a = self.zeros[k];
        let b = if k + 1 < self.zeros.len() {
            self.zeros[k + 1]
        } else {
            Zero { at: first.at + 1.0, ..first }
        };
        (a, b, r)
    }

    /// `f` at distances `da` from `a` and `db` from `b`.
    fn f_near(&self, a: &Zero, b: &Zero, da: f64, db: f64, r: f64) -> f64 {
        if da <= db && da < TAYLOR_F {
            a.slope * da + 0.5 * a.curvature * da * da
        } else if db < TAYLOR_F {
            -b.slope * db + 0.5 * b.curvature * db * db
        } else {
            self.f.value(r)
        }
    }

    /// `F(r) = ∫_m^r 1/f` with the poles at `a` and `b` integrated exactly.
    fn primitive(&self, a: &Zero, b: &Zero, da: f64, db: f64) -> f64 {
        let len = b.at - a.at;
        let m = a.at + 0.5 * len;
        let r = if da <= db { a.at + da } else { b.at - db };
        let regular = |s: f64| {
            let (sa, sb) = (s - a.at, b.at - s);
            let pole_a = 1.0 / (a.slope * sa);
            let pole_b = -1.0 / (b.slope * sb);
            if sa < TAYLOR_G {
                -a.curvature / (2.0 * a.slope * a.slope) - pole_b
            } else if sb < TAYLOR_G {
                -b.curvature / (2.0 * b.slope * b.slope) - pole_a
            } else {
                1.0 / self.f.value(s) - pole_a - pole_b
            }
        };
        let smooth = gauss_legendre(regular, m, r, 8);
        smooth + (da / (0.5 * len)).ln() / a.slope + (db / (0.5 * len)).ln() / b.slope
    }

    pub fn sigma(&self, p: Point3) -> f64 {
        let (a, b, r) = self.interval(p.x);
        let (da, db) = (r - a.at, b.at - r);
        let yz = p.y + p.z;
        if da.min(db) < 1e-12 {
            let z = if da <= db { a } else { b };
            return (-z.slope * yz).exp();
        }
        let len = b.at - a.at;
        let target = yz + self.primitive(&a, &b, da, db);
        // t = a + len / (1 + e^{-u}), keeping both endpoint distances accurate
        let dist = |u: f64| (len / (1.0 + (-u).exp()), len / (1.0 + u.exp()));
        let residual = |u: f64| {
            let (ta, tb) = dist(u);
            let fv = self.f_near(&a, &b, ta, tb, a.at + ta);
            let value = self.primitive(&a, &b, ta, tb) - target;
            // dF/du = (1/f(t)) dt/du
            (value, ta * tb / (len * fv))
        };
        let Some(u) = newton_bracketed(residual, -700.0, 700.0, 1e-15) else {
            return f64::NAN;
        };
        let (ta, tb) = dist(u);
        self.f_near(&a, &b, da, db, r) / self.f_near(&a, &b, ta, tb, a.at + ta)
    }
}

/// `j = (1, f(x), f(x))` with `f = sin 2πx`.
pub fn sine_f() -> Func1D {
    Func1D::new("sin(2*pi*x)", |x| (TAU * x).sin(), |x| TAU * (TAU * x).cos())
}

/// `f = sin 2πx + 2`, which never vanishes.
pub fn shifted_sine_f() -> Func1D {
    Func1D::new("sin(2*pi*x) + 2", |x| (TAU * x).sin() + 2.0, |x| TAU * (TAU * x).cos())
}

fn fgh_spec(f: &Func1D, g: &Func1D, h: &Func1D) -> Option<FieldSpec> {
    let l = |q: &Func1D| format!("({})", q.label());
    FieldSpec::from_strs(
        &format!("{}*{}", l(g), l(h)),
        &format!("{}*{}", l(f), l(h)),
        &format!("{}*{}", l(f), l(g)),
    )
    .ok()
}

/// Catalog entry for a product field.
pub fn fgh_entry(f: Func1D, g: Func1D, h: Func1D) -> CatalogEntry {
    let field = fgh_field(&f, &g, &h);
    let unit_gh = g.is_one() && h.is_one();
    let zeros = periodic_zeros(&f);
    let periodic = field.periodicity().is_full();
    let (sigma, name, torus, sigma_region): (Option<SigmaFn>, &str, Option<TorusVerdict>, Aabb) =
        if zeros.is_empty() || !periodic {
            let (f1, g1, h1) = (f.clone(), g.clone(), h.clone());
            (
                Some(Arc::new(move |p| fgh_sigma(&f1, &g1, &h1, p))),
                "fgh",
                periodic.then_some(TorusVerdict::RealizableInTorus),
                Aabb::unit_cell(),
            )
        } else if unit_gh {
            let z = ZeroIntervalSigma::new(f.clone()).expect("f has zeros");
            (
                Some(Arc::new(move |p| z.sigma(p))),
                "fgh-vanishing",
                Some(TorusVerdict::NotRealizable),
                Aabb::from_bounds([0.1, 0.9, -1.0, 1.0, -1.0, 1.0]),
            )
        } else {
            (None, "fgh", None, Aabb::unit_cell())
        };
    CatalogEntry {
        name: name.into(),
        summary: format!("product field with f = {}, g = {}, h = {}", f.label(), g.label(), h.label()),
        spec: fgh_spec(&f, &g, &h).map(|s| s.with_periodicity(field.periodicity())),
        field,
        closed_form_sigma: sigma,
        closed_form_w: None,
        expected: ExpectedVerdicts {
            frobenius: true,
            basis: false,
            torus: if periodic { torus } else { None },
            planar: None,
        },
        anchor: Vec3::new(0.137, 0.271, 0.533),
        region: Aabb::unit_cell(),
        sigma_region,
    }
}

/// Entry for the sinh field with the conductivity `σ_f` of a gauge.
pub fn sinh_family_entry(gauge: SinhGauge) -> CatalogEntry {
    let label = gauge.f.label().to_string();
    let verified = gauge.verified;
    let g = gauge.clone();
    CatalogEntry {
        name: "sinh-family".into(),
        summary: format!(
            "sinh field with the conductivity generated by f(t) = {label}{}",
            if verified { "" } else { " (unverified)" }
        ),
        field: sinh_field(),
        closed_form_sigma: Some(Arc::new(move |p| g.sigma(p))),
        closed_form_w: None,
        expected: ExpectedVerdicts {
            frobenius: true,
            basis: true,
            torus: None,
            planar: None,
        },
        anchor: Vec3::new(0.0, 1.0, 0.0),
        region: Aabb::cube(-2.0, 2.0),
        sigma_region: Aabb::from_bounds([0.2, 2.0, -1.0, 1.0, -1.0, 1.0]),
        spec: FieldSpec::from_strs("1", "sinh(x)", "0").ok(),
    }
}

/// Entry for `j = α(z) ∇⊥v`.
pub fn planar_entry(pot: PlanarPotential, alpha: Func1D) -> CatalogEntry {
    let field = planar_field(&pot, &alpha);
    let (p1, a1) = (pot.clone(), alpha.clone());
    let sigma: SigmaFn = Arc::new(move |p| {
        planar_conductivity(&p1, &a1, p, &PlanarOptions::default()).unwrap_or(f64::NAN)
    });
    CatalogEntry {
        name: "planar".into(),
        summary: format!("planar field with v = {} and alpha = {}", pot.name(), alpha.label()),
        field,
        closed_form_sigma: Some(sigma),
        closed_form_w: None,
        expected: ExpectedVerdicts {
            frobenius: true,
            basis: false,
            torus: pot.periodic_gradient.then_some(TorusVerdict::Inconclusive),
            planar: pot.periodic_gradient.then_some(PlanarVerdict::Bounded),
        },
        anchor: Vec3::new(0.5, 0.5, 0.5),
        region: Aabb::unit_cell(),
        sigma_region: Aabb::unit_cell(),
        spec: None,
    }
}

/// `j = (1, f, f)` with `f = sin 2πx` as a planar field in the plane
/// `(x, (y+z)/√2)`: `v = √2 G(x) − Y` with `G' = f`.
pub fn vanishing_product_potential() -> PlanarPotential {
    use std::f64::consts::SQRT_2;
    PlanarPotential::new(
        "sqrt(2)*(1 - cos(2*pi*x))/(2*pi) - y",
        |x, y| SQRT_2 * (1.0 - (TAU * x).cos()) / TAU - y,
        |x, _| [SQRT_2 * (TAU * x).sin(), -1.0],
        |x, _| SQRT_2 * TAU * (TAU * x).cos(),
        true,
    )
}

/// Default planar example: `v = x + 0.1 sin 2πx`, `α = 2 + cos 2πz`.
pub fn default_planar() -> (PlanarPotential, Func1D) {
    (
        PlanarPotential::wavy_x(0.1),
        Func1D::new("2 + cos(2*pi*z)", |z| 2.0 + (TAU * z).cos(), |z| -TAU * (TAU * z).sin()),
    )
}

/// All built-in entries.
pub fn catalog() -> Vec<CatalogEntry> {
    let sinh = CatalogEntry {
        name: "sinh".into(),
        summary: "j = (1, sinh x, 0): Frobenius and basis conditions hold".into(),
        field: sinh_field(),
        closed_form_sigma: Some(Arc::new(sinh_closed_form_sigma)),
        closed_form_w: Some(Arc::new(|c: &TripleCoordinates| c.t3)),
        expected: ExpectedVerdicts {
            frobenius: true,
            basis: true,
            torus: None,
            planar: None,
        },
        anchor: Vec3::new(0.0, 1.0, 0.0),
        region: Aabb::cube(-2.0, 2.0),
        sigma_region: Aabb::from_bounds([0.2, 2.0, -1.0, 1.0, -1.0, 1.0]),
        spec: FieldSpec::from_strs("1", "sinh(x)", "0").ok(),
    };
    let cex = CatalogEntry {
        name: "frobenius-cex".into(),
        summary: "j = (f, f', -z f') with f = 8x^3 - 6x^4 - 1: Frobenius holds, curl j vanishes".into(),
        field: cex_field(),
        closed_form_sigma: Some(Arc::new(|p| cex_local_w(p).exp())),
        closed_form_w: None,
        expected: ExpectedVerdicts {
            frobenius: true,
            basis: false,
            torus: None,
            planar: None,
        },
        anchor: Vec3::new(0.5, 0.0, 0.0),
        region: Aabb::from_bounds([0.0, 1.0, -1.0, 1.0, -1.0, 1.0]),
        sigma_region: Aabb::from_bounds([0.1, 0.9, -1.0, 1.0, -1.0, 1.0]),
        spec: cex_spec().ok(),
    };
    let (pot, alpha) = default_planar();
    vec![
        sinh,
        sinh_family_entry(SinhGauge::log_atan()),
        cex,
        planar_entry(pot, alpha),
        fgh_entry(shifted_sine_f(), Func1D::one(), Func1D::one()),
        fgh_entry(sine_f(), Func1D::one(), Func1D::one()),
    ]
}

/// Looks up a built-in entry by name.
pub fn find(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}

pub fn cex_spec() -> Result<FieldSpec, SpecError> {
    FieldSpec::from_strs("8*x^3 - 6*x^4 - 1", "24*x^2 - 24*x^3", "-z*(24*x^2 - 24*x^3)")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinh_sigma_on_axis() {
        assert!((sinh_closed_form_sigma(Vec3::new(0.0, 1.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((sinh_closed_form_sigma(Vec3::new(0.0, 0.0, 7.0)) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn sinh_sigma_is_continuous_across_axis() {
        for y in [-1.0, 0.3, 2.0] {
            let on = sinh_closed_form_sigma(Vec3::new(0.0, y, 0.0));
            for x in [1e-9, -1e-9] {
                let near = sinh_closed_form_sigma(Vec3::new(x, y, 0.0));
                assert!((near / on - 1.0).abs() < 1e-7, "{near} vs {on}");
            }
        }
    }

    #[test]
    fn sinh_closed_form_inverts_flow() {
        for (t1, t3) in [(0.5, 0.2), (-1.3, -0.7), (2.0, 1.5)] {
            let p = sinh_x32(t1, 0.0, t3);
            assert!((sinh_closed_form_w(p) - t3).abs() < 1e-12);
        }
    }

    #[test]
    fn gauges_have_the_stated_constants() {
        for g in [SinhGauge::flow(), SinhGauge::log_atan()] {
            assert!(g.looks_admissible());
            let u = SinhGauge::user(g.f.clone());
            assert!((u.c - g.c).abs() < 1e-7);
            assert!(!u.verified);
        }
        let bad = SinhGauge::user(Func1D::new("t", |t| t, |_| 1.0));
        assert!(!bad.looks_admissible());
    }

    #[test]
    fn cex_curl_vanishes_at_two_thirds() {
        assert!(cex_d2f(2.0 / 3.0).abs() < 1e-14);
        assert!(cex_d2f((2.0f64 / 3.0).sqrt()).abs() > 1.0);
    }

    #[test]
    fn cex_primitive_derivative() {
        for x in [0.1, 0.5, 0.9] {
            let h = 1e-5;
            let d = (cex_F(x + h) - cex_F(x - h)) / (2.0 * h);
            assert!((d - cex_f(x) / cex_df(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn sine_zeros() {
        let z = periodic_zeros(&sine_f());
        assert_eq!(z.len(), 2);
        assert_eq!(z[0], 0.0);
        assert!((z[1] - 0.5).abs() < 1e-15);
        assert!(periodic_zeros(&shifted_sine_f()).is_empty());
    }

    #[test]
    fn zero_interval_sigma_limits() {
        let s = ZeroIntervalSigma::new(sine_f()).unwrap();
        // at a zero σ = e^{-f'(a)(y+z)}
        let at0 = s.sigma(Vec3::new(0.0, 0.3, 0.2));
        assert!((at0 - (-TAU * 0.5f64).exp()).abs() < 1e-12);
        let at_half = s.sigma(Vec3::new(0.5, 0.3, 0.2));
        assert!((at_half - (TAU * 0.5f64).exp()).abs() < 1e-9);
        for d in [1e-3, 1e-7, 1e-11] {
            let near = s.sigma(Vec3::new(d, 0.3, 0.2));
            assert!((near / at0 - 1.0).abs() < 50.0 * d, "{d}: {near} vs {at0}");
        }
        // y + z = 0 gives t = x
        assert!((s.sigma(Vec3::new(0.3, 0.4, -0.4)) - 1.0).abs() < 1e-12);
        // periodic in x
        let p = Vec3::new(0.37, -0.6, 0.9);
        assert!((s.sigma(p) - s.sigma(p + Vec3::new(2.0, 0.0, 0.0))).abs() < 1e-10);
    }

    #[test]
    fn zero_interval_sigma_matches_log_tan_primitive() {
        // for sin 2πx, F(x) = ln(tan πx) / 2π on (0, 1/2)
        let s = ZeroIntervalSigma::new(sine_f()).unwrap();
        let big_f = |x: f64| (std::f64::consts::PI * x).tan().ln() / TAU;
        let inv = |v: f64| (TAU * v).exp().atan() / std::f64::consts::PI;
        for (x, yz) in [(0.1, 0.5), (0.3, -1.2), (0.45, 1.7)] {
            let t = inv(yz + big_f(x));
            let expected = (TAU * x).sin() / (TAU * t).sin();
            let got = s.sigma(Vec3::new(x, yz, 0.0));
            assert!((got / expected - 1.0).abs() < 1e-11, "{got} vs {expected}");
        }
    }

    #[test]
    fn catalog_names_are_unique() {
        let c = catalog();
        let mut names: Vec<_> = c.iter().map(|e| e.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), c.len());
        assert!(find("sinh").is_some() && find("nope").is_none());
    }
}
