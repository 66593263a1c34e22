//! Single-case checks of the flow and log-conductivity invariants, shared by
//! the property tests and the acceptance suite.
//!
//! Each check returns `Ok(true)` when the case passed, `Ok(false)` when it
//! does not apply (a flow failed to exist, or the round trip is too badly
//! conditioned to resolve), and `Err` with a diagnostic on a violation.

use crate::field::VectorField;
use crate::flows::{direction_field, integrate_flow, FlowDirection, FlowError, FlowOptions, Normalization, TripleCoordinates};
use crate::geometry::{Point3, Vec3};
use crate::realizer::compute_w;

/// Relative tolerance of every integration in these checks.
pub const RTOL: f64 = 1e-10;

/// Round trips amplified beyond this cannot be resolved in double precision
/// at [`RTOL`]; they occur near equilibria of the direction field.
pub const MAX_AMPLIFICATION: f64 = 1e6;

pub const NORMALIZATIONS: [Normalization; 2] = [Normalization::Standard, Normalization::Tilde];

pub type CaseResult = Result<bool, String>;

pub fn flow_options() -> FlowOptions {
    FlowOptions::default().with_tolerances(RTOL, 1e-2 * RTOL)
}

fn endpoint(f: &VectorField, dir: FlowDirection, p: Point3, t: f64) -> Result<Point3, FlowError> {
    Ok(integrate_flow(f, dir, p, t, &flow_options())?.endpoint())
}

/// How much the flow map over `t` amplifies an error at `a`: finite
/// differences of the map, and the exact stretch `|V(X_t(a))| / |V(a)|`
/// along the flow, which the differences miss once they turn nonlinear.
pub fn amplification(f: &VectorField, dir: FlowDirection, a: Point3, t: f64) -> f64 {
    let h = 1e-8;
    let Ok(base) = endpoint(f, dir, a, t) else { return f64::INFINITY };
    let speed = |p| direction_field(f, dir, p, &flow_options()).map_or(f64::NAN, |(v, _)| v.norm());
    let stretch = speed(base) / speed(a);
    (0..3)
        .map(|k| match endpoint(f, dir, a + Vec3::axis(k) * h, t) {
            Ok(q) => (q - base).norm_inf() / h,
            Err(_) => f64::INFINITY,
        })
        .fold(if stretch.is_nan() { f64::INFINITY } else { stretch.max(1.0) }, f64::max)
}

/// Amplification by the augmented third-leg map `a ↦ (X(a, t), q(a, t))`.
pub fn augmented_amplification(f: &VectorField, n: Normalization, a: Point3, t: f64) -> f64 {
    let h = 1e-8;
    let run = |p: Point3| integrate_flow(f, n.third_leg(), p, t, &flow_options()).map(|tr| (tr.endpoint(), tr.final_q()));
    let Ok((base, q)) = run(a) else { return f64::INFINITY };
    let speed = |p| direction_field(f, n.third_leg(), p, &flow_options()).map_or(f64::NAN, |(v, r)| v.norm().max(r.abs()));
    let stretch = speed(base) / speed(a);
    (0..3)
        .map(|k| match run(a + Vec3::axis(k) * h) {
            Ok((e, qk)) => (e - base).norm_inf().max((qk - q).abs()) / h,
            Err(_) => f64::INFINITY,
        })
        .fold(if stretch.is_nan() { f64::INFINITY } else { stretch.max(1.0) }, f64::max)
}

/// Twice the requested tolerance per unit time, carried through the flow map.
pub fn allowance(span: f64, scale: f64, amp: f64) -> f64 {
    2.0 * RTOL * (1.0 + span) * scale.max(1.0) * amp
}

/// `X_t(X_s(p)) = X_{s+t}(p)`.
pub fn semigroup(f: &VectorField, dir: FlowDirection, p: Point3, s: f64, t: f64) -> CaseResult {
    let (Ok(a), Ok(direct)) = (endpoint(f, dir, p, s), endpoint(f, dir, p, s + t)) else { return Ok(false) };
    let Ok(b) = endpoint(f, dir, a, t) else { return Ok(false) };
    let amp = amplification(f, dir, a, t);
    if amp > MAX_AMPLIFICATION {
        return Ok(false);
    }
    let err = (b - direct).norm_inf();
    if err <= allowance(s.abs() + t.abs(), direct.norm_inf(), amp) {
        Ok(true)
    } else {
        Err(format!("{dir} semigroup from {p}: error {err:e} (amplification {amp:e})"))
    }
}

/// `X_{−t}(X_t(p)) = p`.
pub fn reversibility(f: &VectorField, dir: FlowDirection, p: Point3, t: f64) -> CaseResult {
    let Ok(a) = endpoint(f, dir, p, t) else { return Ok(false) };
    let Ok(back) = endpoint(f, dir, a, -t) else { return Ok(false) };
    let amp = amplification(f, dir, a, -t);
    if amp > MAX_AMPLIFICATION {
        return Ok(false);
    }
    let err = (back - p).norm_inf();
    if err <= allowance(2.0 * t.abs(), p.norm_inf(), amp) {
        Ok(true)
    } else {
        Err(format!("{dir} reversibility from {p}: error {err:e} (amplification {amp:e})"))
    }
}

/// A unit-speed flow moves at most `|t|`.
pub fn unit_speed(f: &VectorField, dir: FlowDirection, p: Point3, t: f64) -> CaseResult {
    if !dir.is_unit_speed() {
        return Ok(false);
    }
    let Ok(a) = endpoint(f, dir, p, t) else { return Ok(false) };
    let d = (a - p).norm();
    if d <= t.abs() * (1.0 + 1e-9) + 1e-12 {
        Ok(true)
    } else {
        Err(format!("{dir} from {p}: moved {d} in time {t}"))
    }
}

/// `w(x₀; t₁, t₂, a + b) = w(x₀; t₁, t₂, a) + q` where `q` is the quadrature
/// over a further third-leg run of length `b`.
pub fn additivity(f: &VectorField, x0: Point3, n: Normalization, t1: f64, t2: f64, a: f64, b: f64) -> CaseResult {
    let o = flow_options();
    let (Ok(head), Ok(whole)) = (
        compute_w(f, &TripleCoordinates::new(x0, t1, t2, a), n, &o),
        compute_w(f, &TripleCoordinates::new(x0, t1, t2, a + b), n, &o),
    ) else {
        return Ok(false);
    };
    let Ok(tail) = integrate_flow(f, n.third_leg(), head.point, b, &o) else { return Ok(false) };
    let amp = augmented_amplification(f, n, head.point, b);
    if amp > MAX_AMPLIFICATION {
        return Ok(false);
    }
    let err = (head.w + tail.final_q() - whole.w).abs();
    if err <= 2.0 * RTOL * (1.0 + a.abs() + b.abs()) * whole.w.abs().max(1.0) * amp {
        Ok(true)
    } else {
        Err(format!("{n} additivity at ({t1}, {t2}, {a}, {b}): error {err:e}"))
    }
}

/// `w` is nondecreasing in `t₃`, strictly while `|curl j|` stays above
/// `1e-3` along the leg.
pub fn monotonicity(f: &VectorField, x0: Point3, n: Normalization, t1: f64, t2: f64, a: f64, d: f64) -> CaseResult {
    let o = flow_options();
    let (Ok(lo), Ok(hi)) = (
        compute_w(f, &TripleCoordinates::new(x0, t1, t2, a), n, &o),
        compute_w(f, &TripleCoordinates::new(x0, t1, t2, a + d), n, &o),
    ) else {
        return Ok(false);
    };
    // separate integrations agree to the tolerance where the integrand vanishes
    let slack = 2.0 * RTOL * lo.w.abs().max(1.0);
    if hi.w < lo.w - slack {
        return Err(format!("{n} w decreases at ({t1}, {t2}, {a}, +{d}): {} < {}", hi.w, lo.w));
    }
    let Ok(leg) = integrate_flow(f, n.third_leg(), lo.point, d, &o) else { return Ok(true) };
    let min_curl = leg
        .points
        .iter()
        .map(|&p| f.curl_at(p).map_or(0.0, |c| c.norm()))
        .fold(f64::INFINITY, f64::min);
    if min_curl > 1e-3 && hi.w <= lo.w {
        return Err(format!("{n} w not strictly increasing at ({t1}, {t2}, {a}, +{d})"));
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::sinh_field;

    #[test]
    fn sinh_cases_pass() {
        let f = sinh_field();
        let p = Vec3::new(0.3, 0.2, -0.1);
        for dir in FlowDirection::ALL {
            assert!(semigroup(&f, dir, p, 0.4, -0.7).is_ok());
            assert!(reversibility(&f, dir, p, 0.9).is_ok());
        }
        assert_eq!(unit_speed(&f, FlowDirection::D1, p, 1.0), Ok(true));
        let x0 = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(additivity(&f, x0, Normalization::Standard, 0.5, -0.3, 0.2, 0.4), Ok(true));
        assert_eq!(monotonicity(&f, x0, Normalization::Tilde, 0.5, -0.3, 0.2, 0.4), Ok(true));
    }
}
