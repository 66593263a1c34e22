//! Fields `j = α(z) ∇⊥v(x, y)` lying in a fixed plane: gradient flow of `v`,
//! hitting time of the reference level, and the log-conductivity `w_v`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Expr;
use crate::field::{FieldFamily, Periodicity, VectorField};
use crate::func1d::Func1D;
use crate::geometry::{Aabb, Halton, Point3, Vec3};
use crate::ode::{self, OdeError, OdeOptions, StepControl};

type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Grad2 = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// A potential `v(x, y)` with its gradient and Laplacian.
#[derive(Clone)]
pub struct PlanarPotential {
    name: String,
    v: Fn2,
    grad: Grad2,
    laplacian: Fn2,
    /// `∇v` is `[0,1]²`-periodic.
    pub periodic_gradient: bool,
}

impl fmt::Debug for PlanarPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarPotential")
            .field("name", &self.name)
            .field("periodic_gradient", &self.periodic_gradient)
            .finish()
    }
}

impl PlanarPotential {
    pub fn new(
        name: impl Into<String>,
        v: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static,
        laplacian: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        periodic_gradient: bool,
    ) -> Self {
        Self {
            name: name.into(),
            v: Arc::new(v),
            grad: Arc::new(grad),
            laplacian: Arc::new(laplacian),
            periodic_gradient,
        }
    }

    /// From an expression in `x, y`; derivatives by central differences.
    pub fn from_expr(expr: &Expr, periodic_gradient: bool) -> Self {
        let e = Arc::new(expr.clone());
        let at = move |x: f64, y: f64| e.eval_xyz(x, y, 0.0).unwrap_or(f64::NAN);
        let at = Arc::new(at);
        let (a1, a2) = (at.clone(), at.clone());
        let grad = move |x: f64, y: f64| {
            let h = 1e-3 * x.abs().max(y.abs()).max(1.0);
            let d = |f: &dyn Fn(f64) -> f64| {
                let d1 = f(h) - f(-h);
                let d2 = f(2.0 * h) - f(-2.0 * h);
                let d3 = f(3.0 * h) - f(-3.0 * h);
                (45.0 * d1 - 9.0 * d2 + d3) / (60.0 * h)
            };
            [d(&|s| a1(x + s, y)), d(&|s| a1(x, y + s))]
        };
        let lap = move |x: f64, y: f64| {
            let h = 1e-3 * x.abs().max(y.abs()).max(1.0);
            let c = a2(x, y);
            let d2 = |f: &dyn Fn(f64) -> f64| {
                (-f(2.0 * h) + 16.0 * f(h) - 30.0 * c + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
            };
            d2(&|s| a2(x + s, y)) + d2(&|s| a2(x, y + s))
        };
        Self {
            name: expr.to_string(),
            v: at,
            grad: Arc::new(grad),
            laplacian: Arc::new(lap),
            periodic_gradient,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn v(&self, x: f64, y: f64) -> f64 {
        (self.v)(x, y)
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        (self.grad)(x, y)
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        (self.laplacian)(x, y)
    }

    /// `v = x`.
    pub fn linear_x() -> Self {
        Self::new("x", |x, _| x, |_, _| [1.0, 0.0], |_, _| 0.0, true)
    }

    /// `v = x + a sin(2πx)`.
    pub fn wavy_x(a: f64) -> Self {
        use std::f64::consts::TAU;
        Self::new(
            format!("x + {a}*sin(2*pi*x)"),
            move |x, _| x + a * (TAU * x).sin(),
            move |x, _| [1.0 + a * TAU * (TAU * x).cos(), 0.0],
            move |x, _| -a * TAU * TAU * (TAU * x).sin(),
            true,
        )
    }

    /// `v = x + b y + a sin(2πx) cos(2πy)`.
    pub fn wavy_xy(a: f64, b: f64) -> Self {
        use std::f64::consts::TAU;
        Self::new(
            format!("x + {b}*y + {a}*sin(2*pi*x)*cos(2*pi*y)"),
            move |x, y| x + b * y + a * (TAU * x).sin() * (TAU * y).cos(),
            move |x, y| {
                [
                    1.0 + a * TAU * (TAU * x).cos() * (TAU * y).cos(),
                    b - a * TAU * (TAU * x).sin() * (TAU * y).sin(),
                ]
            },
            move |x, y| -2.0 * a * TAU * TAU * (TAU * x).sin() * (TAU * y).cos(),
            true,
        )
    }

    /// `v = cosh x − y`, whose gradient flow blows up in finite time.
    pub fn cosh_minus_y() -> Self {
        Self::new(
            "cosh(x) - y",
            |x, y| x.cosh() - y,
            |x, _| [x.sinh(), -1.0],
            |x, _| x.cosh(),
            false,
        )
    }
}

/// `j = α(z) (−∂_y v, ∂_x v, 0)` with curl `−α'(z)∇v + α Δv e_z`.
pub fn planar_field(pot: &PlanarPotential, alpha: &Func1D) -> VectorField {
    let (p1, a1) = (pot.clone(), alpha.clone());
    let (p2, a2) = (pot.clone(), alpha.clone());
    let periodicity = if pot.periodic_gradient {
        Periodicity {
            x: true,
            y: true,
            z: !alpha.is_constant(),
        }
    } else {
        Periodicity::NONE
    };
    VectorField::new(format!("planar[{}; alpha = {}]", pot.name, alpha.label()), move |p| {
        let [vx, vy] = p1.grad(p.x, p.y);
        a1.value(p.z) * Vec3::new(-vy, vx, 0.0)
    })
    .with_curl(move |p| {
        let [vx, vy] = p2.grad(p.x, p.y);
        let da = a2.deriv(p.z);
        Vec3::new(-da * vx, -da * vy, a2.value(p.z) * p2.laplacian(p.x, p.y))
    })
    .with_div(|_| 0.0)
    .with_periodicity(if alpha.is_constant() {
        Periodicity { z: true, ..periodicity }
    } else {
        periodicity
    })
    .with_family(FieldFamily::Planar)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanarError {
    #[error("gradient flow blows up near t = {t} (last point ({x}, {y}))")]
    FlowBlowup { t: f64, x: f64, y: f64 },
    #[error("no crossing of the level {level} within |t| ≤ {horizon}")]
    NoCrossing { level: f64, horizon: f64 },
    #[error("potential undefined at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarOptions {
    pub ode: OdeOptions,
    /// Reference level `v = level` of the hitting time.
    pub level: f64,
    /// Largest `|t|` searched for a crossing.
    pub horizon: f64,
    /// Required `|v(endpoint) − level|`.
    pub v_tol: f64,
}

impl Default for PlanarOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions {
                rtol: 1e-12,
                atol: 1e-14,
                max_state: 1e8,
                ..OdeOptions::default()
            },
            level: 0.0,
            horizon: 1e4,
            v_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingRecord {
    pub start: [f64; 2],
    pub tau: f64,
    pub endpoint: [f64; 2],
    pub w_v: f64,
}

fn map_ode(e: OdeError<PlanarError>, last: [f64; 2]) -> PlanarError {
    match e {
        OdeError::Rhs { cause, .. } => cause,
        OdeError::StepUnderflow { t, .. } | OdeError::StepLimit { t, .. } | OdeError::Blowup { t } => {
            PlanarError::FlowBlowup {
                t,
                x: last[0],
                y: last[1],
            }
        }
    }
}

fn rhs(pot: &PlanarPotential) -> impl Fn(f64, &[f64; 3]) -> Result<[f64; 3], PlanarError> + '_ {
    move |_, s| {
        let [gx, gy] = pot.grad(s[0], s[1]);
        let lap = pot.laplacian(s[0], s[1]);
        if !(gx.is_finite() && gy.is_finite() && lap.is_finite()) {
            return Err(PlanarError::NonFinite { x: s[0], y: s[1] });
        }
        Ok([gx, gy, -lap])
    }
}

/// `Z(t)` for `Z' = ∇v(Z)`, `Z(0) = start`.
pub fn gradient_flow(pot: &PlanarPotential, start: [f64; 2], t: f64, opts: &PlanarOptions) -> Result<[f64; 2], PlanarError> {
    let mut last = start;
    let sol = ode::integrate_with(rhs(pot), 0.0, [start[0], start[1], 0.0], t, &opts.ode, |_, y| {
        last = [y[0], y[1]];
        StepControl::Continue
    })
    .map_err(|e| map_ode(e, last))?;
    let (_, y) = sol.last();
    Ok([y[0], y[1]])
}

/// Time `τ` with `v(Z(τ)) = level`, and `w_v = −∫₀^τ Δv(Z(s)) ds`.
pub fn hitting_time(pot: &PlanarPotential, start: [f64; 2], opts: &PlanarOptions) -> Result<HittingRecord, PlanarError> {
    let gap = |x: f64, y: f64| pot.v(x, y) - opts.level;
    let g0 = gap(start[0], start[1]);
    if !g0.is_finite() {
        return Err(PlanarError::NonFinite {
            x: start[0],
            y: start[1],
        });
    }
    if g0.abs() <= opts.v_tol {
        return Ok(HittingRecord {
            start,
            tau: 0.0,
            endpoint: start,
            w_v: 0.0,
        });
    }
    // v increases along the flow: go backward from above the level
    let t_end = if g0 > 0.0 { -opts.horizon } else { opts.horizon };
    let mut last = start;
    let sol = ode::integrate_with(rhs(pot), 0.0, [start[0], start[1], 0.0], t_end, &opts.ode, |_, y| {
        last = [y[0], y[1]];
        let g = gap(y[0], y[1]);
        if g == 0.0 || g.signum() != g0.signum() {
            StepControl::Stop
        } else {
            StepControl::Continue
        }
    })
    .map_err(|e| map_ode(e, last))?;
    if !sol.stopped_early {
        let (_, y) = sol.last();
        if gap(y[0], y[1]).signum() == g0.signum() {
            return Err(PlanarError::NoCrossing {
                level: opts.level,
                horizon: opts.horizon,
            });
        }
    }
    let seg = *sol.segments.last().expect("crossing step");
    // bisection on the dense output of the crossing step
    let (mut a, mut b) = (seg.t0, seg.t1());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let y = seg.eval(m);
        let g = gap(y[0], y[1]);
        if g == 0.0 {
            a = m;
            b = m;
            break;
        }
        if g.signum() == g0.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let mut tau = 0.5 * (a + b);
    // polish with direct integration and Newton in time (dv/dt = |∇v|²)
    let y_seg0 = seg.eval(seg.t0);
    let mut state = [0.0; 3];
    for _ in 0..4 {
        let s = ode::integrate(rhs(pot), seg.t0, y_seg0, tau, &opts.ode).map_err(|e| map_ode(e, last))?;
        state = s.last().1;
        let g = gap(state[0], state[1]);
        if g.abs() <= 0.1 * opts.v_tol {
            break;
        }
        let [gx, gy] = pot.grad(state[0], state[1]);
        tau -= g / (gx * gx + gy * gy);
    }
    Ok(HittingRecord {
        start,
        tau,
        endpoint: [state[0], state[1]],
        w_v: state[2],
    })
}

/// `σ = α(z) e^{w_v(x, y)}`, for which `curl(σ⁻¹ j) = 0`.
pub fn planar_conductivity(
    pot: &PlanarPotential,
    alpha: &Func1D,
    p: Point3,
    opts: &PlanarOptions,
) -> Result<f64, PlanarError> {
    let rec = hitting_time(pot, [p.x, p.y], opts)?;
    Ok(alpha.value(p.z) * rec.w_v.exp())
}

/// Residual of `div(e^{−w_v} ∇v) = e^{−w_v}(Δv − ∇w_v·∇v)` on a lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarResidualReport {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_point: Option<[f64; 2]>,
    pub points: usize,
    pub failed: usize,
    pub fd_step: f64,
}

/// 2-D residual at `n × n` points of `[x0,x1] × [y0,y1]`.
pub fn planar_residuals(
    pot: &PlanarPotential,
    bounds: [f64; 4],
    n: usize,
    h: f64,
    opts: &PlanarOptions,
) -> PlanarResidualReport {
    let n = n.max(1);
    let coord = |lo: f64, hi: f64, i: usize| {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let pts: Vec<[f64; 2]> = (0..n * n)
        .map(|k| [coord(bounds[0], bounds[1], k % n), coord(bounds[2], bounds[3], k / n)])
        .collect();
    let results: Vec<Option<f64>> = pts
        .par_iter()
        .map(|&[x, y]| {
            let w = |dx: f64, dy: f64| hitting_time(pot, [x + dx, y + dy], opts).map(|r| r.w_v);
            let w0 = w(0.0, 0.0).ok()?;
            let d = |ex: f64, ey: f64| -> Option<f64> {
                let p1 = w(ex * h, ey * h).ok()?;
                let m1 = w(-ex * h, -ey * h).ok()?;
                let p2 = w(2.0 * ex * h, 2.0 * ey * h).ok()?;
                let m2 = w(-2.0 * ex * h, -2.0 * ey * h).ok()?;
                Some((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h))
            };
            let wx = d(1.0, 0.0)?;
            let wy = d(0.0, 1.0)?;
            let [gx, gy] = pot.grad(x, y);
            Some((-w0).exp() * (pot.laplacian(x, y) - wx * gx - wy * gy).abs())
        })
        .collect();
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut ok = 0;
    let mut worst = None;
    for (p, r) in pts.iter().zip(&results) {
        if let Some(r) = r {
            ok += 1;
            sum += r;
            if *r > max {
                max = *r;
                worst = Some(*p);
            }
        }
    }
    PlanarResidualReport {
        max_residual: max,
        mean_residual: if ok > 0 { sum / ok as f64 } else { f64::NAN },
        worst_point: worst,
        points: pts.len(),
        failed: pts.len() - ok,
        fd_step: h,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanarVerdict {
    Bounded,
    Diverging,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarVerdictReport {
    pub verdict: PlanarVerdict,
    /// `max |w_v|` over cells `k` with `|k|∞ ≤ K`, for `K = 0, 1, …`.
    pub max_abs_w: Vec<f64>,
    pub samples_per_cell: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarVerdictOptions {
    pub max_shell: usize,
    /// `max |w_v|` beyond which steady growth counts as divergence.
    pub threshold: f64,
    /// Relative growth of the last shell still counted as stable.
    pub stable_rel: f64,
    /// Horizon over which the gradient flow must exist from every sample.
    pub existence_horizon: f64,
    pub seed: u64,
    pub planar: PlanarOptions,
}

impl Default for PlanarVerdictOptions {
    fn default() -> Self {
        Self {
            max_shell: 3,
            threshold: 10.0,
            stable_rel: 0.01,
            existence_horizon: 10.0,
            seed: 0,
            planar: PlanarOptions::default(),
        }
    }
}

/// Boundedness of `w_v` over translated cells of `cell` (a box whose `z`
/// extent is ignored).
pub fn planar_periodic_verdict(
    pot: &PlanarPotential,
    cell: &Aabb,
    n_samples: usize,
    opts: &PlanarVerdictOptions,
) -> PlanarVerdictReport {
    let base = Halton::sample(cell, n_samples.max(1), opts.seed);
    let inconclusive = |reason: String, max_abs_w: Vec<f64>| PlanarVerdictReport {
        verdict: PlanarVerdict::Inconclusive,
        max_abs_w,
        samples_per_cell: n_samples,
        reason,
    };
    for p in &base {
        for t in [opts.existence_horizon, -opts.existence_horizon] {
            if let Err(e) = gradient_flow(pot, [p.x, p.y], t, &opts.planar) {
                return inconclusive(format!("procedure inapplicable, gradient flow is not global: {e}"), vec![]);
            }
        }
    }
    if !pot.periodic_gradient {
        return inconclusive("gradient of v is not declared periodic".into(), vec![]);
    }
    let k_max = opts.max_shell as i64;
    let mut shells = vec![0.0f64; opts.max_shell + 1];
    for kx in -k_max..=k_max {
        for ky in -k_max..=k_max {
            let shell = kx.abs().max(ky.abs()) as usize;
            let vals: Vec<Result<f64, PlanarError>> = base
                .par_iter()
                .map(|p| hitting_time(pot, [p.x + kx as f64, p.y + ky as f64], &opts.planar).map(|r| r.w_v.abs()))
                .collect();
            for v in vals {
                match v {
                    Ok(v) => shells[shell] = shells[shell].max(v),
                    Err(e) => return inconclusive(format!("hitting time failed: {e}"), vec![]),
                }
            }
        }
    }
    // cumulative maxima over |k|∞ ≤ K
    let mut cum = Vec::with_capacity(shells.len());
    let mut m = 0.0f64;
    for s in &shells {
        m = m.max(*s);
        cum.push(m);
    }
    let last = *cum.last().unwrap();
    let prev = if cum.len() > 1 { cum[cum.len() - 2] } else { last };
    let strictly_growing = cum.windows(2).all(|w| w[1] > w[0] * (1.0 + opts.stable_rel));
    let (verdict, reason) = if last <= prev * (1.0 + opts.stable_rel) + 1e-9 {
        (PlanarVerdict::Bounded, format!("max |w_v| stabilized at {last:.6}"))
    } else if strictly_growing && last > opts.threshold {
        (
            PlanarVerdict::Diverging,
            format!("max |w_v| grows with the number of cells, reaching {last:.6}"),
        )
    } else {
        (PlanarVerdict::Inconclusive, format!("max |w_v| = {last:.6} neither stable nor clearly diverging"))
    };
    PlanarVerdictReport {
        verdict,
        max_abs_w: cum,
        samples_per_cell: n_samples,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_potential_flows_straight() {
        let pot = PlanarPotential::linear_x();
        let z = gradient_flow(&pot, [0.3, -2.0], 1.5, &PlanarOptions::default()).unwrap();
        assert!((z[0] - 1.8).abs() < 1e-13 && z[1] == -2.0);
        let rec = hitting_time(&pot, [0.7, 4.0], &PlanarOptions::default()).unwrap();
        assert!((rec.tau + 0.7).abs() < 1e-12);
        assert!(rec.endpoint[0].abs() <= 1e-10);
        assert_eq!(rec.w_v, 0.0);
        let back = hitting_time(&pot, [-0.25, 1.0], &PlanarOptions::default()).unwrap();
        assert!((back.tau - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cosh_potential_blows_up() {
        let pot = PlanarPotential::cosh_minus_y();
        let x0: f64 = 1.0;
        // blow-up time: e^t tanh(x0/2) = 1
        let t_star = -(x0 / 2.0).tanh().ln();
        let z = gradient_flow(&pot, [x0, 0.0], 0.5 * t_star, &PlanarOptions::default()).unwrap();
        let expected = 2.0 * ((0.5 * t_star).exp() * (x0 / 2.0).tanh()).atanh();
        assert!((z[0] - expected).abs() < 1e-9);
        let err = gradient_flow(&pot, [x0, 0.0], 2.0 * t_star, &PlanarOptions::default()).unwrap_err();
        assert!(matches!(err, PlanarError::FlowBlowup { t, .. } if t <= t_star * 1.0001));
    }

    #[test]
    fn constant_alpha_field_is_planar() {
        let f = planar_field(&PlanarPotential::linear_x(), &Func1D::one());
        assert_eq!(f.evaluate(Vec3::new(0.2, 0.3, 0.4)).unwrap(), Vec3::new(0.0, 1.0, 0.0));
        assert!(f.periodicity().is_full());
        let s = planar_conductivity(
            &PlanarPotential::linear_x(),
            &Func1D::one(),
            Vec3::new(0.4, 0.1, 0.9),
            &PlanarOptions::default(),
        )
        .unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn no_crossing_is_reported() {
        // bounded potential: v = tanh(x) never reaches 2
        let pot = PlanarPotential::new(
            "tanh",
            |x, _| x.tanh(),
            |x, _| [1.0 / x.cosh().powi(2), 0.0],
            |x, _| -2.0 * x.tanh() / x.cosh().powi(2),
            false,
        );
        let opts = PlanarOptions {
            level: 2.0,
            horizon: 50.0,
            ..PlanarOptions::default()
        };
        assert!(matches!(
            hitting_time(&pot, [0.0, 0.0], &opts),
            Err(PlanarError::NoCrossing { .. })
        ));
    }
}
