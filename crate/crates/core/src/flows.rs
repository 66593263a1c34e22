//! Normalized flows along `j`, `curl j` and `j × curl j`, their composition
//! into flow coordinates, and the inverse coordinate map.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::csv_table;
use crate::field::{check_conditions, default_step, FieldError, VectorField};
use crate::geometry::{Aabb, Point3, Vec3};
use crate::ode::{self, IntegratorStats, OdeError, OdeOptions, Solution, StepControl};
use crate::optimize::{condition3, solve3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlowDirection {
    /// `j / |j|`
    D1,
    /// `curl j / |curl j|`
    D2,
    /// `j × curl j / |j|²`
    D3,
    /// `j × curl j / (|j| |curl j|)`
    D3Tilde,
}

impl FlowDirection {
    pub const ALL: [FlowDirection; 4] = [
        FlowDirection::D1,
        FlowDirection::D2,
        FlowDirection::D3,
        FlowDirection::D3Tilde,
    ];

    pub fn is_unit_speed(self) -> bool {
        self != FlowDirection::D3
    }

    fn needs_curl_guard(self) -> bool {
        matches!(self, FlowDirection::D2 | FlowDirection::D3Tilde)
    }
}

impl fmt::Display for FlowDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowDirection::D1 => "D1",
            FlowDirection::D2 => "D2",
            FlowDirection::D3 => "D3",
            FlowDirection::D3Tilde => "D3Tilde",
        })
    }
}

impl FromStr for FlowDirection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "d1" | "1" => Ok(FlowDirection::D1),
            "d2" | "2" => Ok(FlowDirection::D2),
            "d3" | "3" => Ok(FlowDirection::D3),
            "d3tilde" | "d3-tilde" | "d3t" => Ok(FlowDirection::D3Tilde),
            _ => Err(format!("unknown flow direction '{s}' (expected D1, D2, D3 or D3Tilde)")),
        }
    }
}

/// Which third flow defines the `t₃` coordinate and the quadrature for `w`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Flow along `D3`, integrand `|curl j|² / |j|²`.
    #[default]
    Standard,
    /// Flow along `D3Tilde`, integrand `|curl j| / |j|`.
    Tilde,
}

impl Normalization {
    pub fn third_leg(self) -> FlowDirection {
        match self {
            Normalization::Standard => FlowDirection::D3,
            Normalization::Tilde => FlowDirection::D3Tilde,
        }
    }
}

impl FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(Normalization::Standard),
            "tilde" => Ok(Normalization::Tilde),
            _ => Err(format!("unknown normalization '{s}' (expected standard or tilde)")),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Standard => "standard",
            Normalization::Tilde => "tilde",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub ode: OdeOptions,
    pub eps_j: f64,
    pub eps_curl: f64,
    /// Finite-difference step for the curl when no analytic curl is attached.
    pub fd_step: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            eps_j: 1e-9,
            eps_curl: 1e-9,
            fd_step: None,
        }
    }
}

impl FlowOptions {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.ode.rtol = rtol;
        self.ode.atol = atol;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FlowError {
    #[error("|{quantity}| = {norm:e} fell below the guard at t = {t}, point {point}")]
    SingularDirection {
        t: f64,
        point: Point3,
        quantity: &'static str,
        norm: f64,
    },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step limit {steps} reached at t = {t}")]
    StepLimit { t: f64, steps: usize },
    #[error("trajectory left every bounded region near t = {t}")]
    Blowup { t: f64 },
    #[error("field evaluation failed at t = {t}: {source}")]
    Field {
        t: f64,
        #[source]
        source: FieldError,
    },
    #[error("leg {leg} of the triple flow: {source}")]
    Leg {
        leg: usize,
        #[source]
        source: Box<FlowError>,
    },
    #[error("coordinate inversion did not converge (best residual {residual:e} at {best:?})")]
    NoConvergence {
        best: TripleCoordinates,
        residual: f64,
    },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
}

/// Failure inside the right-hand side, before the time is known.
#[derive(Debug)]
enum RhsFail {
    Singular {
        point: Point3,
        quantity: &'static str,
        norm: f64,
    },
    Field(FieldError),
}

impl From<OdeError<RhsFail>> for FlowError {
    fn from(e: OdeError<RhsFail>) -> Self {
        match e {
            OdeError::Rhs { t, cause } => match cause {
                RhsFail::Singular {
                    point,
                    quantity,
                    norm,
                } => FlowError::SingularDirection {
                    t,
                    point,
                    quantity,
                    norm,
                },
                RhsFail::Field(source) => FlowError::Field { t, source },
            },
            OdeError::StepUnderflow { t, h } => FlowError::StepUnderflow { t, h },
            OdeError::StepLimit { t, steps } => FlowError::StepLimit { t, steps },
            OdeError::Blowup { t } => FlowError::Blowup { t },
        }
    }
}

fn rates(field: &VectorField, dir: FlowDirection, p: Point3, opts: &FlowOptions) -> Result<(Vec3, f64), RhsFail> {
    let j = field.evaluate(p).map_err(RhsFail::Field)?;
    let nj = j.norm();
    if nj <= opts.eps_j {
        return Err(RhsFail::Singular {
            point: p,
            quantity: "j",
            norm: nj,
        });
    }
    if dir == FlowDirection::D1 {
        return Ok((j / nj, 0.0));
    }
    let h = opts.fd_step.unwrap_or_else(|| default_step(p));
    let c = field.curl(p, h).map_err(RhsFail::Field)?;
    let nc = c.norm();
    if dir.needs_curl_guard() && nc <= opts.eps_curl {
        return Err(RhsFail::Singular {
            point: p,
            quantity: "curl j",
            norm: nc,
        });
    }
    Ok(match dir {
        FlowDirection::D1 => unreachable!(),
        FlowDirection::D2 => (c / nc, 0.0),
        FlowDirection::D3 => (j.cross(c) / (nj * nj), (nc / nj) * (nc / nj)),
        FlowDirection::D3Tilde => (j.cross(c) / (nj * nc), nc / nj),
    })
}

/// Velocity of `dir` at `p` and the rate of the accumulated quadrature
/// (`|curl j|²/|j|²` for D3, `|curl j|/|j|` for D3Tilde, zero otherwise).
pub fn direction_field(
    field: &VectorField,
    dir: FlowDirection,
    p: Point3,
    opts: &FlowOptions,
) -> Result<(Vec3, f64), FlowError> {
    rates(field, dir, p, opts).map_err(|e| FlowError::from(OdeError::Rhs { t: 0.0, cause: e }))
}

/// Accepted integrator steps of one flow, with the quadrature `q`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub direction: FlowDirection,
    pub t: Vec<f64>,
    pub points: Vec<Point3>,
    pub q: Vec<f64>,
    pub stats: IntegratorStats,
    /// True when a stop condition ended the integration before `t_end`.
    pub stopped_early: bool,
    solution: Solution<4>,
}

impl Trajectory {
    fn from_solution(direction: FlowDirection, solution: Solution<4>) -> Self {
        Self {
            direction,
            t: solution.t.clone(),
            points: solution.y.iter().map(|y| Vec3::new(y[0], y[1], y[2])).collect(),
            q: solution.y.iter().map(|y| y[3]).collect(),
            stats: solution.stats,
            stopped_early: solution.stopped_early,
            solution,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> Point3 {
        self.points[0]
    }

    pub fn endpoint(&self) -> Point3 {
        *self.points.last().unwrap()
    }

    pub fn final_time(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn final_q(&self) -> f64 {
        *self.q.last().unwrap()
    }

    /// Position and quadrature at `t` by the integrator's dense output.
    pub fn interpolate(&self, t: f64) -> Option<(Point3, f64)> {
        self.solution
            .interpolate(t)
            .map(|y| (Vec3::new(y[0], y[1], y[2]), y[3]))
    }

    /// CSV with columns `t,x,y,z,q`.
    pub fn to_csv(&self) -> String {
        csv_table(
            &["t", "x", "y", "z", "q"],
            (0..self.len()).map(|i| {
                let p = self.points[i];
                vec![self.t[i], p.x, p.y, p.z, self.q[i]]
            }),
        )
    }
}

/// Integrates the flow of `dir` from `start` over `[0, t_end]` (or `[t_end, 0]`).
pub fn integrate_flow(
    field: &VectorField,
    dir: FlowDirection,
    start: Point3,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<Trajectory, FlowError> {
    integrate_flow_until(field, dir, start, t_end, opts, |_, _, _| false)
}

/// Like [`integrate_flow`], stopping after the first accepted step for which
/// `stop(t, p, q)` holds.
pub fn integrate_flow_until(
    field: &VectorField,
    dir: FlowDirection,
    start: Point3,
    t_end: f64,
    opts: &FlowOptions,
    mut stop: impl FnMut(f64, Point3, f64) -> bool,
) -> Result<Trajectory, FlowError> {
    if !start.is_finite() {
        return Err(FlowError::Field {
            t: 0.0,
            source: FieldError::NonFinitePoint(start),
        });
    }
    let rhs = |_t: f64, y: &[f64; 4]| {
        let (v, r) = rates(field, dir, Vec3::new(y[0], y[1], y[2]), opts)?;
        Ok([v.x, v.y, v.z, r])
    };
    let sol = ode::integrate_with(
        rhs,
        0.0,
        [start.x, start.y, start.z, 0.0],
        t_end,
        &opts.ode,
        |seg, y| {
            if stop(seg.t1(), Vec3::new(y[0], y[1], y[2]), y[3]) {
                StepControl::Stop
            } else {
                StepControl::Continue
            }
        },
    )?;
    Ok(Trajectory::from_solution(dir, sol))
}

fn flow_endpoint(
    field: &VectorField,
    dir: FlowDirection,
    start: Point3,
    t: f64,
    opts: &FlowOptions,
) -> Result<(Point3, f64), FlowError> {
    let traj = integrate_flow(field, dir, start, t, opts)?;
    Ok((traj.endpoint(), traj.final_q()))
}

/// Anchor and flow times of a point in triple-flow coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleCoordinates {
    pub x0: Point3,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl TripleCoordinates {
    pub fn new(x0: Point3, t1: f64, t2: f64, t3: f64) -> Self {
        Self { x0, t1, t2, t3 }
    }

    pub fn times(&self) -> [f64; 3] {
        [self.t1, self.t2, self.t3]
    }

    pub fn with_times(&self, t: [f64; 3]) -> Self {
        Self::new(self.x0, t[0], t[1], t[2])
    }
}

fn leg<T>(n: usize, r: Result<T, FlowError>) -> Result<T, FlowError> {
    r.map_err(|e| FlowError::Leg {
        leg: n,
        source: Box::new(e),
    })
}

/// `X₃(t₃, X₂(t₂, X₁(t₁, x₀)))`.
pub fn forward_map(field: &VectorField, coords: &TripleCoordinates, opts: &FlowOptions) -> Result<Point3, FlowError> {
    forward_map_with(field, coords, Normalization::Standard, opts).map(|(p, _)| p)
}

/// Forward map with the chosen third flow; also returns the quadrature
/// accumulated along the third leg.
pub fn forward_map_with(
    field: &VectorField,
    coords: &TripleCoordinates,
    normalization: Normalization,
    opts: &FlowOptions,
) -> Result<(Point3, f64), FlowError> {
    let (p1, _) = leg(1, flow_endpoint(field, FlowDirection::D1, coords.x0, coords.t1, opts))?;
    let (p2, _) = leg(2, flow_endpoint(field, FlowDirection::D2, p1, coords.t2, opts))?;
    leg(3, flow_endpoint(field, normalization.third_leg(), p2, coords.t3, opts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub normalization: Normalization,
    /// Required `|forward_map − target|∞`.
    pub tol: f64,
    /// Forward-difference step of the Jacobian (relative to `max(1, |tᵢ|)`).
    pub fd_step: f64,
    pub max_iter: usize,
    /// Box of flow times `[[t1lo, t1hi], [t2lo, t2hi], [t3lo, t3hi]]` for the multi-start grid.
    pub search_box: [[f64; 2]; 3],
    /// Grid points per axis of the multi-start fallback.
    pub grid: usize,
    /// Number of screened grid points refined by Newton.
    pub refine: usize,
    /// Newton iterates with some `|tᵢ|` above this are rejected.
    pub max_time: f64,
    pub flow: FlowOptions,
    /// Looser options for screening grid points.
    pub screen_flow: FlowOptions,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            normalization: Normalization::Standard,
            tol: 1e-8,
            fd_step: 1e-6,
            max_iter: 40,
            search_box: [[-3.0, 3.0]; 3],
            grid: 5,
            refine: 8,
            max_time: 30.0,
            flow: capped(FlowOptions::default().with_tolerances(1e-12, 1e-14)),
            screen_flow: capped(FlowOptions::default().with_tolerances(1e-6, 1e-8)),
        }
    }
}

/// Step budget of the flows inside an inversion; a leg that needs more is
/// treated as a failed evaluation.
fn capped(mut o: FlowOptions) -> FlowOptions {
    o.ode.max_steps = 20_000;
    o
}

/// A solved coordinate inversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub coords: TripleCoordinates,
    /// `|forward_map(coords) − target|∞`
    pub residual: f64,
    /// Quadrature along the third leg, i.e. the log-conductivity at the target.
    pub w: f64,
    pub iterations: usize,
    /// ∞-norm condition number of the final Jacobian.
    pub jacobian_condition: f64,
    /// Finite-difference Jacobian `∂X₃₂/∂(t₁,t₂,t₃)` at the last iterate.
    pub jacobian: Option<[[f64; 3]; 3]>,
    /// Newton starts used (1 when the initial guess converged).
    pub starts: usize,
}

struct NewtonRun {
    t: [f64; 3],
    residual: f64,
    w: f64,
    iterations: usize,
    jacobian: Option<[[f64; 3]; 3]>,
    converged: bool,
}

fn inf_norm(v: Vec3) -> f64 {
    v.norm_inf()
}

/// Damped Newton on `forward_map(t) = target`. With `chord`, that Jacobian is
/// reused until a step fails, then finite differences take over.
fn newton(
    field: &VectorField,
    x0: Point3,
    target: Point3,
    t_init: [f64; 3],
    chord: Option<[[f64; 3]; 3]>,
    opts: &InversionOptions,
) -> Result<NewtonRun, FlowError> {
    let eval = |t: [f64; 3]| {
        if t.iter().any(|ti| !(ti.abs() <= opts.max_time)) {
            return Err(FlowError::NoConvergence {
                best: TripleCoordinates::new(x0, t[0], t[1], t[2]),
                residual: f64::INFINITY,
            });
        }
        forward_map_with(
            field,
            &TripleCoordinates::new(x0, t[0], t[1], t[2]),
            opts.normalization,
            &opts.flow,
        )
    };
    let fd_jacobian = |t: [f64; 3], p: Point3| -> Result<[[f64; 3]; 3], FlowError> {
        let mut jac = [[0.0; 3]; 3];
        for k in 0..3 {
            let hk = opts.fd_step * t[k].abs().max(1.0);
            let mut tk = t;
            tk[k] += hk;
            let col = match eval(tk) {
                Ok((pk, _)) => (pk - p) / hk,
                Err(_) => {
                    tk[k] = t[k] - hk;
                    let (pk, _) = eval(tk)?;
                    (p - pk) / hk
                }
            };
            for (i, row) in jac.iter_mut().enumerate() {
                row[k] = col[i];
            }
        }
        Ok(jac)
    };
    let mut t = t_init;
    let (mut p, mut w) = eval(t)?;
    let mut f = p - target;
    let mut jacobian = None;
    let mut chord = chord;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if inf_norm(f) <= opts.tol {
            converged = true;
        }
        iterations += 1;
        let using_chord = chord.is_some();
        let jac = match chord {
            Some(j) => j,
            None => fd_jacobian(t, p)?,
        };
        jacobian = Some(jac);
        let Some(delta) = solve3(jac, (-f).to_array()) else {
            break;
        };
        let f2 = f.norm_squared();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [
                t[0] + lambda * delta[0],
                t[1] + lambda * delta[1],
                t[2] + lambda * delta[2],
            ];
            if let Ok((pt, wt)) = eval(trial) {
                let ft = pt - target;
                // Armijo on |F|²; once converged, any decrease is kept
                let ok = if converged || using_chord {
                    ft.norm_squared() < f2
                } else {
                    ft.norm_squared() <= (1.0 - 1e-4 * lambda) * f2
                };
                if ok {
                    t = trial;
                    p = pt;
                    w = wt;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            if converged || using_chord {
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            if using_chord {
                chord = None;
                continue;
            }
            break;
        }
        if converged && inf_norm(f) <= 1e-3 * opts.tol {
            break;
        }
    }
    let residual = inf_norm(f);
    Ok(NewtonRun {
        t,
        residual,
        w,
        iterations,
        jacobian,
        converged: converged || residual <= opts.tol,
    })
}

fn grid_starts(opts: &InversionOptions) -> Vec<[f64; 3]> {
    let n = opts.grid.max(1);
    let coord = |axis: usize, i: usize| {
        let [lo, hi] = opts.search_box[axis];
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push([coord(0, i), coord(1, j), coord(2, k)]);
            }
        }
    }
    out
}

/// Grid starts ordered by their screened residual (failed maps last).
fn screened_starts(field: &VectorField, x0: Point3, target: Point3, opts: &InversionOptions) -> Vec<([f64; 3], f64)> {
    let mut scored: Vec<([f64; 3], f64)> = grid_starts(opts)
        .into_iter()
        .map(|t| {
            let r = forward_map_with(
                field,
                &TripleCoordinates::new(x0, t[0], t[1], t[2]),
                opts.normalization,
                &opts.screen_flow,
            )
            .map(|(p, _)| inf_norm(p - target))
            .unwrap_or(f64::INFINITY);
            (t, r)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    scored
}

fn to_inversion(x0: Point3, run: &NewtonRun, starts: usize) -> Inversion {
    Inversion {
        coords: TripleCoordinates::new(x0, run.t[0], run.t[1], run.t[2]),
        residual: run.residual,
        w: run.w,
        iterations: run.iterations,
        jacobian_condition: run.jacobian.map_or(f64::NAN, condition3),
        jacobian: run.jacobian,
        starts,
    }
}

/// Finds `(t₁,t₂,t₃)` with `forward_map ≈ target` by damped Newton from
/// `guess` (default zero), falling back to a multi-start grid.
pub fn invert_coordinates(
    field: &VectorField,
    x0: Point3,
    target: Point3,
    guess: Option<&TripleCoordinates>,
    opts: &InversionOptions,
) -> Result<Inversion, FlowError> {
    let t0 = guess.map(|g| g.times()).unwrap_or([0.0; 3]);
    let mut best: Option<NewtonRun> = None;
    let mut starts = 1;
    let consider = |run: NewtonRun, best: &mut Option<NewtonRun>| {
        if best.as_ref().is_none_or(|b| run.residual < b.residual) {
            *best = Some(run);
        }
    };
    if let Ok(run) = newton(field, x0, target, t0, None, opts) {
        if run.converged {
            return Ok(to_inversion(x0, &run, starts));
        }
        consider(run, &mut best);
    }
    for (t, r) in screened_starts(field, x0, target, opts).into_iter().take(opts.refine) {
        if !r.is_finite() {
            break;
        }
        starts += 1;
        if let Ok(run) = newton(field, x0, target, t, None, opts) {
            if run.converged {
                return Ok(to_inversion(x0, &run, starts));
            }
            consider(run, &mut best);
        }
    }
    match best {
        Some(run) => Err(FlowError::NoConvergence {
            best: TripleCoordinates::new(x0, run.t[0], run.t[1], run.t[2]),
            residual: run.residual,
        }),
        None => Err(FlowError::NoConvergence {
            best: TripleCoordinates::new(x0, t0[0], t0[1], t0[2]),
            residual: f64::INFINITY,
        }),
    }
}

/// Inverts a target close to an already inverted point, reusing its
/// coordinates as the guess and its Jacobian as a chord.
pub fn invert_near(
    field: &VectorField,
    target: Point3,
    near: &Inversion,
    opts: &InversionOptions,
) -> Result<Inversion, FlowError> {
    let x0 = near.coords.x0;
    if let Ok(run) = newton(field, x0, target, near.coords.times(), near.jacobian, opts) {
        if run.converged {
            return Ok(to_inversion(x0, &run, 1));
        }
    }
    invert_coordinates(field, x0, target, Some(&near.coords), opts)
}

/// Every distinct converged solution reachable from the multi-start grid.
pub fn inversion_candidates(
    field: &VectorField,
    x0: Point3,
    target: Point3,
    opts: &InversionOptions,
) -> Vec<Inversion> {
    let mut found: Vec<Inversion> = Vec::new();
    let screened = screened_starts(field, x0, target, opts);
    let total = screened.len();
    for (t, r) in screened {
        if !r.is_finite() {
            continue;
        }
        let Ok(run) = newton(field, x0, target, t, None, opts) else {
            continue;
        };
        if !run.converged {
            continue;
        }
        let dup = found.iter().any(|s| {
            let d = s.coords.times();
            (0..3).all(|k| (d[k] - run.t[k]).abs() <= 1e-5 * run.t[k].abs().max(1.0))
        });
        if !dup {
            found.push(to_inversion(x0, &run, total));
        }
    }
    found
}

/// Result of [`commutation_defect`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutationDefect {
    pub defect: f64,
    pub s2: f64,
    pub s3: f64,
}

/// Distance between `X₃(t₃, X₂(t₂, x₀))` and the closest `X₂(s₂, X₃(s₃, x₀))`.
///
/// Refuses fields that fail the orthogonal-basis condition near `x₀`.
pub fn commutation_defect(
    field: &VectorField,
    x0: Point3,
    t2: f64,
    t3: f64,
    opts: &FlowOptions,
) -> Result<CommutationDefect, FlowError> {
    let half = (t2.abs() + t3.abs()).max(0.25);
    let region = Aabb::new(x0 - Vec3::new(half, half, half), x0 + Vec3::new(half, half, half));
    let report = check_conditions(field, &region, 64, crate::field::DEFAULT_CONDITION_TOL);
    if !report.basis_ok {
        return Err(FlowError::PreconditionFailed(format!(
            "orthogonal-basis condition fails near {x0} (frobenius residual {:e}, min |curl j| {:e})",
            report.frobenius_residual, report.min_curl_norm
        )));
    }
    if t2 == 0.0 && t3 == 0.0 {
        return Ok(CommutationDefect {
            defect: 0.0,
            s2: 0.0,
            s3: 0.0,
        });
    }
    let (a, _) = flow_endpoint(field, FlowDirection::D2, x0, t2, opts)?;
    let (target, _) = flow_endpoint(field, FlowDirection::D3, a, t3, opts)?;
    let other = |s: [f64; 2]| -> Result<Point3, FlowError> {
        let (b, _) = flow_endpoint(field, FlowDirection::D3, x0, s[1], opts)?;
        Ok(flow_endpoint(field, FlowDirection::D2, b, s[0], opts)?.0)
    };

    // Levenberg–Marquardt on the 3×2 least-squares problem
    let mut s = [t2, t3];
    let mut r = other(s)? - target;
    let mut mu = 1e-6;
    for _ in 0..50 {
        if r.norm() < 1e-14 {
            break;
        }
        let mut cols = [Vec3::ZERO; 2];
        for (k, col) in cols.iter_mut().enumerate() {
            let hk = 1e-7 * s[k].abs().max(1.0);
            let mut sk = s;
            sk[k] += hk;
            *col = (other(sk)? - target - r) / hk;
        }
        let g = [cols[0].dot(r), cols[1].dot(r)];
        let a11 = cols[0].dot(cols[0]);
        let a12 = cols[0].dot(cols[1]);
        let a22 = cols[1].dot(cols[1]);
        let mut improved = false;
        for _ in 0..12 {
            let (m11, m22) = (a11 * (1.0 + mu), a22 * (1.0 + mu));
            let det = m11 * m22 - a12 * a12;
            if det == 0.0 {
                mu *= 10.0;
                continue;
            }
            let d = [-(m22 * g[0] - a12 * g[1]) / det, -(m11 * g[1] - a12 * g[0]) / det];
            let trial = [s[0] + d[0], s[1] + d[1]];
            if let Ok(p) = other(trial) {
                let rt = p - target;
                if rt.norm() < r.norm() {
                    s = trial;
                    r = rt;
                    mu = (mu * 0.1).max(1e-12);
                    improved = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(CommutationDefect {
        defect: r.norm(),
        s2: s[0],
        s3: s[1],
    })
}
