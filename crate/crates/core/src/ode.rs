//! Embedded Dormand–Prince 5(4) integrator with PI step-size control and
//! Hairer's fourth-order continuous extension.
//!
//! States are fixed-size arrays so the flow ODEs (position plus an
//! accumulated quadrature) stay on the stack.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller (Hairer & Wanner, DOPRI5 defaults)
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Abort with [`OdeError::Blowup`] once any state component exceeds this magnitude.
    pub max_state: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 200_000,
            max_state: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError<E> {
    #[error("right-hand side failed at t = {t}: {cause}")]
    Rhs { t: f64, cause: E },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step limit {steps} reached at t = {t}")]
    StepLimit { t: f64, steps: usize },
    #[error("state left the admissible range at t = {t}")]
    Blowup { t: f64 },
}

impl<E> OdeError<E> {
    pub fn time(&self) -> f64 {
        match self {
            OdeError::Rhs { t, .. }
            | OdeError::StepUnderflow { t, .. }
            | OdeError::StepLimit { t, .. }
            | OdeError::Blowup { t } => *t,
        }
    }

    pub fn map_cause<F>(self, f: impl FnOnce(E) -> F) -> OdeError<F> {
        match self {
            OdeError::Rhs { t, cause } => OdeError::Rhs { t, cause: f(cause) },
            OdeError::StepUnderflow { t, h } => OdeError::StepUnderflow { t, h },
            OdeError::StepLimit { t, steps } => OdeError::StepLimit { t, steps },
            OdeError::Blowup { t } => OdeError::Blowup { t },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest scaled error estimate among accepted steps (≤ 1).
    pub max_error_estimate: f64,
}

/// Continuous extension over one accepted step `[t0, t0 + h]`.
#[derive(Clone, Copy, Debug)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = if self.h >= 0.0 {
            (self.t0, self.t1())
        } else {
            (self.t1(), self.t0)
        };
        t >= a && t <= b
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        y
    }
}

/// Accepted-step output of an integration.
#[derive(Clone, Debug)]
pub struct Solution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub segments: Vec<DenseSegment<N>>,
    pub stats: IntegratorStats,
    /// Set when the step callback asked to stop before `t_end`.
    pub stopped_early: bool,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        (*self.t.last().unwrap(), *self.y.last().unwrap())
    }

    /// Dense-output value at `t` within the integrated range.
    pub fn interpolate(&self, t: f64) -> Option<[f64; N]> {
        if self.segments.is_empty() {
            return (t == self.t[0]).then_some(self.y[0]);
        }
        let forward = self.segments[0].h > 0.0;
        let idx = self.segments.partition_point(|s| {
            if forward {
                s.t1() < t
            } else {
                s.t1() > t
            }
        });
        self.segments
            .get(idx)
            .filter(|s| s.contains(t))
            .map(|s| s.eval(t))
    }
}

/// What to do after an accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

fn all_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn scaled_rms<const N: usize>(e: &[f64; N], y0: &[f64; N], y1: &[f64; N], opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        acc += (e[i] / sk).powi(2);
    }
    (acc / N as f64).sqrt()
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end` (either direction).
pub fn integrate<const N: usize, E>(
    rhs: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Solution<N>, OdeError<E>> {
    integrate_with(rhs, t0, y0, t_end, opts, |_, _| StepControl::Continue)
}

/// Like [`integrate`], calling `on_step(segment, y_new)` after every accepted
/// step; returning [`StepControl::Stop`] ends the integration at that step.
pub fn integrate_with<const N: usize, E>(
    mut rhs: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut on_step: impl FnMut(&DenseSegment<N>, &[f64; N]) -> StepControl,
) -> Result<Solution<N>, OdeError<E>> {
    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0],
        segments: Vec::new(),
        stats: IntegratorStats::default(),
        stopped_early: false,
    };
    if t_end == t0 {
        return Ok(sol);
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();

    let mut eval = |t: f64, y: &[f64; N], stats: &mut IntegratorStats| {
        stats.rhs_evals += 1;
        rhs(t, y).map_err(|cause| OdeError::Rhs { t, cause })
    };

    let mut t = t0;
    let mut y = y0;
    let mut k1 = eval(t, &y, &mut sol.stats)?;
    let mut h = match opts.h_init {
        Some(h) => h.abs().min(span),
        None => initial_step(&mut eval, t, &y, &k1, dir, span, opts, &mut sol.stats)?,
    }
    .min(opts.h_max);
    let mut facold = 1e-4f64;
    let mut last_rejected = false;

    loop {
        if sol.stats.accepted + sol.stats.rejected >= opts.max_steps {
            return Err(OdeError::StepLimit {
                t,
                steps: opts.max_steps,
            });
        }
        let remaining = (t_end - t).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        } else if h < 10.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let hs = dir * h;

        let y2 = axpy(&y, &[(hs * A21, &k1)]);
        let k2 = eval(t + C2 * hs, &y2, &mut sol.stats)?;
        let y3 = axpy(&y, &[(hs * A31, &k1), (hs * A32, &k2)]);
        let k3 = eval(t + C3 * hs, &y3, &mut sol.stats)?;
        let y4 = axpy(&y, &[(hs * A41, &k1), (hs * A42, &k2), (hs * A43, &k3)]);
        let k4 = eval(t + C4 * hs, &y4, &mut sol.stats)?;
        let y5 = axpy(
            &y,
            &[(hs * A51, &k1), (hs * A52, &k2), (hs * A53, &k3), (hs * A54, &k4)],
        );
        let k5 = eval(t + C5 * hs, &y5, &mut sol.stats)?;
        let y6 = axpy(
            &y,
            &[
                (hs * A61, &k1),
                (hs * A62, &k2),
                (hs * A63, &k3),
                (hs * A64, &k4),
                (hs * A65, &k5),
            ],
        );
        let k6 = eval(t + hs, &y6, &mut sol.stats)?;
        let y_new = axpy(
            &y,
            &[
                (hs * A71, &k1),
                (hs * A73, &k3),
                (hs * A74, &k4),
                (hs * A75, &k5),
                (hs * A76, &k6),
            ],
        );
        let t_new = if last { t_end } else { t + hs };
        let k7 = if all_finite(&y_new) {
            eval(t_new, &y_new, &mut sol.stats)?
        } else {
            [f64::NAN; N]
        };

        let mut e = [0.0; N];
        for i in 0..N {
            e[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = scaled_rms(&e, &y, &y_new, opts);

        if !err.is_finite() {
            // non-finite stage: shrink hard and retry
            sol.stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        if err <= 1.0 {
            facold = err.max(1e-4);
            sol.stats.accepted += 1;
            sol.stats.max_error_estimate = sol.stats.max_error_estimate.max(err);

            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - hs * k7[i] - bspl;
                cont[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let seg = DenseSegment { t0: t, h: hs, cont };
            sol.segments.push(seg);
            sol.t.push(t_new);
            sol.y.push(y_new);

            if y_new.iter().any(|v| v.abs() > opts.max_state) {
                return Err(OdeError::Blowup { t: t_new });
            }

            t = t_new;
            y = y_new;
            k1 = k7;

            if on_step(&seg, &y_new) == StepControl::Stop {
                sol.stopped_early = !last;
                return Ok(sol);
            }
            if last {
                return Ok(sol);
            }
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            h = h_new.min(opts.h_max);
            last_rejected = false;
        } else {
            sol.stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<const N: usize, E>(
    eval: &mut impl FnMut(f64, &[f64; N], &mut IntegratorStats) -> Result<[f64; N], OdeError<E>>,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    span: f64,
    opts: &OdeOptions,
    stats: &mut IntegratorStats,
) -> Result<f64, OdeError<E>> {
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(span).min(opts.h_max);
    let y1 = axpy(y, &[(dir * h, f0)]);
    let f1 = eval(t + dir * h, &y1, stats)?;
    let mut der2 = 0.0;
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    let h = (100.0 * h).min(h1).min(span).min(opts.h_max);
    Ok(if h.is_finite() && h > 0.0 { h } else { span.min(1e-6) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok<const N: usize>(v: [f64; N]) -> Result<[f64; N], Infallible> {
        Ok(v)
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = OdeOptions::default();
        let sol = integrate(|_, y: &[f64; 1]| ok([-y[0]]), 0.0, [1.0], 5.0, &opts).unwrap();
        let (t, y) = sol.last();
        assert_eq!(t, 5.0);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn backward_integration_of_oscillator() {
        let opts = OdeOptions::default();
        let sol = integrate(|_, y: &[f64; 2]| ok([y[1], -y[0]]), 0.0, [0.0, 1.0], -3.0, &opts).unwrap();
        let (_, y) = sol.last();
        assert!((y[0] - (-3.0f64).sin()).abs() < 1e-8);
        assert!((y[1] - (-3.0f64).cos()).abs() < 1e-8);
    }

    #[test]
    fn zero_span_takes_no_steps() {
        let sol = integrate(
            |_, _: &[f64; 1]| -> Result<[f64; 1], &str> { Err("must not be called") },
            1.0,
            [2.0],
            1.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.t, vec![1.0]);
        assert_eq!(sol.stats.rhs_evals, 0);
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let opts = OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            ..OdeOptions::default()
        };
        let sol = integrate(|_, y: &[f64; 2]| ok([y[1], -y[0]]), 0.0, [0.0, 1.0], 6.0, &opts).unwrap();
        for k in 0..=60 {
            let t = 0.1 * k as f64;
            let y = sol.interpolate(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-8, "t = {t}");
        }
        assert!(sol.interpolate(6.5).is_none());
    }

    #[test]
    fn tiny_span_is_one_step() {
        let sol = integrate(|_, y: &[f64; 1]| ok([y[0]]), 0.0, [1.0], 1.4e-16, &OdeOptions::default()).unwrap();
        assert_eq!(sol.t.last(), Some(&1.4e-16));
        assert_eq!(sol.stats.accepted, 1);
    }

    #[test]
    fn finite_time_blowup_is_reported() {
        // y' = y², y(0) = 1 blows up at t = 1
        let err = integrate(|_, y: &[f64; 1]| ok([y[0] * y[0]]), 0.0, [1.0], 2.0, &OdeOptions::default())
            .unwrap_err();
        assert!(matches!(
            err,
            OdeError::StepUnderflow { .. } | OdeError::StepLimit { .. } | OdeError::Blowup { .. }
        ));
        assert!(err.time() < 1.0 + 1e-6);
        let capped = integrate(
            |_, y: &[f64; 1]| ok([y[0] * y[0]]),
            0.0,
            [1.0],
            2.0,
            &OdeOptions {
                max_state: 1e6,
                ..OdeOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(capped, OdeError::Blowup { .. }));
    }

    #[test]
    fn rhs_errors_propagate_with_time() {
        let err = integrate(
            |_, y: &[f64; 1]| if y[0] > 2.0 { Err("singular") } else { Ok([1.0]) },
            0.0,
            [0.0],
            5.0,
            &OdeOptions::default(),
        )
        .unwrap_err();
        match err {
            OdeError::Rhs { t, cause } => {
                assert_eq!(cause, "singular");
                assert!(t > 1.0 && t < 5.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
