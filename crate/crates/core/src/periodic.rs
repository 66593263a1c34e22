//! Realizability in the torus: boundedness of `∫|curl j|²/|j|²` along the
//! third flow, and lattice averages of `w`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::export::{csv_table, fmt17};
use crate::field::{ConditionReport, FieldFamily, VectorField};
use crate::flows::{integrate_flow_until, FlowDirection, FlowError, FlowOptions};
use crate::geometry::{Aabb, Point3, Vec3};
use crate::realizer::{RealizerError, WSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundedness {
    Bounded,
    Diverging,
    Inconclusive,
}

impl fmt::Display for Boundedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundedness::Bounded => "Bounded",
            Boundedness::Diverging => "Diverging",
            Boundedness::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthModel {
    Constant,
    Log,
    Power,
}

/// Least-squares fit of `I(T)` selected by AIC.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub model: GrowthModel,
    /// Coefficient of `ln T` or `T^α` (0 for the constant model).
    pub slope: f64,
    /// Exponent of the power model.
    pub exponent: Option<f64>,
    pub aic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start: Point3,
    /// Horizons reached, in increasing order.
    pub horizons: Vec<f64>,
    /// `I(T) = q(T) − q(−T)` at each reached horizon.
    pub integral: Vec<f64>,
    /// True when integration stopped because `I` exceeded the cap.
    pub capped: bool,
    pub verdict: Boundedness,
    pub fit: Option<GrowthFit>,
    /// Flow failure that ended the scan from this start.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessScan {
    pub records: Vec<StartRecord>,
    pub verdict: Boundedness,
    pub cap: f64,
    /// Largest fitted growth coefficient among diverging starts.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub horizons: Vec<f64>,
    pub cap: f64,
    pub flow: FlowOptions,
    /// `I(T_max)` above which growth counts as divergence.
    pub divergence_floor: f64,
    /// Last-decade increment, relative to `I(T_max)`, still counted as bounded.
    pub stall_rel: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            horizons: default_horizons(),
            cap: 50.0,
            flow: FlowOptions::default(),
            divergence_floor: 10.0,
            stall_rel: 0.01,
        }
    }
}

/// `1, 2, 4, …, 256`.
pub fn default_horizons() -> Vec<f64> {
    (0..=8).map(|k| f64::from(1u32 << k)).collect()
}

/// Starts on a 3³ lattice of the unit cell, offset off the symmetry planes.
pub fn default_starts() -> Vec<Point3> {
    let off = [0.137, 0.271, 0.533];
    let mut out = Vec::with_capacity(27);
    for k in 0..3 {
        for j in 0..3 {
            for i in 0..3 {
                let c = |n: usize, o: f64| (o + n as f64 / 3.0).fract();
                out.push(Vec3::new(c(i, off[0]), c(j, off[1]), c(k, off[2])));
            }
        }
    }
    out
}

/// `|q|` at each reached horizon along one direction, and the last `|q|`
/// when integration stopped at the cap.
fn one_sided(
    field: &VectorField,
    start: Point3,
    sign: f64,
    horizons: &[f64],
    cap: f64,
    opts: &FlowOptions,
) -> Result<(Vec<f64>, Option<f64>), FlowError> {
    let t_max = horizons.last().copied().unwrap_or(0.0);
    let traj = integrate_flow_until(field, FlowDirection::D3, start, sign * t_max, opts, |_, _, q| q.abs() > cap)?;
    let reached = traj.final_time().abs();
    let q = horizons
        .iter()
        .take_while(|&&t| t <= reached)
        .map(|&t| traj.interpolate(sign * t).map_or(traj.final_q(), |(_, q)| q).abs())
        .collect();
    Ok((q, traj.stopped_early.then(|| traj.final_q().abs())))
}

fn fit_growth(t: &[f64], i: &[f64]) -> Option<GrowthFit> {
    let n = t.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let aic = |rss: f64, k: f64| nf * (rss / nf).max(1e-300).ln() + 2.0 * k;
    let mean = i.iter().sum::<f64>() / nf;
    let rss0: f64 = i.iter().map(|v| (v - mean).powi(2)).sum();
    let linear = |x: &[f64]| -> (f64, f64, f64) {
        let mx = x.iter().sum::<f64>() / nf;
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(i).map(|(a, b)| (a - mx) * (b - mean)).sum();
        let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let a = mean - b * mx;
        let rss = x.iter().zip(i).map(|(xv, yv)| (yv - a - b * xv).powi(2)).sum();
        (a, b, rss)
    };
    let logs: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let (_, b_log, rss_log) = linear(&logs);
    let mut best_pow = (f64::INFINITY, 0.0, 0.0);
    for k in 1..=40 {
        let alpha = 0.05 * k as f64;
        let x: Vec<f64> = t.iter().map(|v| v.powf(alpha)).collect();
        let (_, b, rss) = linear(&x);
        if rss < best_pow.0 {
            best_pow = (rss, b, alpha);
        }
    }
    let candidates = [
        GrowthFit {
            model: GrowthModel::Constant,
            slope: 0.0,
            exponent: None,
            aic: aic(rss0, 1.0),
        },
        GrowthFit {
            model: GrowthModel::Log,
            slope: b_log,
            exponent: None,
            aic: aic(rss_log, 2.0),
        },
        GrowthFit {
            model: GrowthModel::Power,
            slope: best_pow.1,
            exponent: Some(best_pow.2),
            aic: aic(best_pow.0, 3.0),
        },
    ];
    candidates.into_iter().min_by(|a, b| a.aic.total_cmp(&b.aic))
}

fn classify(rec: &mut StartRecord, opts: &ScanOptions) {
    let Some(&last) = rec.integral.last() else {
        rec.verdict = Boundedness::Inconclusive;
        return;
    };
    if rec.capped || last > opts.cap {
        rec.verdict = Boundedness::Diverging;
        return;
    }
    let n = rec.horizons.len().min(rec.integral.len());
    let t_max = rec.horizons[n - 1];
    rec.fit = fit_growth(&rec.horizons[..n], &rec.integral[..n]);
    let complete = t_max >= opts.horizons.last().copied().unwrap_or(0.0);
    // the largest horizon at most a decade below T_max
    let decade = rec.horizons[..n].iter().rposition(|&t| t <= t_max / 10.0);
    let stalled = match decade {
        Some(k) => last - rec.integral[k] <= opts.stall_rel * last || last == 0.0,
        None => last == 0.0,
    };
    rec.verdict = if complete && stalled {
        Boundedness::Bounded
    } else if rec.fit.is_some_and(|f| f.model != GrowthModel::Constant && f.slope > 0.0) && last > opts.divergence_floor
    {
        Boundedness::Diverging
    } else {
        Boundedness::Inconclusive
    };
}

/// Scans `I(T)` from each start over the horizons, in parallel over starts.
pub fn boundedness_scan(field: &VectorField, starts: &[Point3], opts: &ScanOptions) -> BoundednessScan {
    let mut horizons = opts.horizons.clone();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    let records: Vec<StartRecord> = starts
        .par_iter()
        .map(|&start| {
            let mut rec = StartRecord {
                start,
                horizons: Vec::new(),
                integral: Vec::new(),
                capped: false,
                verdict: Boundedness::Inconclusive,
                fit: None,
                error: None,
            };
            let fwd = one_sided(field, start, 1.0, &horizons, opts.cap, &opts.flow);
            let bwd = one_sided(field, start, -1.0, &horizons, opts.cap, &opts.flow);
            let ((fv, fcap), (bv, bcap)) = match (fwd, bwd) {
                (Ok(f), Ok(b)) => (f, b),
                (Err(e), _) | (_, Err(e)) => {
                    rec.error = Some(e.to_string());
                    return rec;
                }
            };
            for (k, &t) in horizons.iter().enumerate() {
                let f = fv.get(k).copied().or(fcap);
                let b = bv.get(k).copied().or(bcap);
                let (Some(f), Some(b)) = (f, b) else { break };
                rec.horizons.push(t);
                rec.integral.push(f + b);
                if k >= fv.len() || k >= bv.len() {
                    // a lower bound past the cap
                    rec.capped = true;
                    break;
                }
            }
            classify(&mut rec, opts);
            rec
        })
        .collect();
    let any_div = records.iter().any(|r| r.verdict == Boundedness::Diverging);
    let all_bounded = !records.is_empty() && records.iter().all(|r| r.verdict == Boundedness::Bounded);
    let verdict = if any_div {
        Boundedness::Diverging
    } else if all_bounded {
        Boundedness::Bounded
    } else {
        Boundedness::Inconclusive
    };
    let slope = records
        .iter()
        .filter(|r| r.verdict == Boundedness::Diverging)
        .filter_map(|r| r.fit.map(|f| f.slope))
        .reduce(f64::max);
    BoundednessScan {
        records,
        verdict,
        cap: opts.cap,
        slope,
    }
}

impl BoundednessScan {
    /// JSON list of `{start, horizons, I, verdict}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict,
            "cap": self.cap,
            "slope": self.slope,
            "starts": self.records.iter().map(|r| serde_json::json!({
                "start": [r.start.x, r.start.y, r.start.z],
                "horizons": r.horizons,
                "I": r.integral,
                "capped": r.capped,
                "verdict": r.verdict,
                "error": r.error,
            })).collect::<Vec<_>>(),
        })
    }

    /// CSV with columns `start,T,I`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("start,T,I\n");
        for (k, r) in self.records.iter().enumerate() {
            for (t, i) in r.horizons.iter().zip(&r.integral) {
                out.push_str(&format!("{k},{},{}\n", fmt17(*t), fmt17(*i)));
            }
        }
        out
    }

    /// Starts whose integral diverges.
    pub fn witnesses(&self) -> Vec<Point3> {
        self.records
            .iter()
            .filter(|r| r.verdict == Boundedness::Diverging)
            .map(|r| r.start)
            .collect()
    }
}

/// Per-start table `(T, I)` as CSV.
pub fn record_csv(rec: &StartRecord) -> String {
    csv_table(&["T", "I"], rec.horizons.iter().zip(&rec.integral).map(|(t, i)| vec![*t, *i]))
}

/// `w_n(p) = (2n+1)^{-3} Σ_{|k|∞ ≤ n} w(p + k)`.
pub fn periodize_w(source: &dyn WSource, n: usize, p: Point3) -> Result<f64, RealizerError> {
    let n = n as i64;
    let mut points = vec![p];
    for kz in -n..=n {
        for ky in -n..=n {
            for kx in -n..=n {
                points.push(p + Vec3::new(kx as f64, ky as f64, kz as f64));
            }
        }
    }
    let w = source.w_cluster(p, &points)?;
    // averaging offsets from w(p) keeps periodic sources exact
    let center = w[0];
    let sum: f64 = w[1..].iter().map(|v| v - center).sum();
    Ok(center + sum / (w.len() - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TorusVerdict {
    RealizableInTorus,
    NotRealizable,
    Inconclusive,
}

impl fmt::Display for TorusVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TorusVerdict::RealizableInTorus => "RealizableInTorus",
            TorusVerdict::NotRealizable => "NotRealizable",
            TorusVerdict::Inconclusive => "Inconclusive",
        })
    }
}

/// Which implication of the torus criterion supports the verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionDirection {
    /// Realizability in the torus implies bounded integrals; used to refute.
    Necessary,
    /// Bounded integrals with the orthogonal-basis condition imply realizability.
    Sufficient,
    /// The product-field equivalence between bounded integrals and realizability.
    ProductEquivalence,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusReport {
    pub verdict: TorusVerdict,
    pub direction: CriterionDirection,
    pub scan_verdict: Boundedness,
    pub frobenius_ok: bool,
    pub basis_ok: bool,
    pub witnesses: Vec<Point3>,
    pub reason: String,
}

/// Combines the condition checks and the boundedness scan of a periodic field.
pub fn torus_verdict(field: &VectorField, scan: &BoundednessScan, conditions: &ConditionReport) -> TorusReport {
    let mut report = TorusReport {
        verdict: TorusVerdict::Inconclusive,
        direction: CriterionDirection::None,
        scan_verdict: scan.verdict,
        frobenius_ok: conditions.frobenius_ok,
        basis_ok: conditions.basis_ok,
        witnesses: Vec::new(),
        reason: String::new(),
    };
    if !field.periodicity().is_full() {
        report.reason = "field is not declared periodic in x, y and z".into();
        return report;
    }
    if !conditions.frobenius_ok {
        report.verdict = TorusVerdict::NotRealizable;
        report.direction = CriterionDirection::Necessary;
        report.reason = "Frobenius condition fails, so the field is not even locally realizable".into();
        return report;
    }
    match scan.verdict {
        Boundedness::Diverging => {
            report.verdict = TorusVerdict::NotRealizable;
            report.direction = CriterionDirection::Necessary;
            report.witnesses = scan.witnesses();
            report.reason = "the integral along the third flow is unbounded, which rules out a periodic conductivity".into();
        }
        Boundedness::Bounded if conditions.basis_ok => {
            report.verdict = TorusVerdict::RealizableInTorus;
            report.direction = CriterionDirection::Sufficient;
            report.reason = "bounded integrals with the orthogonal-basis condition".into();
        }
        Boundedness::Bounded if matches!(field.family(), FieldFamily::ProductFgh { unit_gh: true }) => {
            report.verdict = TorusVerdict::RealizableInTorus;
            report.direction = CriterionDirection::ProductEquivalence;
            report.reason = "bounded integrals for a product field with g = h = 1".into();
        }
        Boundedness::Bounded => {
            report.reason =
                "integrals are bounded but the orthogonal-basis condition fails, so only the necessary direction applies"
                    .into();
        }
        Boundedness::Inconclusive => {
            report.reason = "boundedness scan is inconclusive".into();
        }
    }
    report
}

/// A unit-cell box suitable for condition checks of periodic fields.
pub fn unit_cell() -> Aabb {
    Aabb::unit_cell()
}
