//! Log-conductivity `w` by quadrature along the third flow, and residual
//! certificates for a candidate `σ = e^w`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::csv_table;
use crate::field::{default_step, FieldError, VectorField};
use crate::flows::{
    forward_map_with, invert_coordinates, invert_near, inversion_candidates, FlowError, FlowOptions,
    InversionOptions, Normalization, TripleCoordinates,
};
use crate::geometry::{Aabb, Point3, Vec3};

pub use crate::flows::Inversion;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealizerError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("w undefined at {point}: {message}")]
    Source { point: Point3, message: String },
}

/// `w` at a point together with the coordinates it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogConductivitySample {
    pub point: Point3,
    pub coords: TripleCoordinates,
    pub w: f64,
    pub normalization: Normalization,
    /// Inversion residual `|X₃₂(coords) − point|∞` (zero for forward evaluation).
    pub residual: f64,
    /// Condition number of the coordinate Jacobian, when an inversion was run.
    pub jacobian_condition: Option<f64>,
}

impl LogConductivitySample {
    pub fn sigma(&self) -> f64 {
        self.w.exp()
    }
}

/// `w(X₃₂(t₃,t₂,t₁))`: the quadrature accumulated along the third leg.
pub fn compute_w(
    field: &VectorField,
    coords: &TripleCoordinates,
    normalization: Normalization,
    opts: &FlowOptions,
) -> Result<LogConductivitySample, FlowError> {
    let (point, w) = forward_map_with(field, coords, normalization, opts)?;
    Ok(LogConductivitySample {
        point,
        coords: *coords,
        w,
        normalization,
        residual: 0.0,
        jacobian_condition: None,
    })
}

fn sample_from(point: Point3, inv: &Inversion, normalization: Normalization) -> LogConductivitySample {
    LogConductivitySample {
        point,
        coords: inv.coords,
        w: inv.w,
        normalization,
        residual: inv.residual,
        jacobian_condition: Some(inv.jacobian_condition),
    }
}

fn with_normalization(opts: &InversionOptions, normalization: Normalization) -> InversionOptions {
    InversionOptions {
        normalization,
        ..opts.clone()
    }
}

/// `w` at `p` after inverting the triple-flow coordinates anchored at `x0`.
pub fn w_at_point(
    field: &VectorField,
    x0: Point3,
    p: Point3,
    normalization: Normalization,
    opts: &InversionOptions,
) -> Result<LogConductivitySample, FlowError> {
    let opts = with_normalization(opts, normalization);
    let inv = invert_coordinates(field, x0, p, None, &opts)?;
    Ok(sample_from(p, &inv, normalization))
}

/// `w` for every distinct coordinate solution of `p`; more than one entry
/// means the coordinate map is not injective there.
pub fn w_candidates(
    field: &VectorField,
    x0: Point3,
    p: Point3,
    normalization: Normalization,
    opts: &InversionOptions,
) -> Vec<LogConductivitySample> {
    let opts = with_normalization(opts, normalization);
    inversion_candidates(field, x0, p, &opts)
        .iter()
        .map(|inv| sample_from(p, inv, normalization))
        .collect()
}

/// `σ = e^w` at `p`.
pub fn conductivity_at(
    field: &VectorField,
    x0: Point3,
    p: Point3,
    normalization: Normalization,
    opts: &InversionOptions,
) -> Result<f64, FlowError> {
    Ok(w_at_point(field, x0, p, normalization, opts)?.w.exp())
}

/// A source of log-conductivity values.
pub trait WSource: Sync {
    fn w(&self, p: Point3) -> Result<f64, RealizerError>;

    /// Values at points clustered around `center`; implementations may share
    /// work between them.
    fn w_cluster(&self, center: Point3, points: &[Point3]) -> Result<Vec<f64>, RealizerError> {
        let _ = center;
        points.iter().map(|&p| self.w(p)).collect()
    }
}

/// Wraps a closed-form `w`.
pub struct ClosedFormW<F>(pub F);

impl<F: Fn(Point3) -> f64 + Sync> WSource for ClosedFormW<F> {
    fn w(&self, p: Point3) -> Result<f64, RealizerError> {
        let v = (self.0)(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(RealizerError::Source {
                point: p,
                message: format!("non-finite value {v}"),
            })
        }
    }
}

/// `w` reconstructed by coordinate inversion and quadrature.
pub struct ReconstructedW<'a> {
    pub field: &'a VectorField,
    pub x0: Point3,
    pub normalization: Normalization,
    pub opts: InversionOptions,
}

impl<'a> ReconstructedW<'a> {
    pub fn new(field: &'a VectorField, x0: Point3, normalization: Normalization) -> Self {
        Self {
            field,
            x0,
            normalization,
            opts: with_normalization(&InversionOptions::default(), normalization),
        }
    }

    pub fn with_options(mut self, opts: InversionOptions) -> Self {
        self.opts = with_normalization(&opts, self.normalization);
        self
    }

    pub fn sample(&self, p: Point3) -> Result<LogConductivitySample, FlowError> {
        let inv = invert_coordinates(self.field, self.x0, p, None, &self.opts)?;
        Ok(sample_from(p, &inv, self.normalization))
    }
}

impl WSource for ReconstructedW<'_> {
    fn w(&self, p: Point3) -> Result<f64, RealizerError> {
        Ok(self.sample(p)?.w)
    }

    /// Inverts by continuation: points in order of distance from `center`,
    /// each starting from the closest point already solved.
    fn w_cluster(&self, center: Point3, points: &[Point3]) -> Result<Vec<f64>, RealizerError> {
        let base = invert_coordinates(self.field, self.x0, center, None, &self.opts)?;
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| (points[a] - center).norm().total_cmp(&(points[b] - center).norm()));
        let mut solved = vec![(center, base)];
        let mut w = vec![0.0; points.len()];
        for i in order {
            let p = points[i];
            let (q, near) = solved
                .iter()
                .min_by(|a, b| (a.0 - p).norm().total_cmp(&(b.0 - p).norm()))
                .expect("center is solved");
            if *q == p {
                w[i] = near.w;
                continue;
            }
            let inv = invert_near(self.field, p, near, &self.opts)?;
            w[i] = inv.w;
            solved.push((p, inv));
        }
        Ok(w)
    }
}

/// Per-point residuals of the realizability identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub point: Point3,
    pub w: f64,
    pub grad_w: Vec3,
    /// `|curl(e^{−w} j)| = e^{−w} |curl j − ∇w × j|`
    pub curl_residual: f64,
    /// `|∇w · curl j|`
    pub curl_alignment: f64,
    /// `|∇w · (j × curl j)/|j|² − |curl j|²/|j|²|`
    pub third_leg_rate: f64,
}

/// Grid verification of `curl(e^{−w} j) = 0` and the directional identities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_curl_residual: f64,
    pub mean_curl_residual: f64,
    pub max_curl_alignment: f64,
    pub max_third_leg_rate: f64,
    pub worst_point: Option<Point3>,
    pub region: Aabb,
    pub grid_n: usize,
    pub fd_step: f64,
    pub points: usize,
    pub failed: usize,
    /// Up to ten failure messages, in grid order.
    pub failures: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<Result<PointResidual, RealizerError>>,
}

impl ResidualReport {
    pub fn failed_fraction(&self) -> f64 {
        if self.points == 0 {
            0.0
        } else {
            self.failed as f64 / self.points as f64
        }
    }

    /// CSV with columns `x,y,z,w,sigma`; failed points carry `NaN`.
    pub fn sigma_csv(&self) -> String {
        let lattice = self.region.lattice(self.grid_n);
        csv_table(
            &["x", "y", "z", "w", "sigma"],
            lattice.iter().zip(&self.samples).map(|(p, s)| {
                let w = s.as_ref().map_or(f64::NAN, |r| r.w);
                vec![p.x, p.y, p.z, w, w.exp()]
            }),
        )
    }
}

fn stencil(p: Point3, h: f64) -> Vec<Point3> {
    let mut pts = vec![p];
    for k in 0..3 {
        let e = Vec3::axis(k);
        pts.extend([p + e * (2.0 * h), p + e * h, p - e * h, p - e * (2.0 * h)]);
    }
    pts
}

/// Residuals at one point using `w` on the 13-point stencil of step `h`.
pub fn point_residual(
    field: &VectorField,
    w_source: &dyn WSource,
    p: Point3,
    h: f64,
) -> Result<PointResidual, RealizerError> {
    let pts = stencil(p, h);
    let vals = w_source.w_cluster(p, &pts)?;
    let w = vals[0];
    let mut g = [0.0; 3];
    for (k, gk) in g.iter_mut().enumerate() {
        let v = &vals[1 + 4 * k..5 + 4 * k];
        *gk = (8.0 * (v[1] - v[2]) - (v[0] - v[3])) / (12.0 * h);
    }
    let grad_w = Vec3::from_array(g);
    let j = field.evaluate(p)?;
    let c = field.curl(p, default_step(p))?;
    let nj2 = j.norm_squared();
    let third_leg_rate = if nj2 > 0.0 {
        (grad_w.dot(j.cross(c)) / nj2 - c.norm_squared() / nj2).abs()
    } else {
        f64::NAN
    };
    Ok(PointResidual {
        point: p,
        w,
        grad_w,
        curl_residual: (-w).exp() * (c - grad_w.cross(j)).norm(),
        curl_alignment: grad_w.dot(c).abs(),
        third_leg_rate,
    })
}

/// Checks `curl(e^{−w} j) = 0`, `∇w·curl j = 0` and
/// `∇w·(j × curl j)/|j|² = |curl j|²/|j|²` on a `grid_n³` lattice of `region`,
/// with `∇w` from fourth-order central differences of step `h`.
pub fn verify_residuals(
    field: &VectorField,
    w_source: &dyn WSource,
    region: &Aabb,
    grid_n: usize,
    h: f64,
) -> ResidualReport {
    let lattice = region.lattice(grid_n);
    let samples: Vec<Result<PointResidual, RealizerError>> = lattice
        .par_iter()
        .map(|&p| point_residual(field, w_source, p, h))
        .collect();
    summarize(samples, region, grid_n, h)
}

fn summarize(
    samples: Vec<Result<PointResidual, RealizerError>>,
    region: &Aabb,
    grid_n: usize,
    h: f64,
) -> ResidualReport {
    let mut max_curl = 0.0f64;
    let mut sum_curl = 0.0;
    let mut max_align = 0.0f64;
    let mut max_rate = 0.0f64;
    let mut worst = None;
    let mut ok = 0usize;
    let mut failures = Vec::new();
    for s in &samples {
        match s {
            Ok(r) => {
                ok += 1;
                sum_curl += r.curl_residual;
                // NaN residuals count as failures of the bound
                if r.curl_residual > max_curl || r.curl_residual.is_nan() {
                    max_curl = if r.curl_residual.is_nan() { f64::INFINITY } else { r.curl_residual };
                    worst = Some(r.point);
                }
                max_align = max_align.max(r.curl_alignment);
                max_rate = max_rate.max(r.third_leg_rate);
            }
            Err(e) => {
                if failures.len() < 10 {
                    failures.push(e.to_string());
                }
            }
        }
    }
    ResidualReport {
        max_curl_residual: max_curl,
        mean_curl_residual: if ok > 0 { sum_curl / ok as f64 } else { f64::NAN },
        max_curl_alignment: max_align,
        max_third_leg_rate: max_rate,
        worst_point: worst,
        region: *region,
        grid_n,
        fd_step: h,
        points: samples.len(),
        failed: samples.len() - ok,
        failures,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinh_field() -> VectorField {
        VectorField::new("sinh", |p| Vec3::new(1.0, p.x.sinh(), 0.0)).with_curl(|p| Vec3::new(0.0, 0.0, p.x.cosh()))
    }

    #[test]
    fn w_vanishes_without_third_leg() {
        let f = sinh_field();
        let s = compute_w(
            &f,
            &TripleCoordinates::new(Vec3::new(0.0, 1.0, 0.0), 0.7, -0.4, 0.0),
            Normalization::Standard,
            &FlowOptions::default(),
        )
        .unwrap();
        assert_eq!(s.w, 0.0);
    }

    #[test]
    fn sinh_w_equals_third_time() {
        let f = sinh_field();
        let c = TripleCoordinates::new(Vec3::new(0.0, 1.0, 0.0), 0.5, 0.3, -1.2);
        for n in [Normalization::Standard, Normalization::Tilde] {
            let s = compute_w(&f, &c, n, &FlowOptions::default()).unwrap();
            assert!((s.w + 1.2).abs() < 1e-7, "{n}: {}", s.w);
        }
    }

    #[test]
    fn constant_w_has_zero_gradient_and_flags_non_gradient_fields() {
        let f = VectorField::constant(Vec3::new(0.0, 0.0, 2.0));
        let r = verify_residuals(&f, &ClosedFormW(|_| 0.3), &Aabb::unit_cell(), 3, 1e-3);
        assert_eq!(r.points, 27);
        assert_eq!(r.failed, 0);
        assert!(r.max_curl_residual < 1e-12);

        let rot = VectorField::new("rot", |p| Vec3::new(-p.y, p.x, 0.0));
        let r = verify_residuals(&rot, &ClosedFormW(|_| 0.0), &Aabb::unit_cell(), 3, 1e-3);
        assert!((r.max_curl_residual - 2.0).abs() < 1e-6);
    }

    #[test]
    fn sigma_csv_layout() {
        let f = VectorField::constant(Vec3::EX);
        let r = verify_residuals(&f, &ClosedFormW(|p: Point3| p.x), &Aabb::unit_cell(), 2, 1e-3);
        let csv = r.sigma_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,z,w,sigma");
        assert_eq!(lines.len(), 9);
    }

    #[test]
    fn failing_source_is_counted() {
        let f = VectorField::constant(Vec3::EX);
        let r = verify_residuals(&f, &ClosedFormW(|p: Point3| (p.x - 0.5).ln()), &Aabb::unit_cell(), 3, 1e-3);
        assert!(r.failed > 0);
        assert!(!r.failures.is_empty());
    }
}
