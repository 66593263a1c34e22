//! Vector fields on ℝ³, their differential operators, and the pointwise
//! conditions required for isotropic realizability.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Halton, Point3, Vec3};
use crate::optimize::nelder_mead3;

/// Default tolerance on the normalized Frobenius residual.
pub const DEFAULT_CONDITION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("non-finite {quantity} at {point}")]
    NonFiniteField {
        point: Point3,
        quantity: &'static str,
    },
    #[error("evaluation point {0} is not finite")]
    NonFinitePoint(Point3),
    #[error("field undefined at {point}: {message}")]
    Domain { point: Point3, message: String },
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

pub type VectorFn = Arc<dyn Fn(Point3) -> Result<Vec3, FieldError> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(Point3) -> Result<f64, FieldError> + Send + Sync>;

/// Lattice periodicity flags: `x: true` means invariance under `p ↦ p + e_x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Periodicity {
    #[serde(default)]
    pub x: bool,
    #[serde(default)]
    pub y: bool,
    #[serde(default)]
    pub z: bool,
}

impl Periodicity {
    pub const NONE: Periodicity = Periodicity {
        x: false,
        y: false,
        z: false,
    };
    pub const FULL: Periodicity = Periodicity {
        x: true,
        y: true,
        z: true,
    };

    /// Y-periodic with the unit cell `[0,1]³`.
    pub fn is_full(&self) -> bool {
        self.x && self.y && self.z
    }

    pub fn any(&self) -> bool {
        self.x || self.y || self.z
    }

    /// Lattice translation vectors `e_i` the field is declared invariant under.
    pub fn periods(&self) -> Vec<Vec3> {
        [(self.x, Vec3::EX), (self.y, Vec3::EY), (self.z, Vec3::EZ)]
            .into_iter()
            .filter_map(|(on, v)| on.then_some(v))
            .collect()
    }
}

/// Structural knowledge about a field that strengthens what the periodic
/// criteria can conclude.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFamily {
    #[default]
    Generic,
    /// `(g(y)h(z), f(x)h(z), f(x)g(y))`; `unit_gh` when `g = h = 1`.
    ProductFgh { unit_gh: bool },
    /// `α(z) ∇⊥v(x, y)`.
    Planar,
}

/// An immutable vector field `j` with optional closed-form curl and divergence.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    evaluator: VectorFn,
    analytic_curl: Option<VectorFn>,
    analytic_div: Option<ScalarFn>,
    periodicity: Periodicity,
    regularity_hint: String,
    family: FieldFamily,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("analytic_curl", &self.analytic_curl.is_some())
            .field("analytic_div", &self.analytic_div.is_some())
            .field("periodicity", &self.periodicity)
            .field("regularity_hint", &self.regularity_hint)
            .field("family", &self.family)
            .finish()
    }
}

impl VectorField {
    pub fn new(name: impl Into<String>, f: impl Fn(Point3) -> Vec3 + Send + Sync + 'static) -> Self {
        Self::fallible(name, move |p| Ok(f(p)))
    }

    pub fn fallible(
        name: impl Into<String>,
        f: impl Fn(Point3) -> Result<Vec3, FieldError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            evaluator: Arc::new(f),
            analytic_curl: None,
            analytic_div: None,
            periodicity: Periodicity::NONE,
            regularity_hint: "C2".to_string(),
            family: FieldFamily::Generic,
        }
    }

    /// The constant field `c`.
    pub fn constant(c: Vec3) -> Self {
        Self::new(format!("constant{c}"), move |_| c)
            .with_curl(|_| Vec3::ZERO)
            .with_div(|_| 0.0)
    }

    pub fn with_curl(self, f: impl Fn(Point3) -> Vec3 + Send + Sync + 'static) -> Self {
        self.with_fallible_curl(move |p| Ok(f(p)))
    }

    pub fn with_fallible_curl(
        mut self,
        f: impl Fn(Point3) -> Result<Vec3, FieldError> + Send + Sync + 'static,
    ) -> Self {
        self.analytic_curl = Some(Arc::new(f));
        self
    }

    pub fn with_div(mut self, f: impl Fn(Point3) -> f64 + Send + Sync + 'static) -> Self {
        self.analytic_div = Some(Arc::new(move |p| Ok(f(p))));
        self
    }

    pub fn with_periodicity(mut self, periodicity: Periodicity) -> Self {
        self.periodicity = periodicity;
        self
    }

    pub fn with_regularity(mut self, hint: impl Into<String>) -> Self {
        self.regularity_hint = hint.into();
        self
    }

    pub fn with_family(mut self, family: FieldFamily) -> Self {
        self.family = family;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Drops the closed-form curl and divergence so every derivative goes
    /// through finite differences.
    pub fn without_analytic_derivatives(mut self) -> Self {
        self.analytic_curl = None;
        self.analytic_div = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn periodicity(&self) -> Periodicity {
        self.periodicity
    }

    pub fn regularity_hint(&self) -> &str {
        &self.regularity_hint
    }

    pub fn family(&self) -> FieldFamily {
        self.family
    }

    pub fn has_analytic_curl(&self) -> bool {
        self.analytic_curl.is_some()
    }

    pub fn evaluate(&self, p: Point3) -> Result<Vec3, FieldError> {
        if !p.is_finite() {
            return Err(FieldError::NonFinitePoint(p));
        }
        let v = (self.evaluator)(p)?;
        if !v.is_finite() {
            return Err(FieldError::NonFiniteField {
                point: p,
                quantity: "field value",
            });
        }
        Ok(v)
    }

    /// `∂j_i/∂x_k` as `jac[i][k]`, by fourth-order central differences.
    pub fn jacobian_fd(&self, p: Point3, h: f64) -> Result<[[f64; 3]; 3], FieldError> {
        check_step(h)?;
        let mut jac = [[0.0; 3]; 3];
        for k in 0..3 {
            let d = central_diff4(|q| self.evaluate(q), p, Vec3::axis(k), h)?;
            for i in 0..3 {
                jac[i][k] = d[i];
            }
        }
        Ok(jac)
    }

    /// Curl by fourth-order central differences, ignoring any closed form.
    pub fn fd_curl(&self, p: Point3, h: f64) -> Result<Vec3, FieldError> {
        let j = self.jacobian_fd(p, h)?;
        finite_or(
            Vec3::new(j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]),
            p,
            "curl",
        )
    }

    /// Divergence by fourth-order central differences, ignoring any closed form.
    pub fn fd_divergence(&self, p: Point3, h: f64) -> Result<f64, FieldError> {
        let j = self.jacobian_fd(p, h)?;
        let d = j[0][0] + j[1][1] + j[2][2];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(FieldError::NonFiniteField {
                point: p,
                quantity: "divergence",
            })
        }
    }

    /// Closed-form curl when attached, otherwise finite differences with step `h`.
    pub fn curl(&self, p: Point3, h: f64) -> Result<Vec3, FieldError> {
        match &self.analytic_curl {
            Some(c) => {
                if !p.is_finite() {
                    return Err(FieldError::NonFinitePoint(p));
                }
                finite_or(c(p)?, p, "curl")
            }
            None => self.fd_curl(p, h),
        }
    }

    /// Curl with the default step `1e-3 · max(1, |p|∞)`.
    pub fn curl_at(&self, p: Point3) -> Result<Vec3, FieldError> {
        self.curl(p, default_step(p))
    }

    pub fn divergence(&self, p: Point3, h: f64) -> Result<f64, FieldError> {
        match &self.analytic_div {
            Some(d) => {
                if !p.is_finite() {
                    return Err(FieldError::NonFinitePoint(p));
                }
                let v = d(p)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(FieldError::NonFiniteField {
                        point: p,
                        quantity: "divergence",
                    })
                }
            }
            None => self.fd_divergence(p, h),
        }
    }

    pub fn divergence_at(&self, p: Point3) -> Result<f64, FieldError> {
        self.divergence(p, default_step(p))
    }

    /// Largest `|j(p + k) − j(p)|∞` over the declared lattice periods and the given points.
    pub fn periodicity_defect(&self, points: &[Point3]) -> Result<f64, FieldError> {
        let mut worst = 0.0f64;
        for &p in points {
            let base = self.evaluate(p)?;
            for k in self.periodicity.periods() {
                for shifted in [p + k, p - k] {
                    worst = worst.max((self.evaluate(shifted)? - base).norm_inf());
                }
            }
        }
        Ok(worst)
    }
}

fn check_step(h: f64) -> Result<(), FieldError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(FieldError::InvalidStep(h))
    }
}

fn finite_or(v: Vec3, p: Point3, quantity: &'static str) -> Result<Vec3, FieldError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FieldError::NonFiniteField { point: p, quantity })
    }
}

/// Default finite-difference step at `p`.
pub fn default_step(p: Point3) -> f64 {
    1e-3 * p.norm_inf().max(1.0)
}

/// Fourth-order central difference of a vector-valued map along `dir`.
pub fn central_diff4<E>(
    mut f: impl FnMut(Point3) -> Result<Vec3, E>,
    p: Point3,
    dir: Vec3,
    h: f64,
) -> Result<Vec3, E> {
    let fp2 = f(p + dir * (2.0 * h))?;
    let fp1 = f(p + dir * h)?;
    let fm1 = f(p - dir * h)?;
    let fm2 = f(p - dir * (2.0 * h))?;
    Ok(((fp1 - fm1) * 8.0 - (fp2 - fm2)) / (12.0 * h))
}

/// Fourth-order central-difference gradient of a scalar map.
pub fn fd_gradient<E>(mut f: impl FnMut(Point3) -> Result<f64, E>, p: Point3, h: f64) -> Result<Vec3, E> {
    let mut g = [0.0; 3];
    for (k, gk) in g.iter_mut().enumerate() {
        let e = Vec3::axis(k);
        let fp2 = f(p + e * (2.0 * h))?;
        let fp1 = f(p + e * h)?;
        let fm1 = f(p - e * h)?;
        let fm2 = f(p - e * (2.0 * h))?;
        *gk = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
    }
    Ok(Vec3::from_array(g))
}

/// Normalized Frobenius residual `|j·c| / (|j||c|)`, zero when `c = 0`.
pub fn normalized_frobenius(j: Vec3, c: Vec3) -> f64 {
    let nj = j.norm();
    let nc = c.norm();
    if nc == 0.0 || nj == 0.0 {
        0.0
    } else {
        j.dot(c).abs() / (nj * nc)
    }
}

/// Tunables for [`check_conditions_with`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionOptions {
    /// Bound on the normalized Frobenius residual.
    pub tol: f64,
    /// `|j|` and `|curl j|` must stay above this floor for the basis condition.
    pub norm_floor: f64,
    /// Offset into the Halton sequence.
    pub seed: u64,
    /// Number of smallest-norm samples refined by local minimization.
    pub refine_starts: usize,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_CONDITION_TOL,
            norm_floor: DEFAULT_CONDITION_TOL,
            seed: 0,
            refine_starts: 4,
        }
    }
}

/// Residuals of the divergence, Frobenius and orthogonal-basis conditions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub div_residual: f64,
    pub frobenius_residual: f64,
    pub min_j_norm: f64,
    pub min_curl_norm: f64,
    pub frobenius_ok: bool,
    pub basis_ok: bool,
    pub samples: usize,
    pub region: Aabb,
    pub tolerance: f64,
    pub norm_floor: f64,
    /// Where `|j|` is smallest (after local refinement).
    pub min_j_point: Point3,
    /// Where `|curl j|` is smallest (after local refinement).
    pub min_curl_point: Point3,
    pub worst_frobenius_point: Point3,
    pub failed_samples: usize,
    pub first_failure: Option<String>,
}

/// Checks `div j = 0`, `j · curl j = 0` and the orthogonal-basis condition
/// on `n_samples` Halton points of `region`.
pub fn check_conditions(field: &VectorField, region: &Aabb, n_samples: usize, tol: f64) -> ConditionReport {
    check_conditions_with(
        field,
        region,
        n_samples,
        &ConditionOptions {
            tol,
            ..ConditionOptions::default()
        },
    )
}

pub fn check_conditions_with(
    field: &VectorField,
    region: &Aabb,
    n_samples: usize,
    opts: &ConditionOptions,
) -> ConditionReport {
    let n_samples = n_samples.max(1);
    let points = Halton::sample(region, n_samples, opts.seed);

    let mut div_residual = 0.0f64;
    let mut frob = 0.0f64;
    let mut worst_frob_point = points[0];
    let mut failed = 0usize;
    let mut first_failure = None;
    // (norm, point) of evaluated samples, for the refinement seeds
    let mut j_norms = Vec::with_capacity(n_samples);
    let mut c_norms = Vec::with_capacity(n_samples);

    for &p in &points {
        let eval = (|| -> Result<(Vec3, Vec3, f64), FieldError> {
            let j = field.evaluate(p)?;
            let c = field.curl_at(p)?;
            let d = field.divergence_at(p)?;
            Ok((j, c, d))
        })();
        match eval {
            Ok((j, c, d)) => {
                div_residual = div_residual.max(d.abs());
                let r = normalized_frobenius(j, c);
                if r > frob {
                    frob = r;
                    worst_frob_point = p;
                }
                j_norms.push((j.norm(), p));
                c_norms.push((c.norm(), p));
            }
            Err(e) => {
                failed += 1;
                if first_failure.is_none() {
                    first_failure = Some(e.to_string());
                }
            }
        }
    }

    let (min_j_norm, min_j_point) = refine_minimum(region, &mut j_norms, opts.refine_starts, |p| {
        field.evaluate(p).map(|v| v.norm())
    });
    let (min_curl_norm, min_curl_point) = refine_minimum(region, &mut c_norms, opts.refine_starts, |p| {
        field.curl_at(p).map(|v| v.norm())
    });

    let frobenius_ok = failed == 0 && frob <= opts.tol;
    let basis_ok = frobenius_ok && min_j_norm > opts.norm_floor && min_curl_norm > opts.norm_floor;
    ConditionReport {
        div_residual,
        frobenius_residual: frob,
        min_j_norm,
        min_curl_norm,
        frobenius_ok,
        basis_ok,
        samples: n_samples,
        region: *region,
        tolerance: opts.tol,
        norm_floor: opts.norm_floor,
        min_j_point,
        min_curl_point,
        worst_frobenius_point: worst_frob_point,
        failed_samples: failed,
        first_failure,
    }
}

/// Minimum of `norm` over the samples, polished by Nelder–Mead on `norm²`
/// from the `starts` smallest samples (clamped to `region`).
fn refine_minimum(
    region: &Aabb,
    samples: &mut [(f64, Point3)],
    starts: usize,
    norm: impl Fn(Point3) -> Result<f64, FieldError>,
) -> (f64, Point3) {
    if samples.is_empty() {
        return (f64::NAN, region.center());
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = samples[0];
    let scale = 0.05 * region.extent().norm_inf().max(1e-12);
    for &(_, p0) in samples.iter().take(starts) {
        let objective = |u: [f64; 3]| {
            let q = region.clamp(Vec3::from_array(u));
            match norm(q) {
                Ok(v) => v * v,
                Err(_) => f64::INFINITY,
            }
        };
        let (u, _) = nelder_mead3(objective, p0.to_array(), scale, 1e-30, 600);
        let q = region.clamp(Vec3::from_array(u));
        if let Ok(v) = norm(q) {
            if v < best.0 {
                best = (v, q);
            }
        }
    }
    best
}
