//! Field sources, boxes and the shared run configuration.

use std::path::PathBuf;

use clap::Args;
use realizer_core::catalog::{self, CatalogEntry, SinhGauge};
use realizer_core::dsl::{compile_field, parse_expr, FieldSpec, Var};
use realizer_core::flows::Normalization;
use realizer_core::func1d::Func1D;
use realizer_core::{Aabb, Point3, Vec3, VectorField};

use crate::error::CliError;

#[derive(Args, Debug, Clone, Default)]
pub struct FieldArgs {
    /// Built-in example (see `examples list`).
    #[arg(long, value_name = "NAME")]
    pub example: Option<String>,
    /// Inline field `(jx, jy, jz)` in x, y, z.
    #[arg(long, value_name = "TUPLE", allow_hyphen_values = true)]
    pub field: Option<String>,
    /// JSON field file with keys jx, jy, jz and optional curl, periodic.
    #[arg(long, value_name = "PATH")]
    pub field_file: Option<PathBuf>,
    /// f(x) of the product example.
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub f: Option<String>,
    /// g(y) of the product example.
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub g: Option<String>,
    /// h(z) of the product example.
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub h: Option<String>,
    /// Gauge of the sinh-family example: `flow`, `log-atan`, or an expression
    /// in x standing for t (accepted but flagged unverified).
    #[arg(long, value_name = "GAUGE", allow_hyphen_values = true)]
    pub gauge: Option<String>,
}

/// Where the field comes from; exactly one per run.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Example(String),
    Inline(String),
    File(PathBuf),
}

/// A resolved field with the catalog metadata when it came from an example.
pub struct ResolvedField {
    pub name: String,
    pub field: VectorField,
    pub entry: Option<CatalogEntry>,
}

impl ResolvedField {
    /// Condition-check box: the entry's region, else `[−1, 1]³`.
    pub fn default_region(&self) -> Aabb {
        self.entry.as_ref().map_or(Aabb::cube(-1.0, 1.0), |e| e.region)
    }
}

/// Everything a subcommand needs besides its own switches.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: FieldSource,
    pub region: Option<Aabb>,
    pub tol: f64,
    pub anchor: Option<Point3>,
    pub out: Option<PathBuf>,
    pub normalization: Normalization,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(field: &FieldArgs, tol: f64) -> Result<Self, CliError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::usage(format!("tolerance must be positive, got {tol}")));
        }
        Ok(Self {
            source: field.source()?,
            region: None,
            tol,
            anchor: None,
            out: None,
            normalization: Normalization::Standard,
            seed: 0,
        })
    }
}

impl FieldArgs {
    pub fn source(&self) -> Result<FieldSource, CliError> {
        let mut found = Vec::new();
        if let Some(n) = &self.example {
            found.push(FieldSource::Example(n.clone()));
        }
        if let Some(t) = &self.field {
            found.push(FieldSource::Inline(t.clone()));
        }
        if let Some(p) = &self.field_file {
            found.push(FieldSource::File(p.clone()));
        }
        match found.len() {
            1 => Ok(found.pop().unwrap()),
            0 => Err(CliError::usage("no field given: pass one of --example, --field, --field-file")),
            _ => Err(CliError::usage("pass exactly one of --example, --field, --field-file")),
        }
    }

    pub fn resolve(&self, source: &FieldSource) -> Result<ResolvedField, CliError> {
        if !matches!(source, FieldSource::Example(_)) && (self.f.is_some() || self.g.is_some() || self.h.is_some()) {
            return Err(CliError::usage("--f, --g and --h apply to the fgh example only"));
        }
        match source {
            FieldSource::Example(name) => self.example_entry(name).map(|e| ResolvedField {
                name: e.name.clone(),
                field: e.field.clone(),
                entry: Some(e),
            }),
            FieldSource::Inline(text) => {
                let spec = FieldSpec::from_tuple(text).map_err(|e| CliError::usage(format!("--field: {e}")))?;
                Ok(ResolvedField {
                    name: "inline".into(),
                    field: compile_field(&spec, "inline"),
                    entry: None,
                })
            }
            FieldSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
                let spec = FieldSpec::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                let name = path.file_stem().map_or("file".into(), |s| s.to_string_lossy().into_owned());
                Ok(ResolvedField {
                    field: compile_field(&spec, name.clone()),
                    name,
                    entry: None,
                })
            }
        }
    }

    fn example_entry(&self, name: &str) -> Result<CatalogEntry, CliError> {
        let product = matches!(name, "fgh" | "fgh-vanishing");
        if !product && (self.f.is_some() || self.g.is_some() || self.h.is_some()) {
            return Err(CliError::usage("--f, --g and --h apply to the fgh example only"));
        }
        if name != "sinh-family" && self.gauge.is_some() {
            return Err(CliError::usage("--gauge applies to the sinh-family example only"));
        }
        if product && (self.f.is_some() || self.g.is_some() || self.h.is_some()) {
            let default_f = if name == "fgh" { catalog::shifted_sine_f() } else { catalog::sine_f() };
            let f = component(self.f.as_deref(), Var::X, "--f")?.unwrap_or(default_f);
            let g = component(self.g.as_deref(), Var::Y, "--g")?.unwrap_or_else(Func1D::one);
            let h = component(self.h.as_deref(), Var::Z, "--h")?.unwrap_or_else(Func1D::one);
            return Ok(catalog::fgh_entry(f, g, h));
        }
        if name == "sinh-family" {
            let gauge = match self.gauge.as_deref() {
                None | Some("flow") => SinhGauge::flow(),
                Some("log-atan") => SinhGauge::log_atan(),
                Some(expr) => {
                    let e = parse_expr(expr).map_err(|e| CliError::usage(format!("--gauge: {e}")))?;
                    SinhGauge::user(Func1D::from_expr(&e, Var::X))
                }
            };
            return Ok(catalog::sinh_family_entry(gauge));
        }
        catalog::find(name).ok_or_else(|| {
            let names: Vec<String> = catalog::catalog().into_iter().map(|e| e.name).collect();
            CliError::usage(format!("unknown example '{name}' (known: {})", names.join(", ")))
        })
    }
}

fn component(src: Option<&str>, var: Var, flag: &str) -> Result<Option<Func1D>, CliError> {
    let Some(src) = src else { return Ok(None) };
    let e = parse_expr(src).map_err(|e| CliError::usage(format!("{flag}: {e}")))?;
    let others = [Var::X, Var::Y, Var::Z].into_iter().filter(|v| *v != var);
    if others.into_iter().any(|v| e.uses(v)) {
        return Err(CliError::usage(format!("{flag} must depend on {} only", var_name(var))));
    }
    Ok(Some(Func1D::from_expr(&e, var)))
}

fn var_name(v: Var) -> &'static str {
    match v {
        Var::X => "x",
        Var::Y => "y",
        Var::Z => "z",
    }
}

fn numbers(text: &str, n: usize, what: &str) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| format!("{what}: {e}"))?;
    if vals.len() != n {
        return Err(format!("{what}: expected {n} comma-separated numbers, got {}", vals.len()));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(format!("{what}: values must be finite"));
    }
    Ok(vals)
}

/// `x0,x1,y0,y1,z0,z1` with `lo < hi` on every axis.
pub fn parse_box(text: &str) -> Result<Aabb, String> {
    let v = numbers(text, 6, "box")?;
    if v[0] >= v[1] || v[2] >= v[3] || v[4] >= v[5] {
        return Err("box: each lower bound must be below its upper bound".into());
    }
    Ok(Aabb::from_bounds([v[0], v[1], v[2], v[3], v[4], v[5]]))
}

/// `x,y,z`.
pub fn parse_point(text: &str) -> Result<Point3, String> {
    let v = numbers(text, 3, "point")?;
    Ok(Vec3::new(v[0], v[1], v[2]))
}

/// `x,y`.
pub fn parse_point2(text: &str) -> Result<[f64; 2], String> {
    let v = numbers(text, 2, "point")?;
    Ok([v[0], v[1]])
}

/// Comma-separated increasing positive horizons.
pub fn parse_horizons(text: &str) -> Result<Vec<f64>, String> {
    let v: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let v = v.map_err(|e| format!("horizons: {e}"))?;
    if v.is_empty() || v.iter().any(|t| !(*t > 0.0 && t.is_finite())) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err("horizons: expected increasing positive numbers".into());
    }
    Ok(v)
}
