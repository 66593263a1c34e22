//! Arithmetic expressions over `x, y, z` and field specifications built
//! from them.

mod expr;
mod lexer;
mod parser;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, Periodicity, VectorField};
use crate::geometry::{Point3, Vec3};

pub use expr::{BinOp, Constant, EvalError, Expr, Func, Var};
pub use parser::{parse_expr, parse_tuple3};

/// Parse failure at byte `offset` of the source.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: Vec<String>,
}

impl SyntaxError {
    pub(crate) fn new(offset: usize, expected: &[&str]) -> Self {
        Self {
            offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at byte {}: expected {}",
            self.offset,
            self.expected.join(" or ")
        )
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{component}: {source}")]
    Syntax {
        component: String,
        #[source]
        source: SyntaxError,
    },
    #[error("invalid field file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("curl must have exactly 3 components, got {0}")]
    CurlArity(usize),
}

/// Three component expressions plus optional analytic curl and periodicity.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub jx: Expr,
    pub jy: Expr,
    pub jz: Expr,
    pub curl: Option<[Expr; 3]>,
    pub periodic: Periodicity,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    jx: String,
    jy: String,
    jz: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    curl: Option<Vec<String>>,
    #[serde(default)]
    periodic: Periodicity,
}

fn parse_component(name: &str, src: &str) -> Result<Expr, SpecError> {
    parse_expr(src).map_err(|source| SpecError::Syntax {
        component: name.to_string(),
        source,
    })
}

impl FieldSpec {
    pub fn new(jx: Expr, jy: Expr, jz: Expr) -> Self {
        Self {
            jx,
            jy,
            jz,
            curl: None,
            periodic: Periodicity::NONE,
        }
    }

    pub fn from_strs(jx: &str, jy: &str, jz: &str) -> Result<Self, SpecError> {
        Ok(Self::new(
            parse_component("jx", jx)?,
            parse_component("jy", jy)?,
            parse_component("jz", jz)?,
        ))
    }

    /// Inline form `(jx, jy, jz)`.
    pub fn from_tuple(src: &str) -> Result<Self, SpecError> {
        let [a, b, c] = parse_tuple3(src).map_err(|source| SpecError::Syntax {
            component: "field".to_string(),
            source,
        })?;
        Ok(Self::new(a, b, c))
    }

    /// JSON object with keys `jx, jy, jz` and optional `curl`, `periodic`.
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let raw: RawSpec = serde_json::from_str(text)?;
        let mut spec = Self::from_strs(&raw.jx, &raw.jy, &raw.jz)?;
        if let Some(curl) = raw.curl {
            if curl.len() != 3 {
                return Err(SpecError::CurlArity(curl.len()));
            }
            spec.curl = Some([
                parse_component("curl[0]", &curl[0])?,
                parse_component("curl[1]", &curl[1])?,
                parse_component("curl[2]", &curl[2])?,
            ]);
        }
        spec.periodic = raw.periodic;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let raw = RawSpec {
            jx: self.jx.to_string(),
            jy: self.jy.to_string(),
            jz: self.jz.to_string(),
            curl: self
                .curl
                .as_ref()
                .map(|c| c.iter().map(|e| e.to_string()).collect()),
            periodic: self.periodic,
        };
        serde_json::to_string_pretty(&raw).expect("spec serializes")
    }

    pub fn with_curl(mut self, curl: [Expr; 3]) -> Self {
        self.curl = Some(curl);
        self
    }

    pub fn with_periodicity(mut self, periodic: Periodicity) -> Self {
        self.periodic = periodic;
        self
    }
}

fn eval3(e: &[Expr; 3], p: Point3) -> Result<Vec3, FieldError> {
    let ev = |x: &Expr| {
        x.eval(p).map_err(|err| FieldError::Domain {
            point: p,
            message: err.to_string(),
        })
    };
    Ok(Vec3::new(ev(&e[0])?, ev(&e[1])?, ev(&e[2])?))
}

/// Builds the field; domain errors surface when it is evaluated.
pub fn compile_field(spec: &FieldSpec, name: impl Into<String>) -> VectorField {
    let comps = Arc::new([spec.jx.clone(), spec.jy.clone(), spec.jz.clone()]);
    let mut field = VectorField::fallible(name, move |p| eval3(&comps, p)).with_periodicity(spec.periodic);
    if let Some(curl) = &spec.curl {
        let curl = Arc::new(curl.clone());
        field = field.with_fallible_curl(move |p| eval3(&curl, p));
    }
    field
}
