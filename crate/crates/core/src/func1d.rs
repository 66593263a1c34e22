//! Real functions of one variable with their derivatives.

use std::fmt;
use std::sync::Arc;

use crate::dsl::{Expr, Var};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `f` and `f'`, with a label for reports.
#[derive(Clone)]
pub struct Func1D {
    label: String,
    f: RealFn,
    df: RealFn,
    constant: Option<f64>,
}

impl fmt::Debug for Func1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Func1D({})", self.label)
    }
}

/// Step of the finite-difference derivative of expression-defined functions.
const EXPR_DIFF_STEP: f64 = 1e-3;

impl Func1D {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
            df: Arc::new(df),
            constant: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            label: format!("{c}"),
            f: Arc::new(move |_| c),
            df: Arc::new(|_| 0.0),
            constant: Some(c),
        }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// From an expression in the single variable `var`; the other variables
    /// are set to zero. The derivative uses a sixth-order central difference.
    pub fn from_expr(expr: &Expr, var: Var) -> Self {
        let label = expr.to_string();
        let constant = if [Var::X, Var::Y, Var::Z].iter().any(|v| expr.uses(*v)) {
            None
        } else {
            expr.eval_xyz(0.0, 0.0, 0.0).ok()
        };
        let at = move |e: &Expr, s: f64| -> f64 {
            let r = match var {
                Var::X => e.eval_xyz(s, 0.0, 0.0),
                Var::Y => e.eval_xyz(0.0, s, 0.0),
                Var::Z => e.eval_xyz(0.0, 0.0, s),
            };
            r.unwrap_or(f64::NAN)
        };
        let e1 = expr.clone();
        let e2 = expr.clone();
        let f = move |s: f64| at(&e1, s);
        let df = move |s: f64| {
            let h = EXPR_DIFF_STEP * s.abs().max(1.0);
            let d1 = at(&e2, s + h) - at(&e2, s - h);
            let d2 = at(&e2, s + 2.0 * h) - at(&e2, s - 2.0 * h);
            let d3 = at(&e2, s + 3.0 * h) - at(&e2, s - 3.0 * h);
            (45.0 * d1 - 9.0 * d2 + d3) / (60.0 * h)
        };
        Self {
            label,
            f: Arc::new(f),
            df: Arc::new(df),
            constant,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn deriv(&self, s: f64) -> f64 {
        (self.df)(s)
    }

    /// Second derivative by central differences of `f'`.
    pub fn deriv2(&self, s: f64) -> f64 {
        let h = 1e-4 * s.abs().max(1.0);
        (8.0 * (self.deriv(s + h) - self.deriv(s - h)) - (self.deriv(s + 2.0 * h) - self.deriv(s - 2.0 * h)))
            / (12.0 * h)
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    /// True for the constant function 1.
    pub fn is_one(&self) -> bool {
        self.constant == Some(1.0)
    }

    pub fn value_fn(&self) -> RealFn {
        self.f.clone()
    }

    pub fn deriv_fn(&self) -> RealFn {
        self.df.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_expr;
    use std::f64::consts::PI;

    #[test]
    fn expression_derivative_is_accurate() {
        let f = Func1D::from_expr(&parse_expr("sin(2*pi*x) + 2").unwrap(), Var::X);
        for s in [-0.7, 0.0, 0.3, 1.9] {
            assert!((f.value(s) - ((2.0 * PI * s).sin() + 2.0)).abs() < 1e-15);
            assert!((f.deriv(s) - 2.0 * PI * (2.0 * PI * s).cos()).abs() < 1e-9);
        }
        assert!(!f.is_constant());
    }

    #[test]
    fn constants_are_recognized() {
        assert!(Func1D::from_expr(&parse_expr("1").unwrap(), Var::Y).is_one());
        assert!(Func1D::from_expr(&parse_expr("2 - 1").unwrap(), Var::Y).is_one());
        assert!(!Func1D::from_expr(&parse_expr("y").unwrap(), Var::Y).is_constant());
        let g = Func1D::from_expr(&parse_expr("cos(y)").unwrap(), Var::Y);
        assert!((g.deriv(0.5) + 0.5f64.sin()).abs() < 1e-10);
    }
}
