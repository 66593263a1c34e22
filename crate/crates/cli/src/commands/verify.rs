use clap::Args as ClapArgs;
use realizer_core::dsl::parse_expr;
use realizer_core::realizer::{verify_residuals, ClosedFormW};
use realizer_core::Aabb;

use super::OutputArgs;
use crate::config::{parse_box, FieldArgs, RunConfig};
use crate::error::CliError;
use crate::exit;
use crate::output::{emit, envelope, value, Format};

#[derive(ClapArgs, Debug)]
pub struct Args {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Conductivity σ(x, y, z) to verify (default: the example's closed form).
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true, conflicts_with = "w")]
    pub sigma: Option<String>,
    /// Log-conductivity w(x, y, z) to verify.
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub w: Option<String>,
    /// Box `x0,x1,y0,y1,z0,z1` (default: the example's certified box, else [-1,1]^3).
    #[arg(long = "box", value_name = "BOX", value_parser = parse_box, allow_hyphen_values = true)]
    pub region: Option<Aabb>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    /// Residual tolerance; exit 0 iff every point passes below it.
    #[arg(long, default_value_t = 5e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(a: Args) -> Result<u8, CliError> {
    let mut cfg = RunConfig::new(&a.field, a.tol)?;
    if a.grid == 0 {
        return Err(CliError::usage("--grid must be at least 1"));
    }
    if !(a.fd_step > 0.0 && a.fd_step.is_finite()) {
        return Err(CliError::usage("--fd-step must be positive"));
    }
    let f = a.field.resolve(&cfg.source)?;
    let region = a
        .region
        .or_else(|| f.entry.as_ref().map(|e| e.sigma_region))
        .unwrap_or_else(|| f.default_region());
    cfg.region = Some(region);
    cfg.out = a.output.out.clone();

    let (label, w): (String, Box<dyn Fn(realizer_core::Point3) -> f64 + Send + Sync>) = match (&a.sigma, &a.w) {
        (Some(s), _) => {
            let e = parse_expr(s).map_err(|e| CliError::usage(format!("--sigma: {e}")))?;
            (format!("sigma = {e}"), Box::new(move |p| e.eval(p).map_or(f64::NAN, f64::ln)))
        }
        (None, Some(s)) => {
            let e = parse_expr(s).map_err(|e| CliError::usage(format!("--w: {e}")))?;
            (format!("w = {e}"), Box::new(move |p| e.eval(p).unwrap_or(f64::NAN)))
        }
        (None, None) => {
            let sigma = f
                .entry
                .as_ref()
                .and_then(|e| e.closed_form_sigma.clone())
                .ok_or_else(|| CliError::usage(format!("'{}' has no closed-form conductivity; pass --sigma or --w", f.name)))?;
            ("closed form".into(), Box::new(move |p| sigma(p).ln()))
        }
    };
    let source = ClosedFormW(w);
    let report = verify_residuals(&f.field, &source, &region, a.grid, a.fd_step);
    let code = if report.failed == 0 && report.max_curl_residual < cfg.tol {
        exit::OK
    } else {
        exit::FAILURE
    };
    let text = match a.output.format {
        Format::Csv => report.sigma_csv(),
        Format::Json => envelope(
            "verify",
            vec![
                ("field", f.name.clone().into()),
                ("conductivity", label.into()),
                ("tolerance", cfg.tol.into()),
                ("report", value(&report)),
            ],
        ),
    };
    emit(&text, cfg.out.as_deref())?;
    Ok(code)
}
