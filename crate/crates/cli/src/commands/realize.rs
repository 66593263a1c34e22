use clap::Args as ClapArgs;
use realizer_core::flows::Normalization;
use realizer_core::realizer::{verify_residuals, ReconstructedW};
use realizer_core::{Aabb, Point3};
use serde_json::json;

use super::{condition_code, conditions, OutputArgs};
use crate::config::{parse_box, parse_point, FieldArgs, RunConfig};
use crate::error::CliError;
use crate::exit;
use crate::output::{emit, envelope, value, Format};

#[derive(ClapArgs, Debug)]
pub struct Args {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Box `x0,x1,y0,y1,z0,z1` (default: the example's certified box, else [-1,1]^3).
    #[arg(long = "box", value_name = "BOX", value_parser = parse_box, allow_hyphen_values = true)]
    pub region: Option<Aabb>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 9)]
    pub grid: usize,
    /// Finite-difference step of the residual check.
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    /// Residual tolerance; exit 0 iff the max curl residual is below it.
    #[arg(long, default_value_t = 5e-6)]
    pub tol: f64,
    /// Anchor x0 `x,y,z` of the triple-flow chart (default: the example's anchor, else the box center).
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub anchor: Option<Point3>,
    /// Third flow: `standard` or `tilde`.
    #[arg(long, default_value_t = Normalization::Standard)]
    pub normalization: Normalization,
    /// Reconstruct even when the condition check fails.
    #[arg(long)]
    pub force: bool,
    /// Halton samples of the preliminary condition check.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
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
    cfg.anchor = Some(
        a.anchor
            .or_else(|| f.entry.as_ref().map(|e| e.anchor))
            .unwrap_or_else(|| region.center()),
    );
    cfg.normalization = a.normalization;
    cfg.seed = a.seed;
    cfg.out = a.output.out.clone();

    let cond = conditions(&f.field, &region, a.samples, 1e-6, cfg.seed);
    let guard = condition_code(&cond);
    if guard != exit::OK && !a.force {
        let which = if cond.frobenius_ok { "orthogonal-basis" } else { "Frobenius" };
        return Err(CliError {
            code: guard,
            message: format!(
                "{which} condition fails on the box (min |curl j| = {:e} at {}); pass --force to reconstruct anyway",
                cond.min_curl_norm, cond.min_curl_point
            ),
        });
    }

    let source = ReconstructedW::new(&f.field, cfg.anchor.unwrap(), cfg.normalization);
    let report = verify_residuals(&f.field, &source, &region, a.grid, a.fd_step);
    let code = if report.failed_fraction() > 0.1 || !(report.max_curl_residual < cfg.tol) {
        exit::FAILURE
    } else {
        exit::OK
    };
    let text = match a.output.format {
        Format::Csv => report.sigma_csv(),
        Format::Json => {
            let lattice = region.lattice(a.grid);
            let samples: Vec<_> = lattice
                .iter()
                .zip(&report.samples)
                .map(|(p, s)| match s {
                    Ok(r) => json!({"point": value(p), "w": r.w, "sigma": r.w.exp(), "curl_residual": r.curl_residual}),
                    Err(e) => json!({"point": value(p), "error": e.to_string()}),
                })
                .collect();
            envelope(
                "realize",
                vec![
                    ("field", f.name.clone().into()),
                    ("anchor", value(&cfg.anchor)),
                    ("normalization", cfg.normalization.to_string().into()),
                    ("tolerance", cfg.tol.into()),
                    ("conditions", value(&cond)),
                    ("report", value(&report)),
                    ("samples", samples.into()),
                ],
            )
        }
    };
    emit(&text, cfg.out.as_deref())?;
    Ok(code)
}
