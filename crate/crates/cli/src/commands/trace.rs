use clap::Args as ClapArgs;
use realizer_core::flows::{integrate_flow, FlowDirection, FlowOptions};
use realizer_core::Point3;
use serde_json::json;

use super::OutputArgs;
use crate::config::{parse_point, FieldArgs, RunConfig};
use crate::error::CliError;
use crate::exit;
use crate::output::{emit, envelope, Format};

#[derive(ClapArgs, Debug)]
pub struct Args {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Flow: D1, D2, D3 or D3Tilde.
    #[arg(long)]
    pub dir: FlowDirection,
    /// Start `x,y,z` (default: the example's anchor, else the origin).
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub start: Option<Point3>,
    /// Final time; negative runs the flow backwards.
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    /// Relative tolerance of the integrator.
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    /// Absolute tolerance of the integrator.
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(a: Args) -> Result<u8, CliError> {
    let mut cfg = RunConfig::new(&a.field, a.rtol)?;
    if !(a.atol > 0.0 && a.atol.is_finite()) {
        return Err(CliError::usage("--atol must be positive"));
    }
    if !a.t.is_finite() {
        return Err(CliError::usage("--t must be finite"));
    }
    let f = a.field.resolve(&cfg.source)?;
    let start = a
        .start
        .or_else(|| f.entry.as_ref().map(|e| e.anchor))
        .unwrap_or_default();
    cfg.anchor = Some(start);
    cfg.out = a.output.out.clone();
    let opts = FlowOptions::default().with_tolerances(cfg.tol, a.atol);
    let traj = integrate_flow(&f.field, a.dir, start, a.t, &opts)
        .map_err(|e| CliError::failure(format!("{} flow from {start}: {e}", a.dir)))?;
    let text = match a.output.format {
        Format::Csv => traj.to_csv(),
        Format::Json => {
            let pts: Vec<[f64; 3]> = traj.points.iter().map(|p| p.to_array()).collect();
            envelope(
                "trace",
                vec![
                    ("field", f.name.clone().into()),
                    ("direction", a.dir.to_string().into()),
                    ("start", json!(start.to_array())),
                    ("t_end", a.t.into()),
                    ("stopped_early", traj.stopped_early.into()),
                    ("t", json!(traj.t)),
                    ("points", json!(pts)),
                    ("q", json!(traj.q)),
                ],
            )
        }
    };
    emit(&text, cfg.out.as_deref())?;
    Ok(exit::OK)
}
