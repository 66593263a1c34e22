use clap::Args as ClapArgs;
use rayon::prelude::*;
use realizer_core::dsl::{parse_expr, Var};
use realizer_core::export::csv_table;
use realizer_core::geometry::Halton;
use realizer_core::planar::{
    hitting_time, planar_periodic_verdict, planar_residuals, PlanarOptions, PlanarPotential, PlanarVerdict,
    PlanarVerdictOptions,
};
use realizer_core::Aabb;
use serde_json::json;

use super::OutputArgs;
use crate::config::parse_point2;
use crate::error::CliError;
use crate::exit;
use crate::output::{emit, envelope, value, Format};

#[derive(ClapArgs, Debug)]
pub struct Args {
    /// Potential: `x`, `wavy-x`, `wavy-xy`, `cosh-y`, or an expression in x and y.
    #[arg(long, default_value = "wavy-x", allow_hyphen_values = true)]
    pub potential: String,
    /// Amplitude a of `wavy-x` (x + a sin 2πx) and `wavy-xy`.
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub a: f64,
    /// Slope b of `wavy-xy` (x + b y + a sin 2πx cos 2πy).
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub b: f64,
    /// Declare the gradient of an expression potential [0,1]²-periodic.
    #[arg(long)]
    pub periodic_gradient: bool,
    /// Single hitting-time start `x,y` (default: Halton starts in [-2,2]²).
    #[arg(long, value_parser = parse_point2, allow_hyphen_values = true)]
    pub start: Option<[f64; 2]>,
    /// Number of Halton hitting-time starts.
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    /// Samples per cell of the periodic verdict.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    /// Residual grid points per axis on the unit square.
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    /// Residual tolerance.
    #[arg(long, default_value_t = 5e-6)]
    pub tol: f64,
    /// Outermost ring of cells in the verdict.
    #[arg(long, default_value_t = 3)]
    pub shells: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn potential(a: &Args) -> Result<PlanarPotential, CliError> {
    let builtin = match a.potential.as_str() {
        "x" => Some(PlanarPotential::linear_x()),
        "wavy-x" => Some(PlanarPotential::wavy_x(a.a)),
        "wavy-xy" => Some(PlanarPotential::wavy_xy(a.a, a.b)),
        "cosh-y" => Some(PlanarPotential::cosh_minus_y()),
        _ => None,
    };
    if let Some(p) = builtin {
        if !(a.a.is_finite() && a.b.is_finite()) {
            return Err(CliError::usage("--a and --b must be finite"));
        }
        return Ok(p);
    }
    let e = parse_expr(&a.potential).map_err(|e| CliError::usage(format!("--potential: {e}")))?;
    if e.uses(Var::Z) {
        return Err(CliError::usage("--potential must depend on x and y only"));
    }
    Ok(PlanarPotential::from_expr(&e, a.periodic_gradient))
}

pub fn run(a: Args) -> Result<u8, CliError> {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(CliError::usage(format!("tolerance must be positive, got {}", a.tol)));
    }
    if a.starts == 0 || a.samples == 0 || a.grid == 0 {
        return Err(CliError::usage("--starts, --samples and --grid must be at least 1"));
    }
    let pot = potential(&a)?;
    let opts = PlanarOptions::default();
    let starts: Vec<[f64; 2]> = match a.start {
        Some(s) => vec![s],
        None => Halton::sample(&Aabb::cube(-2.0, 2.0), a.starts, a.seed)
            .iter()
            .map(|p| [p.x, p.y])
            .collect(),
    };
    let hits: Vec<_> = starts.par_iter().map(|&s| hitting_time(&pot, s, &opts)).collect();
    let residual = planar_residuals(&pot, [0.0, 1.0, 0.0, 1.0], a.grid, 1e-3, &opts);
    let verdict = planar_periodic_verdict(
        &pot,
        &Aabb::unit_cell(),
        a.samples,
        &PlanarVerdictOptions {
            max_shell: a.shells,
            seed: a.seed,
            ..PlanarVerdictOptions::default()
        },
    );
    let code = if residual.failed * 10 > residual.points || !(residual.max_residual < a.tol) {
        exit::FAILURE
    } else {
        match verdict.verdict {
            PlanarVerdict::Bounded => exit::OK,
            PlanarVerdict::Diverging => exit::NEGATIVE,
            PlanarVerdict::Inconclusive => exit::INCONCLUSIVE,
        }
    };
    let text = match a.output.format {
        Format::Csv => csv_table(
            &["x", "y", "tau", "end_x", "end_y", "w_v"],
            starts.iter().zip(&hits).map(|(s, h)| match h {
                Ok(r) => vec![s[0], s[1], r.tau, r.endpoint[0], r.endpoint[1], r.w_v],
                Err(_) => vec![s[0], s[1], f64::NAN, f64::NAN, f64::NAN, f64::NAN],
            }),
        ),
        Format::Json => {
            let hitting: Vec<_> = starts
                .iter()
                .zip(&hits)
                .map(|(s, h)| match h {
                    Ok(r) => value(r),
                    Err(e) => json!({"start": s, "error": e.to_string()}),
                })
                .collect();
            envelope(
                "planar",
                vec![
                    ("potential", pot.name().into()),
                    ("periodic_gradient", pot.periodic_gradient.into()),
                    ("tolerance", a.tol.into()),
                    ("verdict", value(&verdict)),
                    ("residual", value(&residual)),
                    ("hitting", hitting.into()),
                ],
            )
        }
    };
    emit(&text, a.output.out.as_deref())?;
    Ok(code)
}
