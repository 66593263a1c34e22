use clap::Args as ClapArgs;
use realizer_core::periodic::{boundedness_scan, default_starts, torus_verdict, ScanOptions, TorusVerdict};
use realizer_core::Aabb;

use super::{conditions, OutputArgs};
use crate::config::{parse_horizons, FieldArgs, RunConfig};
use crate::error::CliError;
use crate::exit;
use crate::output::{emit, envelope, value, Format};

#[derive(ClapArgs, Debug)]
pub struct Args {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Horizons T of I(T), increasing (default 1,2,4,…,256).
    #[arg(long, value_parser = parse_horizons)]
    pub horizons: Option<Vec<f64>>,
    /// Stop a start once I(T) exceeds this value.
    #[arg(long, default_value_t = 50.0)]
    pub cap: f64,
    /// Tolerance of the unit-cell condition check.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Halton samples of the unit-cell condition check.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(a: Args) -> Result<u8, CliError> {
    let mut cfg = RunConfig::new(&a.field, a.tol)?;
    if !(a.cap > 0.0) {
        return Err(CliError::usage("--cap must be positive"));
    }
    let f = a.field.resolve(&cfg.source)?;
    if !f.field.periodicity().is_full() {
        return Err(CliError::usage(format!(
            "field '{}' is not periodic in x, y and z; the torus test does not apply",
            f.name
        )));
    }
    cfg.region = Some(Aabb::unit_cell());
    cfg.seed = a.seed;
    cfg.out = a.output.out.clone();

    let cond = conditions(&f.field, &Aabb::unit_cell(), a.samples, cfg.tol, cfg.seed);
    let mut opts = ScanOptions {
        cap: a.cap,
        ..ScanOptions::default()
    };
    if let Some(h) = a.horizons {
        opts.horizons = h;
    }
    let scan = boundedness_scan(&f.field, &default_starts(), &opts);
    let report = torus_verdict(&f.field, &scan, &cond);
    let code = match report.verdict {
        TorusVerdict::RealizableInTorus => exit::OK,
        TorusVerdict::NotRealizable => exit::NEGATIVE,
        TorusVerdict::Inconclusive => exit::INCONCLUSIVE,
    };
    let text = match a.output.format {
        Format::Csv => scan.to_csv(),
        Format::Json => envelope(
            "periodic",
            vec![
                ("field", f.name.clone().into()),
                ("report", value(&report)),
                ("scan", scan.to_json()),
                ("conditions", value(&cond)),
            ],
        ),
    };
    emit(&text, cfg.out.as_deref())?;
    Ok(code)
}
