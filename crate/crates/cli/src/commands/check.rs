use clap::Args as ClapArgs;
use realizer_core::export::fmt17;
use realizer_core::Aabb;

use super::{condition_code, conditions, OutputArgs};
use crate::config::{parse_box, FieldArgs, RunConfig};
use crate::error::CliError;
use crate::output::{emit, envelope, value, Format};

#[derive(ClapArgs, Debug)]
pub struct Args {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Box `x0,x1,y0,y1,z0,z1` (default: the example's region, else [-1,1]^3).
    #[arg(long = "box", value_name = "BOX", value_parser = parse_box, allow_hyphen_values = true)]
    pub region: Option<Aabb>,
    /// Halton sample count.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Bound on the normalized Frobenius residual and floor on |j|, |curl j|.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Offset into the Halton sequence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(a: Args) -> Result<u8, CliError> {
    let mut cfg = RunConfig::new(&a.field, a.tol)?;
    let f = a.field.resolve(&cfg.source)?;
    cfg.region = Some(a.region.unwrap_or_else(|| f.default_region()));
    cfg.seed = a.seed;
    cfg.out = a.output.out.clone();
    let region = cfg.region.unwrap();
    let report = conditions(&f.field, &region, a.samples, cfg.tol, cfg.seed);
    let text = match a.output.format {
        Format::Json => envelope("check", vec![("field", f.name.clone().into()), ("report", value(&report))]),
        Format::Csv => {
            let p = |v: realizer_core::Point3| format!("{} {} {}", fmt17(v.x), fmt17(v.y), fmt17(v.z));
            let rows = [
                ("div_residual", fmt17(report.div_residual)),
                ("frobenius_residual", fmt17(report.frobenius_residual)),
                ("min_j_norm", fmt17(report.min_j_norm)),
                ("min_curl_norm", fmt17(report.min_curl_norm)),
                ("frobenius_ok", report.frobenius_ok.to_string()),
                ("basis_ok", report.basis_ok.to_string()),
                ("samples", report.samples.to_string()),
                ("failed_samples", report.failed_samples.to_string()),
                ("min_j_point", p(report.min_j_point)),
                ("min_curl_point", p(report.min_curl_point)),
                ("worst_frobenius_point", p(report.worst_frobenius_point)),
            ];
            let mut s = String::from("key,value\n");
            for (k, v) in rows {
                s.push_str(&format!("{k},{v}\n"));
            }
            s
        }
    };
    emit(&text, cfg.out.as_deref())?;
    Ok(condition_code(&report))
}
