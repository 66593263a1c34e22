pub mod check;
pub mod examples;
pub mod periodic;
pub mod planar;
pub mod realize;
pub mod trace;
pub mod verify;

use std::path::PathBuf;

use clap::Args;
use realizer_core::field::{check_conditions_with, ConditionOptions, ConditionReport};
use realizer_core::{Aabb, VectorField};

use crate::output::Format;

/// Output switches shared by every command.
#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

pub fn conditions(field: &VectorField, region: &Aabb, samples: usize, tol: f64, seed: u64) -> ConditionReport {
    check_conditions_with(
        field,
        region,
        samples,
        &ConditionOptions {
            tol,
            norm_floor: tol,
            seed,
            ..ConditionOptions::default()
        },
    )
}

/// Exit code of a condition report: 0, 2 (Frobenius) or 3 (basis only).
pub fn condition_code(r: &ConditionReport) -> u8 {
    if !r.frobenius_ok {
        crate::exit::NEGATIVE
    } else if !r.basis_ok {
        crate::exit::BASIS
    } else {
        crate::exit::OK
    }
}
