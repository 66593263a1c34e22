use clap::{Args as ClapArgs, Subcommand};
use realizer_core::catalog::{catalog, CatalogEntry};
use serde_json::{json, Value};

use super::OutputArgs;
use crate::error::CliError;
use crate::exit;
use crate::output::{csv_field, emit, envelope, value, Format};

#[derive(ClapArgs, Debug)]
pub struct Args {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Subcommand, Debug)]
pub enum Action {
    /// All built-in examples.
    List(OutputArgs),
    /// One example in full.
    Show {
        name: String,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn summary(e: &CatalogEntry) -> Value {
    json!({
        "name": e.name,
        "summary": e.summary,
        "periodic": e.field.periodicity().is_full(),
        "closed_form_sigma": e.closed_form_sigma.is_some(),
    })
}

fn detail(e: &CatalogEntry) -> Value {
    let spec = e.spec.as_ref().map(|s| json!([s.jx.to_string(), s.jy.to_string(), s.jz.to_string()]));
    json!({
        "name": e.name,
        "summary": e.summary,
        "field": spec,
        "periodicity": value(&e.field.periodicity()),
        "anchor": value(&e.anchor),
        "region": value(&e.region),
        "sigma_region": value(&e.sigma_region),
        "closed_form_sigma": e.closed_form_sigma.is_some(),
        "closed_form_w": e.closed_form_w.is_some(),
        "expected": {
            "frobenius": e.expected.frobenius,
            "basis": e.expected.basis,
            "torus": opt_str(e.expected.torus),
            "planar": e.expected.planar.map(|p| value(&p)),
        },
    })
}

pub fn run(a: Args) -> Result<u8, CliError> {
    let all = catalog();
    let (text, out) = match a.action {
        Action::List(output) => {
            let text = match output.format {
                Format::Json => envelope("examples", vec![("examples", all.iter().map(summary).collect())]),
                Format::Csv => {
                    let mut s = String::from("name,periodic,closed_form_sigma,summary\n");
                    for e in &all {
                        s.push_str(&format!(
                            "{},{},{},{}\n",
                            csv_field(&e.name),
                            e.field.periodicity().is_full(),
                            e.closed_form_sigma.is_some(),
                            csv_field(&e.summary)
                        ));
                    }
                    s
                }
            };
            (text, output.out)
        }
        Action::Show { name, output } => {
            let e = all.iter().find(|e| e.name == name).ok_or_else(|| {
                let names: Vec<&str> = all.iter().map(|e| e.name.as_str()).collect();
                CliError::usage(format!("unknown example '{name}' (known: {})", names.join(", ")))
            })?;
            let text = match output.format {
                Format::Json => envelope("examples", vec![("example", detail(e))]),
                Format::Csv => {
                    let spec = e.spec.as_ref().map(|s| format!("({}, {}, {})", s.jx, s.jy, s.jz));
                    let rows = [
                        ("name", e.name.clone()),
                        ("summary", e.summary.clone()),
                        ("field", opt_str(spec)),
                        ("anchor", format!("{}", e.anchor)),
                        ("periodic", e.field.periodicity().is_full().to_string()),
                        ("closed_form_sigma", e.closed_form_sigma.is_some().to_string()),
                        ("expected_frobenius", e.expected.frobenius.to_string()),
                        ("expected_basis", e.expected.basis.to_string()),
                        ("expected_torus", opt_str(e.expected.torus)),
                    ];
                    let mut s = String::from("key,value\n");
                    for (k, v) in rows {
                        s.push_str(&format!("{k},{}\n", csv_field(&v)));
                    }
                    s
                }
            };
            (text, output.out)
        }
    };
    emit(&text, out.as_deref())?;
    Ok(exit::OK)
}
