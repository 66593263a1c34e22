//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 1 asks for the curl zero of the counter-example near x = √(2/3).
//! Its curl is (0, z f'', f'') with f'' = 48x − 72x², which vanishes on
//! x = 0 and x = 2/3 only, so the located zero is 2/3 and the criterion
//! cannot pass. It is evaluated as stated and reported as FAIL; the suite
//! exits nonzero only if it fails in any other way, or if another criterion
//! fails.

use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use realizer_core::catalog::{catalog, find, fgh_sigma, shifted_sine_f, sinh_field, sinh_x32};
use realizer_core::flows::{integrate_flow, FlowDirection, FlowOptions, InversionOptions, Normalization};
use realizer_core::func1d::Func1D;
use realizer_core::geometry::Halton;
use realizer_core::invariants;
use realizer_core::periodic::{boundedness_scan, default_starts, Boundedness, ScanOptions};
use realizer_core::planar::{gradient_flow, hitting_time, planar_residuals, PlanarError, PlanarOptions, PlanarPotential};
use realizer_core::realizer::{point_residual, verify_residuals, w_at_point, ClosedFormW, ReconstructedW};
use realizer_core::{Aabb, Vec3, VectorField};
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn realizer(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_realizer"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("JSON output")
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

/// Returns the outcome and whether a FAIL has the documented cause.
fn criterion_1() -> (Outcome, bool) {
    let start = Instant::now();
    let (sinh_code, sinh_out) = realizer(&["check", "--example", "sinh"]);
    let (cex_code, cex_out) = realizer(&["check", "--example", "frobenius-cex"]);
    let elapsed = start.elapsed();
    let sinh = &json(&sinh_out)["report"];
    let cex = &json(&cex_out)["report"];
    let sinh_ok = sinh_code == 0
        && sinh["frobenius_ok"] == true
        && sinh["basis_ok"] == true
        && num(&sinh["frobenius_residual"]) < 1e-8
        && num(&sinh["div_residual"]) < 1e-8;
    let cex_split = cex_code == 3 && cex["frobenius_ok"] == true && cex["basis_ok"] == false;
    let zero_x = num(&cex["min_curl_point"]["x"]);
    let target = (2.0f64 / 3.0).sqrt();
    let pinpointed = (zero_x - target).abs() <= 0.01;
    let timely = within(elapsed, 1.0);
    let detail = format!(
        "sinh residuals {:.1e}/{:.1e}; cex frobenius={} basis={}; curl zero at x = {zero_x:.6} vs sqrt(2/3) = {target:.6}; {:.2} s",
        num(&sinh["frobenius_residual"]),
        num(&sinh["div_residual"]),
        cex["frobenius_ok"],
        cex["basis_ok"],
        elapsed.as_secs_f64()
    );
    let pass = sinh_ok && cex_split && pinpointed && timely;
    // the only admissible failure: everything holds but the zero sits at 2/3
    let documented = !pass && sinh_ok && cex_split && timely && (zero_x - 2.0 / 3.0).abs() <= 1e-3;
    (outcome(pass, detail), documented)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let f = sinh_field();
    let opts = FlowOptions::default().with_tolerances(1e-12, 1e-14);
    let mut err12 = 0.0f64;
    for p in Halton::sample(&Aabb::cube(-2.0, 2.0), 8, 3) {
        for k in 0..=12 {
            let t = -3.0 + 0.5 * k as f64;
            let s = t + p.x.sinh();
            let x1 = Vec3::new(s.asinh(), (1.0 + s * s).sqrt() + p.y - p.x.cosh(), p.z);
            let x2 = Vec3::new(p.x, p.y, p.z + t);
            for (dir, want) in [(FlowDirection::D1, x1), (FlowDirection::D2, x2)] {
                let got = match integrate_flow(&f, dir, p, t, &opts) {
                    Ok(tr) => tr.endpoint(),
                    Err(e) => return outcome(false, format!("{dir} from {p}: {e}")),
                };
                err12 = err12.max((got - want).norm_inf());
            }
        }
    }
    let x0 = Vec3::new(0.0, 1.0, 0.0);
    let mut err32 = 0.0f64;
    let mut n = 0;
    for u in Halton::sample(&Aabb::cube(-2.0, 2.0), 200, 7) {
        if u.x.abs() < 0.1 {
            continue;
        }
        n += 1;
        let coords = realizer_core::flows::TripleCoordinates::new(x0, u.x, u.y, u.z);
        match realizer_core::flows::forward_map(&f, &coords, &opts) {
            Ok(p) => err32 = err32.max((p - sinh_x32(u.x, u.y, u.z)).norm_inf()),
            Err(e) => return outcome(false, format!("triple flow at {u}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        err12 < 1e-8 && err32 < 1e-7 && within(elapsed, 5.0),
        format!(
            "X1/X2 max error {err12:.1e}; X32 max error {err32:.1e} over {n} triples; {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let f = sinh_field();
    let x0 = Vec3::new(0.0, 1.0, 0.0);
    let inv = InversionOptions::default();
    let mut w_err = 0.0f64;
    let mut n = 0;
    for u in Halton::sample(&Aabb::cube(-2.0, 2.0), 130, 11) {
        if u.x.abs() < 0.1 || n == 100 {
            continue;
        }
        n += 1;
        let p = sinh_x32(u.x, u.y, u.z);
        match w_at_point(&f, x0, p, Normalization::Standard, &inv) {
            Ok(s) => w_err = w_err.max((s.w - u.z).abs()),
            Err(e) => return outcome(false, format!("inversion at {p}: {e}")),
        }
    }
    let mut sigma_err = 0.0f64;
    for k in 0..20 {
        let p = Vec3::new(0.0, -1.0 + 0.15 * k as f64, -1.0 + 0.1 * k as f64);
        match w_at_point(&f, x0, p, Normalization::Standard, &inv) {
            Ok(s) => {
                let want = (1.0 - p.y).exp();
                sigma_err = sigma_err.max((s.sigma() - want).abs() / want.max(1.0));
            }
            Err(e) => return outcome(false, format!("inversion on x = 0 at {p}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        n == 100 && w_err < 1e-7 && sigma_err < 1e-6 && within(elapsed, 30.0),
        format!(
            "|w - t3| max {w_err:.1e} over {n} triples; sigma on x = 0 max error {sigma_err:.1e}; {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    let mut record = |label: &str, field: &VectorField, src: &dyn realizer_core::realizer::WSource, region: &Aabb| {
        let r = verify_residuals(field, src, region, 11, 1e-3);
        let ok = r.failed == 0 && r.max_curl_residual < 5e-6;
        pass &= ok;
        parts.push(format!("{label} {:.1e}{}", r.max_curl_residual, if r.failed > 0 { " (failed points)" } else { "" }));
    };
    let sinh = find("sinh").expect("sinh entry");
    let sigma = sinh.closed_form_sigma.clone().expect("closed form");
    record("(a)", &sinh.field, &ClosedFormW(move |p| sigma(p).ln()), &sinh.sigma_region);
    let recon = ReconstructedW::new(&sinh.field, sinh.anchor, Normalization::Standard);
    record("(b)", &sinh.field, &recon, &sinh.sigma_region);
    let fgh = find("fgh").expect("fgh entry");
    let (fx, one) = (shifted_sine_f(), Func1D::one());
    record(
        "(c)",
        &fgh.field,
        &ClosedFormW(move |p| fgh_sigma(&fx, &one, &one, p).ln()),
        &Aabb::unit_cell(),
    );
    let cex = find("frobenius-cex").expect("cex entry");
    let sigma = cex.closed_form_sigma.clone().expect("closed form");
    record(
        "(d)",
        &cex.field,
        &ClosedFormW(move |p| sigma(p).ln()),
        &Aabb::from_bounds([0.1, 0.9, -1.0, 1.0, -1.0, 1.0]),
    );
    let elapsed = start.elapsed();
    outcome(
        pass && within(elapsed, 60.0),
        format!("max |curl(j/sigma)|: {}; {:.2} s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn criterion_5() -> Outcome {
    let f = sinh_field();
    let src = ReconstructedW::new(&f, Vec3::new(0.0, 1.0, 0.0), Normalization::Standard);
    let (mut align, mut rate) = (0.0f64, 0.0f64);
    for (i, u) in Halton::sample(&Aabb::from_bounds([0.3, 1.5, -1.0, 1.0, -1.0, 1.0]), 50, 17)
        .into_iter()
        .enumerate()
    {
        let p = if i % 2 == 0 { u } else { Vec3::new(-u.x, u.y, u.z) };
        let r = match point_residual(&f, &src, p, 1e-3) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("at {p}: {e}")),
        };
        let c = f.curl_at(p).expect("analytic curl").norm();
        align = align.max(r.curl_alignment / c);
        rate = rate.max(r.third_leg_rate);
    }
    outcome(
        align <= 1e-4 && rate <= 1e-4,
        format!("max |grad w . curl j|/|curl j| {align:.1e}; max third-leg rate error {rate:.1e}; 50 points"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let bounded = find("fgh").expect("fgh entry");
    let vanishing = find("fgh-vanishing").expect("fgh-vanishing entry");
    let opts = ScanOptions::default();
    let b = boundedness_scan(&bounded.field, &default_starts(), &opts);
    let d = boundedness_scan(&vanishing.field, &default_starts(), &opts);
    let peak = d
        .records
        .iter()
        .filter_map(|r| r.integral.last().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let elapsed = start.elapsed();
    outcome(
        b.verdict == Boundedness::Bounded && d.verdict == Boundedness::Diverging && peak > 10.0 && within(elapsed, 30.0),
        format!(
            "sin+2: {}; sin: {} with max I = {peak:.3}; {:.2} s",
            b.verdict,
            d.verdict,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let opts = PlanarOptions::default();
    let starts: Vec<[f64; 2]> = Halton::sample(&Aabb::cube(-2.0, 2.0), 100, 23)
        .iter()
        .map(|p| [p.x, p.y])
        .collect();
    let mut worst_v = 0.0f64;
    let mut worst_res = 0.0f64;
    for pot in [PlanarPotential::wavy_x(0.1), PlanarPotential::wavy_xy(0.05, 0.5)] {
        for &s in &starts {
            match hitting_time(&pot, s, &opts) {
                Ok(r) => worst_v = worst_v.max(pot.v(r.endpoint[0], r.endpoint[1]).abs()),
                Err(e) => return outcome(false, format!("{} from {s:?}: {e}", pot.name())),
            }
        }
        let r = planar_residuals(&pot, [0.0, 1.0, 0.0, 1.0], 11, 1e-3, &opts);
        if r.failed > 0 {
            return outcome(false, format!("{}: {} residual points failed", pot.name(), r.failed));
        }
        worst_res = worst_res.max(r.max_residual);
    }
    let blowup = gradient_flow(&PlanarPotential::cosh_minus_y(), [1.0, 0.0], 50.0, &opts);
    let blew_up = matches!(blowup, Err(PlanarError::FlowBlowup { .. }));
    outcome(
        worst_v <= 1e-10 && worst_res < 5e-6 && blew_up,
        format!(
            "max |v(endpoint)| {worst_v:.1e} on 2x100 starts; max 2-D residual {worst_res:.1e}; cosh x - y: {}",
            match blowup {
                Err(e) => e.to_string(),
                Ok(p) => format!("no blowup, reached {p:?}"),
            }
        ),
    )
}

fn run_suite<S: Strategy>(name: &str, strategy: S, check: impl Fn(S::Value) -> Result<usize, String>) -> Result<usize, String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases: 50,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let checked = std::cell::Cell::new(0usize);
    runner
        .run(&strategy, |v| {
            checked.set(checked.get() + check(v).map_err(TestCaseError::fail)?);
            Ok(())
        })
        .map_err(|e| format!("{name}: {e}"))?;
    Ok(checked.get())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let entries = catalog();
    let tally = |r: invariants::CaseResult| r.map(usize::from);
    let unit = prop::array::uniform3(0.0..1.0f64);
    let mut lines = Vec::new();
    let mut ok = true;
    let mut push = |label: &str, r: Result<usize, String>| match r {
        Ok(n) => lines.push(format!("{label} {n}")),
        Err(e) => {
            ok = false;
            lines.push(e);
        }
    };
    push(
        "semigroup",
        run_suite("semigroup", (unit.clone(), -1.0..1.0f64, -1.0..1.0f64), |(u, s, t)| {
            let mut n = 0;
            for e in &entries {
                for dir in FlowDirection::ALL {
                    n += tally(invariants::semigroup(&e.field, dir, e.region.lerp(u), s, t))
                        .map_err(|m| format!("{}: {m}", e.name))?;
                }
            }
            Ok(n)
        }),
    );
    push(
        "reversibility",
        run_suite("reversibility", (unit.clone(), -1.0..1.0f64), |(u, t)| {
            let mut n = 0;
            for e in &entries {
                for dir in FlowDirection::ALL {
                    n += tally(invariants::reversibility(&e.field, dir, e.region.lerp(u), t))
                        .map_err(|m| format!("{}: {m}", e.name))?;
                }
            }
            Ok(n)
        }),
    );
    push(
        "unit-speed",
        run_suite("unit-speed", (unit, -1.5..1.5f64), |(u, t)| {
            let mut n = 0;
            for e in &entries {
                for dir in FlowDirection::ALL {
                    n += tally(invariants::unit_speed(&e.field, dir, e.region.lerp(u), t))
                        .map_err(|m| format!("{}: {m}", e.name))?;
                }
            }
            Ok(n)
        }),
    );
    let legs = (-0.8..0.8f64, -0.8..0.8f64, -0.8..0.8f64, -0.8..0.8f64);
    push(
        "additivity",
        run_suite("additivity", legs.clone(), |(t1, t2, a, b)| {
            let mut n = 0;
            for e in &entries {
                for norm in invariants::NORMALIZATIONS {
                    n += tally(invariants::additivity(&e.field, e.anchor, norm, t1, t2, a, b))
                        .map_err(|m| format!("{}: {m}", e.name))?;
                }
            }
            Ok(n)
        }),
    );
    push(
        "monotonicity",
        run_suite("monotonicity", (legs.0, legs.1, legs.2, 0.05..0.8f64), |(t1, t2, a, d)| {
            let mut n = 0;
            for e in &entries {
                for norm in invariants::NORMALIZATIONS {
                    n += tally(invariants::monotonicity(&e.field, e.anchor, norm, t1, t2, a, d))
                        .map_err(|m| format!("{}: {m}", e.name))?;
                }
            }
            Ok(n)
        }),
    );
    outcome(
        ok,
        format!(
            "50 cases each on {} catalog fields, checks applied: {}; {:.1} s",
            entries.len(),
            lines.join(", "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let file = dir.path().join("rot.json");
    std::fs::write(&file, r#"{"jx": "-y", "jy": "x", "jz": "1"}"#).expect("write field file");
    let file = file.to_str().expect("utf-8 path").to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["check", "--example", "sinh"],
        vec!["check", "--example", "frobenius-cex", "--format", "csv"],
        vec!["check", "--field-file", &file],
        vec!["realize", "--example", "sinh", "--grid", "3"],
        vec!["realize", "--example", "sinh", "--grid", "3", "--format", "csv", "--normalization", "tilde"],
        vec!["verify", "--example", "fgh"],
        vec!["periodic", "--example", "fgh", "--f", "sin(2*pi*x)"],
        vec!["periodic", "--example", "fgh", "--format", "csv"],
        vec!["trace", "--example", "sinh", "--dir", "D3", "--t", "2"],
        vec!["trace", "--example", "fgh-vanishing", "--dir", "D3", "--start", "0.26,0,0", "--t", "-10", "--format", "csv"],
        vec!["planar", "--potential", "wavy-xy", "--a", "0.05"],
        vec!["planar", "--potential", "cosh-y", "--format", "csv"],
        vec!["examples", "list"],
        vec!["examples", "show", "sinh-family", "--format", "csv"],
    ];
    for args in &commands {
        let first = realizer(args);
        let mut threaded = vec!["--threads", "2"];
        threaded.extend(args.iter().copied());
        for again in [realizer(args), realizer(&threaded)] {
            if again != first {
                return outcome(false, format!("outputs differ for `realizer {}`", args.join(" ")));
            }
        }
        if first.1.is_empty() {
            return outcome(false, format!("no output from `realizer {}`", args.join(" ")));
        }
    }
    outcome(
        true,
        format!("{} commands, 3 runs each (one with --threads 2), byte-identical", commands.len()),
    )
}

fn main() {
    let mut unexpected = 0;
    let mut report = |n: usize, name: &str, o: Outcome, documented: bool| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && documented {
            " [known: curl j vanishes at x = 2/3, not sqrt(2/3)]"
        } else {
            ""
        };
        println!("{tag} {n} {name}: {}{note}", o.detail);
        if !o.pass && !documented {
            unexpected += 1;
        }
    };
    let (c1, documented) = criterion_1();
    report(1, "conditions", c1, documented);
    report(2, "flow closed forms", criterion_2(), false);
    report(3, "reconstruction oracle", criterion_3(), false);
    report(4, "residual certificates", criterion_4(), false);
    report(5, "directional identities", criterion_5(), false);
    report(6, "periodic dichotomy", criterion_6(), false);
    report(7, "planar construction", criterion_7(), false);
    report(8, "property suites", criterion_8(), false);
    report(9, "determinism", criterion_9(), false);
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed unexpectedly");
        std::process::exit(1);
    }
}
