#![no_main]

use libfuzzer_sys::fuzz_target;
use realizer_core::dsl::parse_expr;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let Ok(e) = parse_expr(src) else { return };
    // printing must re-parse to the same tree
    let printed = e.to_string();
    if !printed.contains("inf") && !printed.contains("NaN") {
        assert_eq!(parse_expr(&printed).as_ref(), Ok(&e), "{src:?} printed as {printed:?}");
    }
    let _ = e.eval_xyz(0.5, -1.0, 2.0);
});
