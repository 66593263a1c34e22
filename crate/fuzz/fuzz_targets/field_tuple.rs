#![no_main]

use libfuzzer_sys::fuzz_target;
use realizer_core::dsl::{compile_field, FieldSpec};
use realizer_core::Vec3;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = FieldSpec::from_tuple(src) {
        let f = compile_field(&spec, "fuzz");
        let p = Vec3::new(0.25, 0.5, -0.75);
        let _ = f.evaluate(p);
        let _ = f.curl_at(p);
    }
});
