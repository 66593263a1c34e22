#![no_main]

use libfuzzer_sys::fuzz_target;
use realizer_core::dsl::FieldSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = FieldSpec::from_json(text) {
        // serialized specs load back
        FieldSpec::from_json(&spec.to_json()).expect("to_json output parses");
    }
});
