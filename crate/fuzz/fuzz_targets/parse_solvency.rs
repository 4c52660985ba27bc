#![no_main]

use libfuzzer_sys::fuzz_target;
use ocmdp::model::{format_solvency, parse_solvency};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_solvency(text) {
        assert_eq!(parse_solvency(&format_solvency(&g)).expect("formatted game reparses"), g);
    }
});
