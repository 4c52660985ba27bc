#![no_main]

use libfuzzer_sys::fuzz_target;
use ocmdp::model::{format_ocmdp, parse_ocmdp};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(a) = parse_ocmdp(text) {
        let again = parse_ocmdp(&format_ocmdp(&a)).expect("formatted model reparses");
        assert_eq!(a, again);
    }
});
