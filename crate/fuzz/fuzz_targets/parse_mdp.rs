#![no_main]

use libfuzzer_sys::fuzz_target;
use ocmdp::model::{format_mdp, parse_mdp};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_mdp(text) {
        assert_eq!(parse_mdp(&format_mdp(&m)).expect("formatted MDP reparses"), m);
    }
});
