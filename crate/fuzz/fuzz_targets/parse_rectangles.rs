#![no_main]

use std::sync::LazyLock;

use libfuzzer_sys::fuzz_target;
use ocmdp::model::parse_ocmdp;
use ocmdp::termination::StRectangles;
use ocmdp::OcMdp;

static OCM: LazyLock<OcMdp> = LazyLock::new(|| {
    parse_ocmdp(
        "ocmdp\nstate p N\nstate r P\nstate s P\n\
         prule p +1 p\nprule p 0 r\nzrule p +1 p\n\
         prule r 0 s 1/2\nprule r -1 r 1/2\nzrule r 0 r 1\n\
         prule s -1 s 1\nzrule s 0 s 1\nfinal s\n",
    )
    .unwrap()
});

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = StRectangles::parse(&OCM, text) {
        assert_eq!(StRectangles::parse(&OCM, &r.format(&OCM)).unwrap(), r);
        let aut = r.automaton();
        for i in [0, 1, 7, 8, 9, 1000, u64::MAX] {
            for p in 0..3 {
                assert_eq!(aut.accepts(p, i), r.is_black(p, i));
            }
        }
    }
});
