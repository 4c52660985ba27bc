#![no_main]

use std::sync::LazyLock;

use libfuzzer_sys::fuzz_target;
use ocmdp::model::{
    format_aautomaton, format_cmd_strategy, format_counter_regular, format_md_strategy, parse_aautomaton,
    parse_cmd_strategy, parse_counter_regular, parse_md_strategy, parse_mdp, parse_ocmdp, FiniteMdp,
};
use ocmdp::OcMdp;

// Strategy texts are read against these fixed models.
static OCM: LazyLock<OcMdp> = LazyLock::new(|| {
    parse_ocmdp(
        "ocmdp\nstate c N\nstate s P\nstate r P\n\
         prule c -1 s\nprule c -1 r\nprule c +1 c\nzrule c 0 c\nzrule c +1 s\n\
         prule s -1 s 1\nzrule s 0 s 1\n\
         prule r +1 r 1/2\nprule r 0 c 1/2\nzrule r 0 r 1\nfinal s\n",
    )
    .unwrap()
});
static MDP: LazyLock<FiniteMdp> = LazyLock::new(|| {
    parse_mdp("mdp\nvertex u N r=0\nvertex a P r=-1\nvertex b P r=1\nedge u a\nedge u b\nedge a u 1\nedge b u 1\n")
        .unwrap()
});

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let a = &*OCM;
    if let Ok(s) = parse_cmd_strategy(a, text) {
        assert_eq!(parse_cmd_strategy(a, &format_cmd_strategy(a, &s)).unwrap(), s);
    }
    if let Ok(s) = parse_counter_regular(a, text) {
        assert_eq!(parse_counter_regular(a, &format_counter_regular(a, &s)).unwrap(), s);
    }
    if let Ok(m) = parse_aautomaton(a, text) {
        assert_eq!(parse_aautomaton(a, &format_aautomaton(a, &m)).unwrap(), m);
        let _ = m.accepts(0, u64::MAX);
    }
    if let Ok(s) = parse_md_strategy(&MDP, text) {
        assert_eq!(parse_md_strategy(&MDP, &format_md_strategy(&MDP, &s)).unwrap(), s);
    }
});
