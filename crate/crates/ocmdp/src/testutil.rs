//! Fixtures and generators shared by unit tests.

use proptest::prelude::*;

use crate::model::{parse_mdp, parse_ocmdp, rational, FiniteMdp, OcMdp, Owner, Rule};

/// Controlled `u` choosing between `a` (reward -1) and `b` (reward +1),
/// both returning to `u`.
pub fn e6() -> FiniteMdp {
    parse_mdp("mdp\nvertex u N r=0\nvertex a P r=-1\nvertex b P r=1\nedge u a\nedge u b\nedge a u 1\nedge b u 1\n")
        .unwrap()
}

/// Single probabilistic state moving up with probability `up`.
pub fn w1(up: (i64, i64)) -> OcMdp {
    let down = (up.1 - up.0, up.1);
    parse_ocmdp(&format!(
        "ocmdp\nstate q P\nprule q +1 q {}/{}\nprule q -1 q {}/{}\nzrule q 0 q 1\n",
        up.0, up.1, down.0, down.1
    ))
    .unwrap()
}

pub fn arb_mdp(max_v: usize, max_deg: usize) -> impl Strategy<Value = FiniteMdp> {
    (1..=max_v).prop_flat_map(move |n| {
        proptest::collection::vec(
            (any::<bool>(), -1i8..=1, proptest::collection::btree_map(0..n, 1i64..4, 1..=max_deg)),
            n,
        )
        .prop_map(move |vs| {
            let names = (0..n).map(|i| format!("v{i}")).collect();
            let owner = vs.iter().map(|(c, _, _)| if *c { Owner::Controlled } else { Owner::Probabilistic }).collect();
            let reward = vs.iter().map(|(_, r, _)| *r).collect();
            let succ: Vec<Vec<usize>> = vs.iter().map(|(_, _, e)| e.keys().copied().collect()).collect();
            let prob = vs
                .iter()
                .map(|(c, _, e)| {
                    if *c {
                        Vec::new()
                    } else {
                        let t: i64 = e.values().sum();
                        e.values().map(|&w| rational(w, t)).collect()
                    }
                })
                .collect();
            FiniteMdp::new(names, owner, reward, succ, prob).unwrap()
        })
    })
}

/// Random OC-MDP with up to `max_q` states and up to `max_rules` positive
/// rules per state; zero rules are a single (p, 0, p) or (p, +1, q).
pub fn arb_ocmdp(max_q: usize, max_rules: usize) -> impl Strategy<Value = OcMdp> {
    (1..=max_q).prop_flat_map(move |n| {
        proptest::collection::vec(
            (any::<bool>(), proptest::collection::btree_map((0..n, -1i8..=1), 1i64..4, 1..=max_rules), (0..n, 0i8..=1)),
            n,
        )
        .prop_map(move |qs| {
            let names = (0..n).map(|i| format!("q{i}")).collect();
            let owner: Vec<Owner> =
                qs.iter().map(|(c, _, _)| if *c { Owner::Controlled } else { Owner::Probabilistic }).collect();
            let mut pos = Vec::new();
            let mut zero = Vec::new();
            for (p, (_, rules, (zt, zd))) in qs.iter().enumerate() {
                let total: i64 = rules.values().sum();
                for (&(q, d), &w) in rules {
                    let prob = (owner[p] == Owner::Probabilistic).then(|| rational(w, total));
                    pos.push(Rule::new(p, d, q, prob));
                }
                let prob = (owner[p] == Owner::Probabilistic).then(|| rational(1, 1));
                zero.push(Rule::new(p, *zd, *zt, prob));
            }
            OcMdp::new(names, owner, zero, pos, &[]).unwrap()
        })
    })
}
