use num_traits::One;

use super::{CmdStrategy, FiniteMdp, MdStrategy, OcMdp, Owner, Rational};

/// Reward MDP over `Q ∪ δ>0`; state `p` is vertex `p`, positive rule `i`
/// is vertex `num_states + i`.
#[derive(Clone, Debug)]
pub struct BoundarylessMdp {
    pub mdp: FiniteMdp,
    pub num_states: usize,
}

impl BoundarylessMdp {
    pub fn state_vertex(&self, p: usize) -> usize {
        p
    }

    pub fn rule_vertex(&self, rule: usize) -> usize {
        self.num_states + rule
    }

    /// Positive rule represented by vertex `v`, if `v` is a rule vertex.
    pub fn vertex_rule(&self, v: usize) -> Option<usize> {
        v.checked_sub(self.num_states)
    }

    /// The MD strategy choosing rule vertex `f(p)` at every controlled `p`.
    pub fn md_of_cmd(&self, s: &CmdStrategy) -> MdStrategy {
        let mut md = MdStrategy::lowest(&self.mdp);
        for p in 0..self.num_states {
            if let Some(r) = s.get(p) {
                md.set(p, self.rule_vertex(r));
            }
        }
        md
    }

    /// Selector read off the choices at state vertices.
    pub fn cmd_of_md(&self, md: &MdStrategy) -> CmdStrategy {
        CmdStrategy::new(
            (0..self.num_states)
                .map(|p| md.get(p).map(|v| self.vertex_rule(v).expect("state vertices lead to rule vertices")))
                .collect(),
        )
    }
}

pub fn to_boundaryless_reward_mdp(a: &OcMdp) -> BoundarylessMdp {
    let nq = a.num_states();
    let rules = a.positive_rules();
    let mut names: Vec<String> = a.names().to_vec();
    let mut owner: Vec<Owner> = (0..nq).map(|p| a.owner(p)).collect();
    let mut reward = vec![0i8; nq];
    let mut succ: Vec<Vec<usize>> = Vec::with_capacity(nq + rules.len());
    let mut prob: Vec<Vec<Rational>> = Vec::with_capacity(nq + rules.len());
    for p in 0..nq {
        succ.push(a.positive_out(p).iter().map(|&i| nq + i).collect());
        prob.push(match a.owner(p) {
            Owner::Controlled => Vec::new(),
            Owner::Probabilistic => a.positive_out(p).iter().map(|&i| OcMdp::rule_prob(&rules[i])).collect(),
        });
    }
    for r in rules {
        names.push(format!("({},{},{})", a.name(r.from), fmt_delta(r.delta), a.name(r.to)));
        owner.push(Owner::Probabilistic);
        reward.push(r.delta);
        succ.push(vec![r.to]);
        prob.push(vec![Rational::one()]);
    }
    let mdp = FiniteMdp::new(names, owner, reward, succ, prob).expect("boundaryless MDP of a valid OC-MDP");
    BoundarylessMdp { mdp, num_states: nq }
}

pub(crate) fn fmt_delta(d: i8) -> String {
    if d > 0 {
        format!("+{d}")
    } else {
        d.to_string()
    }
}

/// Finite unfolding over `Q × {0..cap}`; vertex of `p(i)` is `i * |Q| + p`.
#[derive(Clone, Debug)]
pub struct TruncatedMdp {
    pub mdp: FiniteMdp,
    pub num_states: usize,
    pub cap: usize,
}

impl TruncatedMdp {
    pub fn vertex(&self, p: usize, i: usize) -> usize {
        i * self.num_states + p
    }

    pub fn config(&self, v: usize) -> (usize, usize) {
        (v % self.num_states, v / self.num_states)
    }
}

/// Level 0 follows zero rules, levels `1..cap` positive rules. Level `cap`
/// is absorbing when `absorb_above`; otherwise it follows positive rules
/// with the counter clamped at `cap`.
pub fn truncated_unfolding(a: &OcMdp, cap: usize, absorb_above: bool) -> TruncatedMdp {
    assert!(cap >= 1, "cap must be positive");
    let nq = a.num_states();
    let total = nq * (cap + 1);
    let mut names = Vec::with_capacity(total);
    let mut owner = Vec::with_capacity(total);
    let mut succ = Vec::with_capacity(total);
    let mut prob = Vec::with_capacity(total);
    for i in 0..=cap {
        for p in 0..nq {
            names.push(format!("{}({i})", a.name(p)));
            if i == cap && absorb_above {
                owner.push(Owner::Probabilistic);
                succ.push(vec![i * nq + p]);
                prob.push(vec![Rational::one()]);
                continue;
            }
            owner.push(a.owner(p));
            let (out, rules) = a.rules_at(p, i as i64);
            let mut s: Vec<usize> = Vec::new();
            let mut pr: Vec<Rational> = Vec::new();
            for &ri in out {
                let r = &rules[ri];
                let j = (i as i64 + r.delta as i64).min(cap as i64) as usize;
                let w = j * nq + r.to;
                match s.iter().position(|&x| x == w) {
                    Some(k) => pr[k] += OcMdp::rule_prob(r),
                    None => {
                        s.push(w);
                        pr.push(OcMdp::rule_prob(r));
                    }
                }
            }
            if a.is_controlled(p) {
                pr.clear();
            }
            succ.push(s);
            prob.push(pr);
        }
    }
    let mdp = FiniteMdp::new(names, owner, vec![0; total], succ, prob).expect("unfolding of a valid OC-MDP");
    TruncatedMdp { mdp, num_states: nq, cap }
}
