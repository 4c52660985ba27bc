//! Almost-sure non-positive mean payoff: the winning set and a single MD
//! strategy witnessing it from every winning vertex.

use std::collections::BTreeSet;

use num_traits::Signed;
use thiserror::Error;

use crate::chain;
use crate::finmdp::{self, chain_with_reward};
use crate::graph;
use crate::model::{FiniteMdp, MdStrategy};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QualMpError {
    #[error("conflicting edges out of vertex {0}")]
    Conflict(usize),
    #[error("edge {0} -> {1} does not exist")]
    NotAnEdge(usize, usize),
}

/// MD strategy following the edges `t`; other controlled vertices take
/// their lowest-index successor.
pub fn md_from_edges(m: &FiniteMdp, t: &[(usize, usize)]) -> Result<MdStrategy, QualMpError> {
    let mut s = MdStrategy::lowest(m);
    let mut fixed = vec![false; m.num_vertices()];
    for &(u, v) in t {
        if !m.is_controlled(u) {
            continue;
        }
        if !m.succ(u).contains(&v) {
            return Err(QualMpError::NotAnEdge(u, v));
        }
        if fixed[u] && s.get(u) != Some(v) {
            return Err(QualMpError::Conflict(u));
        }
        fixed[u] = true;
        s.set(u, v);
    }
    Ok(s)
}

/// Whether every BSCC of `m⟨s⟩` reachable from `v` has mean reward ≤ 0.
pub fn mp_witness_holds(m: &FiniteMdp, s: &MdStrategy, v: usize) -> bool {
    let c = chain::induced_chain(m, s).expect("total strategy");
    let reach = graph::forward_reach(&c.adjacency(), &[v]);
    chain::bsccs(&c).iter().filter(|b| reach[b.pivot()]).all(|b| !chain::mean_reward_of_bscc(&c, b).is_positive())
}

/// Returns `(A, σ)`: `A[v]` iff some MD strategy makes the mean payoff from
/// `v` non-positive almost surely, and `σ` does so from every `v` in `A`.
///
/// The mean-payoff minimization uses the working reward `r̂` (zeroed on the
/// current `A`), and vertices already in `A` are not extracted again.
pub fn qual_mp(m: &FiniteMdp) -> (Vec<bool>, MdStrategy) {
    let n = m.num_vertices();
    let mut r_hat: Vec<i64> = m.rewards().iter().map(|&r| r as i64).collect();
    let mut in_a = vec![false; n];
    let mut t: Vec<(usize, usize)> = Vec::new();
    let mut pending: BTreeSet<usize> = (0..n).collect();
    let mut cache: Option<(MdStrategy, finmdp::GainBias)> = None;
    let mut warm: Option<MdStrategy> = None;
    while let Some(s) = pending.pop_first() {
        if in_a[s] {
            continue;
        }
        let (rho, gb) = cache.get_or_insert_with(|| finmdp::min_mean_policy(m, &r_hat, warm.as_ref()));
        if gb.gain[s].is_positive() {
            continue;
        }
        let c = chain_with_reward(m, rho, &r_hat);
        let reach = graph::forward_reach(&c.adjacency(), &[s]);
        let comp = chain::bsccs(&c)
            .into_iter()
            .filter(|b| reach[b.pivot()] && b.members.iter().all(|&u| !in_a[u]))
            .find(|b| !chain::mean_reward_of_bscc(&c, b).is_positive())
            .expect("a non-positive BSCC outside A is reachable");
        let mut target = in_a.clone();
        for &u in &comp.members {
            target[u] = true;
        }
        let (sure, tau) = graph::almost_sure_reach(m, &target);
        for &u in &comp.members {
            if m.is_controlled(u) {
                t.push((u, rho.get(u).unwrap()));
            }
        }
        for u in 0..n {
            if sure[u] && !target[u] && m.is_controlled(u) {
                t.push((u, tau[u].expect("attractor choice on the winning region")));
            }
        }
        for u in 0..n {
            if sure[u] {
                in_a[u] = true;
                r_hat[u] = 0;
            }
        }
        warm = cache.take().map(|(rho, _)| rho);
        if !in_a[s] {
            pending.insert(s);
        }
        debug_assert!(closed_under(m, &md_from_edges(m, &t).unwrap(), &in_a));
    }
    let sigma = md_from_edges(m, &t).expect("edges are added once per vertex");
    (in_a, sigma)
}

/// No path leaves `set` in `m⟨s⟩`.
fn closed_under(m: &FiniteMdp, s: &MdStrategy, set: &[bool]) -> bool {
    (0..m.num_vertices()).filter(|&v| set[v]).all(|v| {
        if m.is_controlled(v) {
            set[s.get(v).unwrap()]
        } else {
            m.succ(v).iter().all(|&w| set[w])
        }
    })
}
