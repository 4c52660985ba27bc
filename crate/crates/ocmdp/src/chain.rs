//! Exact analysis of finite Markov chains with integer state rewards.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::graph;
use crate::linalg;
use crate::model::{FiniteMdp, MdStrategy, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("strategy undefined at controlled vertex `{0}`")]
    Undefined(String),
    #[error("strategy picks a non-edge at `{0}`")]
    NotAnEdge(String),
    #[error("state {0}: out-probabilities must be positive and sum to 1")]
    Distribution(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkovChain {
    succ: Vec<Vec<(usize, Rational)>>,
    reward: Vec<i64>,
}

impl MarkovChain {
    pub fn new(succ: Vec<Vec<(usize, Rational)>>, reward: Vec<i64>) -> Result<Self, ChainError> {
        assert_eq!(succ.len(), reward.len(), "reward table length");
        for (s, out) in succ.iter().enumerate() {
            let mut sum = Rational::zero();
            for (t, p) in out {
                if *t >= succ.len() || !p.is_positive() {
                    return Err(ChainError::Distribution(s));
                }
                sum += p;
            }
            if !sum.is_one() {
                return Err(ChainError::Distribution(s));
            }
        }
        Ok(MarkovChain { succ, reward })
    }

    pub fn num_states(&self) -> usize {
        self.succ.len()
    }

    pub fn succ(&self, s: usize) -> &[(usize, Rational)] {
        &self.succ[s]
    }

    pub fn reward(&self, s: usize) -> i64 {
        self.reward[s]
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.succ.iter().map(|o| o.iter().map(|(t, _)| *t).collect()).collect()
    }
}

/// Bottom strongly connected component; `members` sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bscc {
    pub members: Vec<usize>,
}

impl Bscc {
    pub fn pivot(&self) -> usize {
        self.members[0]
    }

    fn local(&self, n: usize) -> Vec<Option<usize>> {
        let mut l = vec![None; n];
        for (i, &s) in self.members.iter().enumerate() {
            l[s] = Some(i);
        }
        l
    }
}

pub fn induced_chain(m: &FiniteMdp, s: &MdStrategy) -> Result<MarkovChain, ChainError> {
    let n = m.num_vertices();
    let mut succ = Vec::with_capacity(n);
    for v in 0..n {
        if m.is_controlled(v) {
            let w = s.get(v).ok_or_else(|| ChainError::Undefined(m.name(v).to_string()))?;
            if !m.succ(v).contains(&w) {
                return Err(ChainError::NotAnEdge(m.name(v).to_string()));
            }
            succ.push(vec![(w, Rational::one())]);
        } else {
            succ.push(m.succ(v).iter().copied().zip(m.probs(v).iter().cloned()).collect());
        }
    }
    Ok(MarkovChain { succ, reward: m.rewards().iter().map(|&r| r as i64).collect() })
}

pub fn bsccs(c: &MarkovChain) -> Vec<Bscc> {
    let adj = c.adjacency();
    graph::bottom_sccs(&adj, &vec![true; c.num_states()]).into_iter().map(|members| Bscc { members }).collect()
}

/// Invariant distribution of `b`, parallel to `b.members`.
pub fn stationary_distribution(c: &MarkovChain, b: &Bscc) -> Vec<Rational> {
    let k = b.members.len();
    let local = b.local(c.num_states());
    // row j (j > 0): mu_j - sum_i mu_i P(i, j) = 0; row 0: sum mu = 1
    let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); k];
    rows[0] = (0..k).map(|i| (i, Rational::one())).collect();
    for j in 1..k {
        rows[j].push((j, Rational::one()));
    }
    for (i, &s) in b.members.iter().enumerate() {
        for (t, p) in c.succ(s) {
            let j = local[*t].expect("edge leaves BSCC");
            if j > 0 {
                rows[j].push((i, -p.clone()));
            }
        }
    }
    let mut rhs = vec![Rational::zero(); k];
    rhs[0] = Rational::one();
    linalg::solve(rows, rhs).expect("BSCC stationary system is nonsingular")
}

/// Long-run average reward `a_C`.
pub fn mean_reward_of_bscc(c: &MarkovChain, b: &Bscc) -> Rational {
    let mu = stationary_distribution(c, b);
    b.members.iter().zip(mu).fold(Rational::zero(), |acc, (&s, m)| acc + m * Rational::from_integer(c.reward(s).into()))
}

/// Expected reward accumulated from `start` until the first later visit to
/// a state in `returns`, counting the reward of every state left. Requires
/// that such a visit happens almost surely.
pub fn expected_return_reward_to(c: &MarkovChain, start: usize, returns: &[bool]) -> Rational {
    // states reachable from start before hitting `returns`
    let n = c.num_states();
    let mut idx = vec![usize::MAX; n];
    let mut order = vec![start];
    idx[start] = 0;
    let mut q = 0;
    while q < order.len() {
        let x = order[q];
        q += 1;
        for (y, _) in c.succ(x) {
            if !returns[*y] && idx[*y] == usize::MAX {
                idx[*y] = order.len();
                order.push(*y);
            }
        }
    }
    let mut rows = Vec::with_capacity(order.len());
    let mut rhs = Vec::with_capacity(order.len());
    for (i, &x) in order.iter().enumerate() {
        let mut row = vec![(i, Rational::one())];
        for (y, p) in c.succ(x) {
            if !returns[*y] {
                row.push((idx[*y], -p.clone()));
            }
        }
        rows.push(row);
        rhs.push(Rational::from_integer(c.reward(x).into()));
    }
    let h = linalg::solve(rows, rhs).expect("return is almost sure");
    h[0].clone()
}

pub fn expected_return_reward(c: &MarkovChain, b: &Bscc, u: usize) -> Rational {
    assert!(b.members.contains(&u), "pivot outside the BSCC");
    let mut ret = vec![false; c.num_states()];
    ret[u] = true;
    expected_return_reward_to(c, u, &ret)
}

/// Whether some walk from `start` that first re-enters `returns` at its
/// last step has negative accumulated reward. Bellman-Ford over the
/// non-return states with edge weight `r(source)`.
pub fn negative_return_walk(c: &MarkovChain, start: usize, returns: &[bool]) -> bool {
    let n = c.num_states();
    // node n = copy of start as source, node n + 1 = return sink
    let src = n;
    let sink = n + 1;
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    let reach = {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        for (y, _) in c.succ(start) {
            if !returns[*y] && !seen[*y] {
                seen[*y] = true;
                stack.push(*y);
            }
        }
        while let Some(x) = stack.pop() {
            for (y, _) in c.succ(x) {
                if !returns[*y] && !seen[*y] {
                    seen[*y] = true;
                    stack.push(*y);
                }
            }
        }
        seen
    };
    for (y, _) in c.succ(start) {
        edges.push((src, if returns[*y] { sink } else { *y }, c.reward(start)));
    }
    for x in 0..n {
        if reach[x] {
            for (y, _) in c.succ(x) {
                edges.push((x, if returns[*y] { sink } else { *y }, c.reward(x)));
            }
        }
    }
    let nodes = reach.iter().filter(|&&r| r).count() + 2;
    let mut dist: Vec<Option<i64>> = vec![None; n + 2];
    dist[src] = Some(0);
    for round in 0..nodes {
        let mut changed = false;
        for &(x, y, w) in &edges {
            if let Some(dx) = dist[x] {
                if dist[y].is_none_or(|dy| dx + w < dy) {
                    dist[y] = Some(dx + w);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        if round + 1 == nodes {
            // still relaxing: a negative cycle is reachable
            return true;
        }
    }
    dist[sink].is_some_and(|d| d < 0)
}

pub fn has_negative_return_cycle(c: &MarkovChain, b: &Bscc) -> bool {
    let u = b.pivot();
    let mut ret = vec![false; c.num_states()];
    ret[u] = true;
    negative_return_walk(c, u, &ret)
}

/// The CN criterion for a BSCC: `ER_u <= 0` and `P(R_u < 0) > 0` at the pivot.
pub fn cn_holds_in_bscc(c: &MarkovChain, b: &Bscc) -> bool {
    cn_holds_at(c, b, b.pivot())
}

pub fn cn_holds_at(c: &MarkovChain, b: &Bscc, u: usize) -> bool {
    let mut ret = vec![false; c.num_states()];
    ret[u] = true;
    !expected_return_reward(c, b, u).is_positive() && negative_return_walk(c, u, &ret)
}

/// Probability of ever hitting `target`, for every state.
pub fn reach_probabilities(c: &MarkovChain, target: &[bool]) -> Vec<Rational> {
    let n = c.num_states();
    let mut pred = vec![Vec::new(); n];
    for s in 0..n {
        for (t, _) in c.succ(s) {
            pred[*t].push(s);
        }
    }
    let mut can = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !can[s] {
                can[s] = true;
                stack.push(s);
            }
        }
    }
    let unknown: Vec<usize> = (0..n).filter(|&s| can[s] && !target[s]).collect();
    let mut idx = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        idx[s] = i;
    }
    let mut rows = Vec::with_capacity(unknown.len());
    let mut rhs = Vec::with_capacity(unknown.len());
    for &s in &unknown {
        let mut row = vec![(idx[s], Rational::one())];
        let mut b = Rational::zero();
        for (t, p) in c.succ(s) {
            if target[*t] {
                b += p;
            } else if can[*t] {
                row.push((idx[*t], -p.clone()));
            }
        }
        rows.push(row);
        rhs.push(b);
    }
    let x = linalg::solve(rows, rhs).expect("reachability system is nonsingular");
    (0..n)
        .map(|s| {
            if target[s] {
                Rational::one()
            } else if can[s] {
                x[idx[s]].clone()
            } else {
                Rational::zero()
            }
        })
        .collect()
}

pub fn reach_probability_in_chain(c: &MarkovChain, from: usize, target: &[bool]) -> Rational {
    reach_probabilities(c, target).swap_remove(from)
}

/// Union of the BSCCs satisfying the CN criterion.
pub fn cn_good_states(c: &MarkovChain) -> Vec<bool> {
    let mut good = vec![false; c.num_states()];
    for b in bsccs(c) {
        if cn_holds_in_bscc(c, &b) {
            for &s in &b.members {
                good[s] = true;
            }
        }
    }
    good
}

/// Expected long-run average reward from every state.
pub fn gains(c: &MarkovChain) -> Vec<Rational> {
    let n = c.num_states();
    let mut g: Vec<Option<Rational>> = vec![None; n];
    for b in bsccs(c) {
        let a = mean_reward_of_bscc(c, &b);
        for &s in &b.members {
            g[s] = Some(a.clone());
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&s| g[s].is_none()).collect();
    let mut idx = vec![usize::MAX; n];
    for (i, &s) in transient.iter().enumerate() {
        idx[s] = i;
    }
    let mut rows = Vec::with_capacity(transient.len());
    let mut rhs = Vec::with_capacity(transient.len());
    for &s in &transient {
        let mut row = vec![(idx[s], Rational::one())];
        let mut b = Rational::zero();
        for (t, p) in c.succ(s) {
            match &g[*t] {
                Some(gt) => b += p * gt,
                None => row.push((idx[*t], -p.clone())),
            }
        }
        rows.push(row);
        rhs.push(b);
    }
    let x = linalg::solve(rows, rhs).expect("transient system is nonsingular");
    (0..n).map(|s| g[s].clone().unwrap_or_else(|| x[idx[s]].clone())).collect()
}
