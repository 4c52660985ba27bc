//! Cover-negative objectives: the decreasing expansion, qualitative and
//! quantitative CN on reward MDPs, memory elimination, and the OC-MDP
//! wrapper producing counter-oblivious strategies.

use std::collections::{hash_map, HashMap, VecDeque};
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::chain::{self, MarkovChain};
use crate::finmdp;
use crate::graph;
use crate::model::{
    to_boundaryless_reward_mdp, CmdStrategy, FdStrategy, FiniteMdp, MdStrategy, OcMdp, Owner, Rational,
};
use crate::qualmp;

/// Reachable expansions above this many vertices are not attempted by
/// [`QualCnRoute::Auto`].
pub const DEFAULT_EXPANSION_BUDGET: usize = 5000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnError {
    #[error("ambiguous vertex `{0}` has no memory state with non-positive expected return and a negative return path")]
    NoEligiblePick(String),
    #[error("memory elimination did not settle within {0} rounds")]
    TooManyRounds(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DPrimeVertex {
    Triple { u: usize, n: usize, m: usize },
    Quad { u: usize, n: usize, m: usize, v: usize },
    Div,
}

/// The expansion together with the meaning of each of its vertices.
#[derive(Clone, Debug)]
pub struct DPrime {
    pub mdp: FiniteMdp,
    pub vertices: Vec<DPrimeVertex>,
    pub bound: usize,
    index: HashMap<DPrimeVertex, usize>,
}

impl DPrime {
    pub fn index_of(&self, x: DPrimeVertex) -> Option<usize> {
        self.index.get(&x).copied()
    }

    /// The checkpoint `(v,1,0)`.
    pub fn checkpoint(&self, v: usize) -> Option<usize> {
        self.index_of(DPrimeVertex::Triple { u: v, n: 1, m: 0 })
    }
}

fn dp_name(m: &FiniteMdp, x: DPrimeVertex) -> String {
    match x {
        DPrimeVertex::Triple { u, n, m: k } => format!("({},{n},{k})", m.name(u)),
        DPrimeVertex::Quad { u, n, m: k, v } => format!("[{},{n},{k},{}]", m.name(u), m.name(v)),
        DPrimeVertex::Div => "div".to_string(),
    }
}

impl fmt::Display for DPrimeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DPrimeVertex::Triple { u, n, m } => write!(f, "({u},{n},{m})"),
            DPrimeVertex::Quad { u, n, m, v } => write!(f, "[{u},{n},{m},{v}]"),
            DPrimeVertex::Div => write!(f, "div"),
        }
    }
}

fn dp_successors(g: &FiniteMdp, bound: usize, x: DPrimeVertex) -> Vec<(DPrimeVertex, Rational)> {
    let one = Rational::one;
    match x {
        DPrimeVertex::Triple { u, n, m } => {
            if n == 0 {
                g.succ(u).iter().map(|&v| (DPrimeVertex::Quad { u, n: 1, m: 0, v }, one())).collect()
            } else if m == bound {
                vec![(DPrimeVertex::Div, one())]
            } else {
                g.succ(u).iter().map(|&v| (DPrimeVertex::Quad { u, n, m, v }, one())).collect()
            }
        }
        DPrimeVertex::Quad { u, n, m, v } => {
            let n2 = n as i64 + g.reward(u) as i64;
            let next = |w: usize| {
                if m + 1 > bound || n2 < 0 {
                    // only for vertices no checkpoint reaches
                    DPrimeVertex::Div
                } else {
                    DPrimeVertex::Triple { u: w, n: (n2 as usize).min(bound), m: m + 1 }
                }
            };
            if g.is_controlled(u) {
                vec![(next(v), one())]
            } else {
                g.succ(u)
                    .iter()
                    .zip(g.probs(u))
                    .map(|(&w, p)| {
                        (if w == v { next(v) } else { DPrimeVertex::Triple { u: w, n: 1, m: 0 } }, p.clone())
                    })
                    .collect()
            }
        }
        DPrimeVertex::Div => vec![(DPrimeVertex::Div, one())],
    }
}

fn build_dprime(
    g: &FiniteMdp,
    bound: usize,
    vertices: Vec<DPrimeVertex>,
    index: HashMap<DPrimeVertex, usize>,
) -> DPrime {
    let mut names = Vec::with_capacity(vertices.len());
    let mut owner = Vec::with_capacity(vertices.len());
    let mut reward = Vec::with_capacity(vertices.len());
    let mut succ = Vec::with_capacity(vertices.len());
    let mut prob = Vec::with_capacity(vertices.len());
    for &x in &vertices {
        names.push(dp_name(g, x));
        let (o, r) = match x {
            DPrimeVertex::Triple { .. } => (Owner::Controlled, 0),
            DPrimeVertex::Quad { u, .. } => (g.owner(u), g.reward(u)),
            DPrimeVertex::Div => (Owner::Controlled, 1),
        };
        owner.push(o);
        reward.push(r);
        let out = dp_successors(g, bound, x);
        succ.push(out.iter().map(|(y, _)| index[y]).collect());
        prob.push(if o == Owner::Probabilistic { out.into_iter().map(|(_, p)| p).collect() } else { Vec::new() });
    }
    let mdp = FiniteMdp::new(names, owner, reward, succ, prob).expect("expansion is a valid MDP");
    DPrime { mdp, vertices, bound, index }
}

/// The complete expansion: every `(u,n,m)` and `[u,n,m,v]` with
/// `0 <= n,m <= |V|²+1`, plus `div`.
pub fn decreasing_expand(g: &FiniteMdp) -> DPrime {
    let nv = g.num_vertices();
    let bound = nv * nv + 1;
    let mut vertices = Vec::new();
    for u in 0..nv {
        for n in 0..=bound {
            for m in 0..=bound {
                vertices.push(DPrimeVertex::Triple { u, n, m });
            }
        }
    }
    for u in 0..nv {
        for &v in g.succ(u) {
            for n in 0..=bound {
                for m in 0..=bound {
                    vertices.push(DPrimeVertex::Quad { u, n, m, v });
                }
            }
        }
    }
    vertices.push(DPrimeVertex::Div);
    let index = vertices.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    build_dprime(g, bound, vertices, index)
}

/// The part of the expansion reachable from the checkpoints `(v,1,0)`, in
/// breadth-first order. `None` when it exceeds `limit` vertices.
pub fn decreasing_expand_reachable(g: &FiniteMdp, limit: Option<usize>) -> Option<DPrime> {
    let nv = g.num_vertices();
    let bound = nv * nv + 1;
    let mut vertices: Vec<DPrimeVertex> = Vec::new();
    let mut index: HashMap<DPrimeVertex, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for u in 0..nv {
        let x = DPrimeVertex::Triple { u, n: 1, m: 0 };
        index.insert(x, vertices.len());
        vertices.push(x);
        queue.push_back(x);
    }
    while let Some(x) = queue.pop_front() {
        for (y, _) in dp_successors(g, bound, x) {
            if let hash_map::Entry::Vacant(e) = index.entry(y) {
                e.insert(vertices.len());
                vertices.push(y);
                if limit.is_some_and(|l| vertices.len() > l) {
                    return None;
                }
                queue.push_back(y);
            }
        }
    }
    Some(build_dprime(g, bound, vertices, index))
}

/// Finite-memory strategy on `g` simulating the MD strategy `sigma` on the
/// expansion. Memory states are the expansion's quads plus a start state.
pub fn lift_to_fd(g: &FiniteMdp, dp: &DPrime, sigma: &MdStrategy) -> FdStrategy {
    let nv = g.num_vertices();
    let quads: Vec<usize> =
        (0..dp.vertices.len()).filter(|&i| matches!(dp.vertices[i], DPrimeVertex::Quad { .. })).collect();
    let mut mem_of = vec![usize::MAX; dp.vertices.len()];
    for (k, &i) in quads.iter().enumerate() {
        mem_of[i] = k;
    }
    let start = quads.len();
    let memory = quads.len() + 1;
    // memory after the expansion chooses at triple `t`; arbitrary (0) at div
    let after = |t: usize| -> usize {
        let c = sigma.get(t).expect("triples are controlled");
        if mem_of[c] == usize::MAX {
            0
        } else {
            mem_of[c]
        }
    };
    let mut step = vec![0usize; memory * nv];
    for u2 in 0..nv {
        if let Some(t) = dp.checkpoint(u2) {
            step[start * nv + u2] = after(t);
        }
    }
    for (k, &i) in quads.iter().enumerate() {
        for &t in dp.mdp.succ(i) {
            let u2 = match dp.vertices[t] {
                DPrimeVertex::Triple { u, .. } => u,
                _ => continue,
            };
            step[k * nv + u2] = after(t);
        }
    }
    let mut choice = vec![0usize; nv * memory];
    for v in 0..nv {
        for k in 0..memory {
            choice[v * memory + k] = g.succ(v)[0];
        }
    }
    for (k, &i) in quads.iter().enumerate() {
        if let DPrimeVertex::Quad { u, v, .. } = dp.vertices[i] {
            choice[u * memory + k] = v;
        }
    }
    FdStrategy::new(g, memory, start, step, choice).expect("lifted strategy is well formed")
}

/// Memory elimination for CN: an MD strategy winning CN almost surely from
/// every start in `starts` from which `fd` does.
///
/// All starts share one product chain; each round fixes one memory state
/// for an ambiguous vertex by redirecting every edge into that vertex.
pub fn fd_to_md(g: &FiniteMdp, fd: &FdStrategy, starts: &[usize]) -> Result<MdStrategy, CnError> {
    let nv = g.num_vertices();
    let mem = fd.memory_size();
    // reachable product states (u, k), k = memory after reading u
    let mut id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut states: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut init = Vec::new();
    for &s in starts {
        let x = (s, fd.step(fd.initial(), s));
        let i = *id.entry(x).or_insert_with(|| {
            states.push(x);
            queue.push_back(x);
            states.len() - 1
        });
        init.push(i);
    }
    let base_succ = |(u, k): (usize, usize)| -> Vec<(usize, Rational)> {
        if g.is_controlled(u) {
            vec![(fd.choice(u, k), Rational::one())]
        } else {
            g.succ(u).iter().copied().zip(g.probs(u).iter().cloned()).collect()
        }
    };
    while let Some(x) = queue.pop_front() {
        for (w, _) in base_succ(x) {
            let y = (w, fd.step(x.1, w));
            id.entry(y).or_insert_with(|| {
                states.push(y);
                queue.push_back(y);
                states.len() - 1
            });
        }
    }
    debug_assert!(states.iter().all(|&(_, k)| k < mem));
    let mut redirect: Vec<Option<usize>> = vec![None; nv];
    for round in 0..=nv {
        let succ: Vec<Vec<(usize, Rational)>> = states
            .iter()
            .map(|&x| {
                base_succ(x)
                    .into_iter()
                    .map(|(w, p)| {
                        let k = redirect[w].unwrap_or_else(|| fd.step(x.1, w));
                        (id[&(w, k)], p)
                    })
                    .collect()
            })
            .collect();
        let reward = states.iter().map(|&(u, _)| g.reward(u) as i64).collect();
        let c = MarkovChain::new(succ, reward).expect("product of a valid MDP");
        let reach = graph::forward_reach(&c.adjacency(), &init);
        let mut in_c = vec![false; states.len()];
        for b in chain::bsccs(&c) {
            if reach[b.pivot()] {
                for &x in &b.members {
                    in_c[x] = true;
                }
            }
        }
        let mut seen: Vec<Option<usize>> = vec![None; nv];
        let mut ambiguous = vec![false; nv];
        for (x, &(u, k)) in states.iter().enumerate() {
            if in_c[x] {
                match seen[u] {
                    None => seen[u] = Some(k),
                    Some(k0) if k0 != k => ambiguous[u] = true,
                    _ => {}
                }
            }
        }
        if !ambiguous.iter().any(|&a| a) {
            let target: Vec<bool> = seen.iter().map(Option::is_some).collect();
            let (rho, _) = finmdp::max_reach(g, &target);
            let mut sigma = MdStrategy::lowest(g);
            for u in 0..nv {
                if !g.is_controlled(u) {
                    continue;
                }
                match seen[u] {
                    Some(k) => sigma.set(u, fd.choice(u, k)),
                    None => sigma.set(u, rho.get(u).expect("controlled")),
                }
            }
            return Ok(sigma);
        }
        if round == nv {
            break;
        }
        let mut order: Vec<usize> = (0..states.len()).filter(|&x| in_c[x] && ambiguous[states[x].0]).collect();
        order.sort_by_key(|&x| states[x]);
        let pick = order.into_iter().find(|&x| {
            let u = states[x].0;
            let returns: Vec<bool> = states.iter().map(|&(w, _)| w == u).collect();
            !chain::expected_return_reward_to(&c, x, &returns).is_positive()
                && chain::negative_return_walk(&c, x, &returns)
        });
        match pick {
            Some(x) => {
                let (u, k) = states[x];
                redirect[u] = Some(k);
            }
            None => {
                let u = (0..nv).find(|&u| ambiguous[u]).unwrap();
                return Err(CnError::NoEligiblePick(g.name(u).to_string()));
            }
        }
    }
    Err(CnError::TooManyRounds(nv))
}

/// How [`qual_cn_with`] decides the CN value-one set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QualCnRoute {
    /// Qual-MP on the reachable expansion, lift, memory elimination.
    Expansion,
    /// End-component analysis of the minimum mean payoff.
    Direct,
    /// `Expansion` when the reachable expansion has at most `budget`
    /// vertices, `Direct` otherwise.
    Auto { budget: usize },
}

impl Default for QualCnRoute {
    fn default() -> Self {
        QualCnRoute::Auto { budget: DEFAULT_EXPANSION_BUDGET }
    }
}

/// Vertices with CN value one and an MD strategy winning CN almost surely
/// from all of them.
pub fn qual_cn(g: &FiniteMdp) -> (Vec<bool>, MdStrategy) {
    qual_cn_with(g, QualCnRoute::default())
}

pub fn qual_cn_with(g: &FiniteMdp, route: QualCnRoute) -> (Vec<bool>, MdStrategy) {
    match route {
        QualCnRoute::Expansion => {
            let dp = decreasing_expand_reachable(g, None).expect("no limit");
            qual_cn_expansion(g, &dp)
        }
        QualCnRoute::Direct => qual_cn_direct(g),
        QualCnRoute::Auto { budget } => match decreasing_expand_reachable(g, Some(budget)) {
            Some(dp) => qual_cn_expansion(g, &dp),
            None => qual_cn_direct(g),
        },
    }
}

fn qual_cn_expansion(g: &FiniteMdp, dp: &DPrime) -> (Vec<bool>, MdStrategy) {
    let (a2, s2) = qualmp::qual_mp(&dp.mdp);
    let a: Vec<bool> = (0..g.num_vertices()).map(|v| a2[dp.checkpoint(v).expect("seeded")]).collect();
    let fd = lift_to_fd(g, dp, &s2);
    let starts: Vec<usize> = (0..g.num_vertices()).filter(|&v| a[v]).collect();
    let sigma = fd_to_md(g, &fd, &starts).expect("lifted strategy wins CN from every start in A");
    (a, sigma)
}

/// Sub-MDP on `members`, controlled vertices keeping the edges accepted by
/// `keep`. Returns the MDP and the local-to-global map.
fn restrict(g: &FiniteMdp, members: &[usize], keep: impl Fn(usize, usize) -> bool) -> (FiniteMdp, Vec<usize>) {
    let mut local = HashMap::new();
    for (i, &v) in members.iter().enumerate() {
        local.insert(v, i);
    }
    let mut succ = Vec::with_capacity(members.len());
    let mut prob = Vec::with_capacity(members.len());
    for &v in members {
        if g.is_controlled(v) {
            succ.push(g.succ(v).iter().filter(|&&w| local.contains_key(&w) && keep(v, w)).map(|w| local[w]).collect());
            prob.push(Vec::new());
        } else {
            succ.push(g.succ(v).iter().map(|w| local[w]).collect());
            prob.push(g.probs(v).to_vec());
        }
    }
    let sub = FiniteMdp::new(
        members.iter().map(|&v| g.name(v).to_string()).collect(),
        members.iter().map(|&v| g.owner(v)).collect(),
        members.iter().map(|&v| g.reward(v)).collect(),
        succ,
        prob,
    )
    .expect("end components are closed");
    (sub, members.to_vec())
}

/// A negative-weight cycle (edge weight = reward of its source), as a
/// vertex sequence whose last element leads back to the first.
fn negative_cycle(g: &FiniteMdp) -> Option<Vec<usize>> {
    let n = g.num_vertices();
    let mut dist = vec![0i64; n];
    let mut pred = vec![usize::MAX; n];
    let mut last = None;
    for _ in 0..n {
        last = None;
        for x in 0..n {
            for &y in g.succ(x) {
                let d = dist[x] + g.reward(x) as i64;
                if d < dist[y] {
                    dist[y] = d;
                    pred[y] = x;
                    last = Some(y);
                }
            }
        }
        last?;
    }
    let mut x = last?;
    for _ in 0..n {
        x = pred[x];
    }
    let mut cycle = vec![x];
    let mut y = pred[x];
    while y != x {
        cycle.push(y);
        y = pred[y];
    }
    cycle.reverse();
    Some(cycle)
}

fn qual_cn_direct(g: &FiniteMdp) -> (Vec<bool>, MdStrategy) {
    let n = g.num_vertices();
    let mut good = vec![false; n];
    let mut inner: Vec<Option<usize>> = vec![None; n];
    for mec in graph::mecs(g, &vec![true; n]) {
        let (sub, back) = restrict(g, &mec, |_, _| true);
        let reward: Vec<i64> = sub.rewards().iter().map(|&r| r as i64).collect();
        let (pol, gb) = finmdp::min_mean_policy(&sub, &reward, None);
        let gain = gb.gain[0].clone();
        debug_assert!(gb.gain.iter().all(|x| *x == gain), "end components have a constant optimal gain");
        if gain.is_negative() {
            for (i, &v) in back.iter().enumerate() {
                good[v] = true;
                inner[v] = pol.get(i).map(|w| back[w]);
            }
        } else if gain.is_zero() {
            // edges attaining the optimality equation h(v) = r(v) + h(w)
            let h = &gb.bias;
            let tight = |i: usize, j: usize| Rational::from_integer((sub.reward(i) as i64).into()) + &h[j] == h[i];
            let keep_local = |v: usize, w: usize| {
                let (i, j) = (back.iter().position(|&x| x == v).unwrap(), back.iter().position(|&x| x == w).unwrap());
                tight(i, j)
            };
            let (tsub, tback) = restrict(g, &mec, keep_local);
            for t in graph::mecs(&tsub, &vec![true; tsub.num_vertices()]) {
                let (esub, eback) = restrict(&tsub, &t, |_, _| true);
                let Some(cycle) = negative_cycle(&esub) else { continue };
                let mut on_cycle = vec![false; esub.num_vertices()];
                let mut next = vec![usize::MAX; esub.num_vertices()];
                for (i, &x) in cycle.iter().enumerate() {
                    on_cycle[x] = true;
                    next[x] = cycle[(i + 1) % cycle.len()];
                }
                let (_, attr) = graph::almost_sure_reach(&esub, &on_cycle);
                for (i, &x) in eback.iter().enumerate() {
                    let v = tback[x];
                    good[v] = true;
                    if esub.is_controlled(i) {
                        let w = if on_cycle[i] { next[i] } else { attr[i].expect("end component reaches the cycle") };
                        inner[v] = Some(tback[eback[w]]);
                    }
                }
            }
        }
    }
    let (win, attr) = graph::almost_sure_reach(g, &good);
    let mut sigma = MdStrategy::lowest(g);
    for v in 0..n {
        if !g.is_controlled(v) {
            continue;
        }
        let c = if good[v] {
            inner[v]
        } else if win[v] {
            attr[v]
        } else {
            None
        };
        if let Some(w) = c {
            sigma.set(v, w);
        }
    }
    (win, sigma)
}

/// CN values of every vertex and an optimal MD strategy: value-one
/// vertices play the qualitative strategy, the rest maximize the chance
/// of reaching them.
pub fn solve_cn(g: &FiniteMdp) -> (Vec<Rational>, MdStrategy) {
    solve_cn_with(g, QualCnRoute::default())
}

pub fn solve_cn_with(g: &FiniteMdp, route: QualCnRoute) -> (Vec<Rational>, MdStrategy) {
    let (a, tau) = qual_cn_with(g, route);
    let (sigma_r, val) = finmdp::max_reach(g, &a);
    let mut sigma = MdStrategy::lowest(g);
    for v in 0..g.num_vertices() {
        if g.is_controlled(v) {
            let src = if a[v] { &tau } else { &sigma_r };
            sigma.set(v, src.get(v).expect("controlled"));
        }
    }
    (val, sigma)
}

/// CN values per control state (independent of the counter) and an
/// optimal counter-oblivious selector.
pub fn ocmdp_cn(a: &OcMdp) -> (Vec<Rational>, CmdStrategy) {
    let b = to_boundaryless_reward_mdp(a);
    let (val, sigma) = solve_cn(&b.mdp);
    ((0..a.num_states()).map(|p| val[b.state_vertex(p)].clone()).collect(), b.cmd_of_md(&sigma))
}

/// Control states with CN value one and a selector winning from all of
/// them.
pub fn ocmdp_qual_cn(a: &OcMdp) -> (Vec<bool>, CmdStrategy) {
    let b = to_boundaryless_reward_mdp(a);
    let (win, sigma) = qual_cn(&b.mdp);
    ((0..a.num_states()).map(|p| win[b.state_vertex(p)]).collect(), b.cmd_of_md(&sigma))
}

/// Whether `sigma` wins CN almost surely from `v`: every BSCC reachable in
/// the induced chain satisfies the CN criterion.
pub fn cn_witness_holds(g: &FiniteMdp, sigma: &MdStrategy, v: usize) -> bool {
    let c = chain::induced_chain(g, sigma).expect("total strategy");
    let good = chain::cn_good_states(&c);
    chain::reach_probability_in_chain(&c, v, &good) == Rational::one()
}

/// Exact CN probability from every vertex under a fixed MD strategy.
pub fn cn_value_of(g: &FiniteMdp, sigma: &MdStrategy) -> Vec<Rational> {
    let c = chain::induced_chain(g, sigma).expect("total strategy");
    let good = chain::cn_good_states(&c);
    chain::reach_probabilities(&c, &good)
}
