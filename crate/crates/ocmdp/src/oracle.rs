//! Independent checks: Monte-Carlo simulation, exhaustive strategy
//! enumeration, truncated termination bounds and random instance
//! generators.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::chain;
use crate::finmdp;
use crate::graph;
use crate::model::{
    rational, to_boundaryless_reward_mdp, truncated_unfolding, Action, CmdStrategy, Config, CounterRegularStrategy,
    FiniteMdp, OcMdp, Owner, Rational, Rule, SolvencyGame,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("strategy undefined at `{state}` with counter {counter}")]
    Undefined { state: String, counter: i64 },
    #[error("strategy space exceeds the bound {0}")]
    BoundExceeded(usize),
    #[error("negative start counter {0} under bounded semantics")]
    NegativeCounter(i64),
    #[error("cap {cap} below start counter {counter}")]
    CapTooSmall { cap: usize, counter: i64 },
}

/// Strategies the simulator can follow.
#[derive(Clone, Copy, Debug)]
pub enum SimStrategy<'a> {
    Cmd(&'a CmdStrategy),
    CounterRegular(&'a CounterRegularStrategy),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimMode {
    /// Runs stop when the counter hits zero.
    Bounded,
    /// Positive rules everywhere; the counter may go negative.
    Boundaryless,
}

#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub steps: u64,
    pub runs: u64,
    pub seed: u64,
    pub mode: SimMode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimReport {
    pub runs: u64,
    pub terminated: u64,
    pub terminated_in_f: u64,
    pub min_counter_seen: i64,
    pub step_cap_hits: u64,
    pub seed: u64,
}

impl fmt::Display for SimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "runs={}", self.runs)?;
        writeln!(f, "terminated={}", self.terminated)?;
        writeln!(f, "terminated_in_F={}", self.terminated_in_f)?;
        writeln!(f, "min_counter_seen={}", self.min_counter_seen)?;
        writeln!(f, "step_cap_hits={}", self.step_cap_hits)?;
        writeln!(f, "seed={}", self.seed)
    }
}

/// Exact sampler for a rational distribution: outcome `i` is drawn when a
/// uniform integer below the common denominator falls under `cum[i]`.
#[derive(Clone, Debug)]
enum Sampler {
    Small { cum: Vec<u64>, den: u64 },
    Big { cum: Vec<BigUint>, den: BigUint },
}

impl Sampler {
    fn new(probs: &[Rational]) -> Sampler {
        let den = probs.iter().fold(num_bigint::BigInt::one(), |acc, p| acc.lcm(p.denom()));
        let mut acc = num_bigint::BigInt::zero();
        let cum: Vec<num_bigint::BigInt> = probs
            .iter()
            .map(|p| {
                acc += p.numer() * (&den / p.denom());
                acc.clone()
            })
            .collect();
        match den.to_u64() {
            Some(d) => Sampler::Small { cum: cum.iter().map(|c| c.to_u64().unwrap()).collect(), den: d },
            None => Sampler::Big {
                cum: cum.iter().map(|c| c.to_biguint().unwrap()).collect(),
                den: den.to_biguint().unwrap(),
            },
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match self {
            Sampler::Small { cum, den } => {
                let x = rng.random_range(0..*den);
                cum.iter().position(|&c| x < c).expect("cumulative mass reaches the denominator")
            }
            Sampler::Big { cum, den } => {
                let x = uniform_below(rng, den);
                cum.iter().position(|c| &x < c).expect("cumulative mass reaches the denominator")
            }
        }
    }
}

/// Rejection sampling of a uniform integer in `0..bound`.
fn uniform_below(rng: &mut ChaCha8Rng, bound: &BigUint) -> BigUint {
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let top = bits % 32;
    loop {
        let mut digits: Vec<u32> = (0..words).map(|_| rng.next_u32()).collect();
        if top != 0 {
            digits[words - 1] &= (1u32 << top) - 1;
        }
        let x = BigUint::new(digits);
        if &x < bound {
            return x;
        }
    }
}

struct RunOutcome {
    terminated: bool,
    in_f: bool,
    min_counter: i64,
    cap_hit: bool,
}

/// Monte-Carlo estimate of termination behaviour from `start`.
///
/// Run `k` draws from a ChaCha8 stream seeded with `opts.seed` on stream
/// number `k`, so reports do not depend on scheduling.
pub fn simulate(a: &OcMdp, s: SimStrategy<'_>, start: Config, opts: SimOptions) -> Result<SimReport, OracleError> {
    if opts.mode == SimMode::Bounded && start.counter < 0 {
        return Err(OracleError::NegativeCounter(start.counter));
    }
    let nq = a.num_states();
    let pos: Vec<Option<Sampler>> = (0..nq)
        .map(|p| {
            (!a.is_controlled(p)).then(|| {
                Sampler::new(
                    &a.positive_out(p).iter().map(|&i| OcMdp::rule_prob(&a.positive_rules()[i])).collect::<Vec<_>>(),
                )
            })
        })
        .collect();
    let outcomes: Vec<Result<RunOutcome, OracleError>> = (0..opts.runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k);
            run_once(a, s, start, opts, &pos, &mut rng)
        })
        .collect();
    let mut rep = SimReport {
        runs: opts.runs,
        terminated: 0,
        terminated_in_f: 0,
        min_counter_seen: start.counter,
        step_cap_hits: 0,
        seed: opts.seed,
    };
    for o in outcomes {
        let o = o?;
        rep.terminated += o.terminated as u64;
        rep.terminated_in_f += o.in_f as u64;
        rep.step_cap_hits += o.cap_hit as u64;
        rep.min_counter_seen = rep.min_counter_seen.min(o.min_counter);
    }
    Ok(rep)
}

fn run_once(
    a: &OcMdp,
    s: SimStrategy<'_>,
    start: Config,
    opts: SimOptions,
    pos: &[Option<Sampler>],
    rng: &mut ChaCha8Rng,
) -> Result<RunOutcome, OracleError> {
    let rules = a.positive_rules();
    let (mut p, mut c) = (start.state, start.counter);
    let mut min_counter = c;
    let mut step = 0u64;
    loop {
        if opts.mode == SimMode::Bounded && c == 0 {
            return Ok(RunOutcome { terminated: true, in_f: a.is_final(p), min_counter, cap_hit: false });
        }
        if step == opts.steps {
            return Ok(RunOutcome { terminated: false, in_f: false, min_counter, cap_hit: true });
        }
        let idx = match &pos[p] {
            Some(sampler) => a.positive_out(p)[sampler.sample(rng)],
            None => {
                let choice = match s {
                    SimStrategy::Cmd(f) => f.get(p),
                    SimStrategy::CounterRegular(f) if c > 0 => f.rule(p, c as u64),
                    SimStrategy::CounterRegular(_) => None,
                };
                choice.ok_or_else(|| OracleError::Undefined { state: a.name(p).to_string(), counter: c })?
            }
        };
        let r = &rules[idx];
        c += r.delta as i64;
        p = r.to;
        min_counter = min_counter.min(c);
        step += 1;
    }
}

/// All CMD selectors in lexicographic order (first controlled state most
/// significant).
pub fn enumerate_cmd(a: &OcMdp, bound: usize) -> Result<Vec<CmdStrategy>, OracleError> {
    let ctl: Vec<usize> = (0..a.num_states()).filter(|&p| a.is_controlled(p)).collect();
    let mut total: usize = 1;
    for &p in &ctl {
        total = total
            .checked_mul(a.positive_out(p).len())
            .filter(|&t| t <= bound)
            .ok_or(OracleError::BoundExceeded(bound))?;
    }
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; ctl.len()];
    loop {
        let mut sel = vec![None; a.num_states()];
        for (j, &p) in ctl.iter().enumerate() {
            sel[p] = Some(a.positive_out(p)[digits[j]]);
        }
        out.push(CmdStrategy::new(sel));
        let mut j = ctl.len();
        loop {
            if j == 0 {
                return Ok(out);
            }
            j -= 1;
            digits[j] += 1;
            if digits[j] < a.positive_out(ctl[j]).len() {
                break;
            }
            digits[j] = 0;
        }
    }
}

/// Probability of the CN objective from `p` under a fixed selector: the
/// chance of reaching a BSCC satisfying the CN criterion.
pub fn cmd_cn_value(a: &OcMdp, s: &CmdStrategy, p: usize) -> Rational {
    let b = to_boundaryless_reward_mdp(a);
    let c = chain::induced_chain(&b.mdp, &b.md_of_cmd(s)).expect("selector is total");
    let good = chain::cn_good_states(&c);
    chain::reach_probability_in_chain(&c, b.state_vertex(p), &good)
}

/// Optimal probability of hitting counter 0 when every counter value up to
/// `cap` is kept and reaching `cap + 1` is absorbing. A lower bound on the
/// termination value, nondecreasing in `cap`.
pub fn truncated_termination_lower_bound(a: &OcMdp, start: Config, cap: usize) -> Result<Rational, OracleError> {
    if start.counter < 0 {
        return Err(OracleError::NegativeCounter(start.counter));
    }
    if start.counter as u64 > cap as u64 {
        return Err(OracleError::CapTooSmall { cap, counter: start.counter });
    }
    let t = truncated_unfolding(a, cap + 1, true);
    let target: Vec<bool> = (0..t.mdp.num_vertices()).map(|v| t.config(v).1 == 0).collect();
    let (_, val) = finmdp::max_reach(&t.mdp, &target);
    Ok(val[t.vertex(start.state, start.counter as usize)].clone())
}

/// ST value-one flags `[level][state]` for levels `0..=levels`, found by
/// trying every counter-oblivious choice of positive and zero rules on the
/// unfolding with counter values above `cap` absorbing. A configuration is
/// black when some choice reaches `F × {0}` almost surely, so the result
/// under-approximates the true value-one set.
pub fn brute_force_st(a: &OcMdp, levels: usize, cap: usize, bound: usize) -> Result<Vec<Vec<bool>>, OracleError> {
    assert!(levels <= cap, "levels above the cap");
    let nq = a.num_states();
    let ctl: Vec<usize> = (0..nq).filter(|&p| a.is_controlled(p)).collect();
    let mut sizes = Vec::new();
    for &p in &ctl {
        sizes.push(a.positive_out(p).len());
        sizes.push(a.zero_out(p).len());
    }
    let mut total: usize = 1;
    for &k in &sizes {
        total = total.checked_mul(k).filter(|&t| t <= bound).ok_or(OracleError::BoundExceeded(bound))?;
    }
    let t = truncated_unfolding(a, cap + 1, true);
    let target: Vec<bool> = (0..t.mdp.num_vertices())
        .map(|v| {
            let (p, i) = t.config(v);
            i == 0 && a.is_final(p)
        })
        .collect();
    let mut black = vec![vec![false; nq]; levels + 1];
    let mut digits = vec![0usize; sizes.len()];
    for _ in 0..total {
        let mut adj: Vec<Vec<usize>> = (0..t.mdp.num_vertices()).map(|v| t.mdp.succ(v).to_vec()).collect();
        for (k, &p) in ctl.iter().enumerate() {
            let pos = &a.positive_rules()[a.positive_out(p)[digits[2 * k]]];
            let zero = &a.zero_rules()[a.zero_out(p)[digits[2 * k + 1]]];
            for i in 0..=cap {
                let r = if i == 0 { zero } else { pos };
                adj[t.vertex(p, i)] = vec![t.vertex(r.to, (i as i64 + r.delta as i64) as usize)];
            }
        }
        let mut radj = vec![Vec::new(); adj.len()];
        for (v, ws) in adj.iter().enumerate() {
            for &w in ws {
                radj[w].push(v);
            }
        }
        let from: Vec<usize> = (0..adj.len()).filter(|&v| target[v]).collect();
        let can = graph::forward_reach(&radj, &from);
        for (i, row) in black.iter_mut().enumerate() {
            for (p, b) in row.iter_mut().enumerate() {
                if !*b {
                    let seen = graph::forward_reach(&adj, &[t.vertex(p, i)]);
                    *b = seen.iter().zip(&can).all(|(&s, &c)| !s || c);
                }
            }
        }
        for j in (0..digits.len()).rev() {
            digits[j] += 1;
            if digits[j] < sizes[j] {
                break;
            }
            digits[j] = 0;
        }
    }
    Ok(black)
}

/// Vertices from which some MD strategy reaches only BSCCs of mean reward
/// at most 0, by enumerating all MD strategies.
pub fn brute_force_qual_mp(m: &FiniteMdp, bound: usize) -> Result<Vec<bool>, OracleError> {
    let all = finmdp::enumerate_md(m, bound).ok_or(OracleError::BoundExceeded(bound))?;
    let n = m.num_vertices();
    let mut win = vec![false; n];
    for s in &all {
        let c = chain::induced_chain(m, s).expect("enumerated strategies are total");
        let mut bad = vec![false; n];
        for b in chain::bsccs(&c) {
            if chain::mean_reward_of_bscc(&c, &b) > Rational::zero() {
                for &u in &b.members {
                    bad[u] = true;
                }
            }
        }
        let adj = c.adjacency();
        for v in 0..n {
            if !win[v] && !graph::forward_reach(&adj, &[v]).iter().zip(&bad).any(|(r, b)| *r && *b) {
                win[v] = true;
            }
        }
    }
    Ok(win)
}

/// Random reward MDP with `1..=max_v` vertices and out-degree `1..=max_deg`.
pub fn random_mdp(rng: &mut impl Rng, max_v: usize, max_deg: usize) -> FiniteMdp {
    let n = rng.random_range(1..=max_v);
    let mut owner = Vec::with_capacity(n);
    let mut reward = Vec::with_capacity(n);
    let mut succ = Vec::with_capacity(n);
    let mut prob = Vec::with_capacity(n);
    for _ in 0..n {
        let controlled = rng.random_bool(0.5);
        owner.push(if controlled { Owner::Controlled } else { Owner::Probabilistic });
        reward.push(rng.random_range(-1i8..=1));
        let deg = rng.random_range(1..=max_deg.min(n));
        let mut targets: Vec<usize> = rand::seq::index::sample(rng, n, deg).into_vec();
        targets.sort_unstable();
        let weights: Vec<i64> = (0..deg).map(|_| rng.random_range(1..4)).collect();
        let total: i64 = weights.iter().sum();
        prob.push(if controlled { Vec::new() } else { weights.iter().map(|&w| rational(w, total)).collect() });
        succ.push(targets);
    }
    let names = (0..n).map(|i| format!("v{i}")).collect();
    FiniteMdp::new(names, owner, reward, succ, prob).expect("generated MDP is valid")
}

/// Random OC-MDP with `1..=max_q` states and `1..=max_rules` positive rules
/// per state. With `with_final`, state 0 is final and normalized.
pub fn random_ocmdp(rng: &mut impl Rng, max_q: usize, max_rules: usize, with_final: bool) -> OcMdp {
    let n = rng.random_range(1..=max_q);
    let owner: Vec<Owner> =
        (0..n).map(|_| if rng.random_bool(0.5) { Owner::Controlled } else { Owner::Probabilistic }).collect();
    let mut pos = Vec::new();
    let mut zero = Vec::new();
    for p in 0..n {
        let k = rng.random_range(1..=max_rules.min(3 * n));
        let mut picks: Vec<usize> = rand::seq::index::sample(rng, 3 * n, k).into_vec();
        picks.sort_unstable();
        let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..4)).collect();
        let total: i64 = weights.iter().sum();
        for (x, w) in picks.into_iter().zip(weights) {
            let (q, d) = (x / 3, x as i8 % 3 - 1);
            let prob = (owner[p] == Owner::Probabilistic).then(|| rational(w, total));
            pos.push(Rule::new(p, d, q, prob));
        }
        let prob = (owner[p] == Owner::Probabilistic).then(|| rational(1, 1));
        if with_final && p == 0 {
            zero.push(Rule::new(p, 0, p, prob));
        } else {
            zero.push(Rule::new(p, rng.random_range(0i8..=1), rng.random_range(0..n), prob));
        }
    }
    let names = (0..n).map(|i| format!("q{i}")).collect();
    let finals: &[usize] = if with_final { &[0] } else { &[] };
    OcMdp::new(names, owner, zero, pos, finals).expect("generated OC-MDP is valid")
}

/// Random solvency game with `1..=max_actions` actions and deltas in
/// `-max_delta..=max_delta`.
pub fn random_solvency(rng: &mut impl Rng, max_actions: usize, max_delta: i64) -> SolvencyGame {
    let k = rng.random_range(1..=max_actions);
    let span = (2 * max_delta + 1) as usize;
    let actions = (0..k)
        .map(|i| {
            let size = rng.random_range(1..=3.min(span));
            let mut deltas: Vec<i64> =
                rand::seq::index::sample(rng, span, size).into_iter().map(|x| x as i64 - max_delta).collect();
            deltas.sort_unstable();
            let weights: Vec<i64> = (0..size).map(|_| rng.random_range(1..4)).collect();
            let total: i64 = weights.iter().sum();
            Action {
                name: format!("a{i}"),
                outcomes: deltas.into_iter().zip(weights).map(|(d, w)| (d, rational(w, total))).collect(),
            }
        })
        .collect();
    SolvencyGame::new(actions).expect("generated game is valid")
}
