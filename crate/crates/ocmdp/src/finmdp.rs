//! Optimal reachability and minimum mean payoff on finite MDPs.

use num_traits::{One, Zero};

use crate::chain::{self, MarkovChain};
use crate::graph;
use crate::linalg;
use crate::model::{FiniteMdp, MdStrategy, Rational};

const MAX_POLICY_ROUNDS: usize = 100_000;

pub(crate) fn chain_with_reward(m: &FiniteMdp, s: &MdStrategy, reward: &[i64]) -> MarkovChain {
    let n = m.num_vertices();
    let succ = (0..n)
        .map(|v| {
            if m.is_controlled(v) {
                vec![(s.get(v).expect("total strategy"), Rational::one())]
            } else {
                m.succ(v).iter().copied().zip(m.probs(v).iter().cloned()).collect()
            }
        })
        .collect();
    MarkovChain::new(succ, reward.to_vec()).expect("MDP distributions are valid")
}

/// Maximal probability of reaching `target` from every vertex, with an MD
/// strategy attaining it everywhere.
///
/// Vertices that cannot reach the target get 0, the almost-sure winning
/// region gets 1 with its attractor strategy; the remaining vertices are
/// solved by strategy improvement started from a strategy that reaches the
/// target with positive probability, switching only on strict improvement.
pub fn max_reach(m: &FiniteMdp, target: &[bool]) -> (MdStrategy, Vec<Rational>) {
    let n = m.num_vertices();
    let all = vec![true; n];
    let positive = graph::can_reach(m, target, &all);
    let (sure, sure_choice) = graph::almost_sure_reach(m, target);
    let (_, pos_choice) = graph::distance_strategy(m, target, &positive);
    let maybe: Vec<bool> = (0..n).map(|v| positive[v] && !sure[v]).collect();
    let mut strat = MdStrategy::lowest(m);
    for v in 0..n {
        if !m.is_controlled(v) || target[v] {
            continue;
        }
        let c = if sure[v] {
            sure_choice[v]
        } else if maybe[v] {
            pos_choice[v]
        } else {
            None
        };
        if let Some(w) = c {
            strat.set(v, w);
        }
    }
    let mut idx = vec![usize::MAX; n];
    let unknown: Vec<usize> = (0..n).filter(|&v| maybe[v]).collect();
    for (i, &v) in unknown.iter().enumerate() {
        idx[v] = i;
    }
    for _ in 0..MAX_POLICY_ROUNDS {
        let mut rows = Vec::with_capacity(unknown.len());
        let mut rhs = Vec::with_capacity(unknown.len());
        for &v in &unknown {
            let mut row = vec![(idx[v], Rational::one())];
            let mut b = Rational::zero();
            let mut edge = |w: usize, p: Rational| {
                if sure[w] {
                    b += p;
                } else if maybe[w] {
                    row.push((idx[w], -p));
                }
            };
            if m.is_controlled(v) {
                edge(strat.get(v).unwrap(), Rational::one());
            } else {
                for (w, p) in m.succ(v).iter().zip(m.probs(v)) {
                    edge(*w, p.clone());
                }
            }
            rows.push(row);
            rhs.push(b);
        }
        let x = linalg::solve(rows, rhs).expect("proper strategy gives a nonsingular system");
        let val = |w: usize| -> Rational {
            if sure[w] {
                Rational::one()
            } else if maybe[w] {
                x[idx[w]].clone()
            } else {
                Rational::zero()
            }
        };
        let mut changed = false;
        for &v in &unknown {
            if !m.is_controlled(v) {
                continue;
            }
            let cur = val(strat.get(v).unwrap());
            let mut best: Option<(Rational, usize)> = None;
            for &w in m.succ(v) {
                let xw = val(w);
                if best.as_ref().is_none_or(|(bx, _)| xw > *bx) {
                    best = Some((xw, w));
                }
            }
            let (bx, bw) = best.unwrap();
            if bx > cur {
                strat.set(v, bw);
                changed = true;
            }
        }
        if !changed {
            return (strat, (0..n).map(val).collect());
        }
    }
    panic!("strategy improvement for reachability did not converge");
}

pub fn almost_sure_reach_set(m: &FiniteMdp, target: &[bool]) -> Vec<bool> {
    graph::almost_sure_reach(m, target).0
}

/// Gain and bias of a fixed MD strategy, bias normalized to 0 at the
/// lowest state of every recurrent class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GainBias {
    pub gain: Vec<Rational>,
    pub bias: Vec<Rational>,
}

pub fn evaluate_policy(m: &FiniteMdp, s: &MdStrategy, reward: &[i64]) -> GainBias {
    let c = chain_with_reward(m, s, reward);
    let gain = chain::gains(&c);
    let n = m.num_vertices();
    let mut pivot = vec![false; n];
    for b in chain::bsccs(&c) {
        pivot[b.pivot()] = true;
    }
    let mut rows = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for v in 0..n {
        if pivot[v] {
            rows.push(vec![(v, Rational::one())]);
            rhs.push(Rational::zero());
            continue;
        }
        let mut row = vec![(v, Rational::one())];
        for (w, p) in c.succ(v) {
            row.push((*w, -p.clone()));
        }
        rows.push(row);
        rhs.push(Rational::from_integer(reward[v].into()) - &gain[v]);
    }
    let bias = linalg::solve(rows, rhs).expect("bias system is nonsingular");
    GainBias { gain, bias }
}

/// Multichain policy iteration minimizing the long-run average of
/// `reward`. Returns a strategy optimal from every vertex simultaneously.
pub fn min_mean_policy(m: &FiniteMdp, reward: &[i64], warm: Option<&MdStrategy>) -> (MdStrategy, GainBias) {
    let mut s = warm.cloned().unwrap_or_else(|| MdStrategy::lowest(m));
    let n = m.num_vertices();
    for _ in 0..MAX_POLICY_ROUNDS {
        let gb = evaluate_policy(m, &s, reward);
        let mut next = s.clone();
        let mut changed = false;
        for v in (0..n).filter(|&v| m.is_controlled(v)) {
            let cur = s.get(v).unwrap();
            let best = m.succ(v).iter().map(|&w| &gb.gain[w]).min().unwrap();
            if *best < gb.gain[cur] {
                let w = *m.succ(v).iter().filter(|&&w| gb.gain[w] == *best).min().unwrap();
                next.set(v, w);
                changed = true;
            }
        }
        if !changed {
            for v in (0..n).filter(|&v| m.is_controlled(v)) {
                let cur = s.get(v).unwrap();
                let g = &gb.gain[cur];
                let tied = m.succ(v).iter().copied().filter(|&w| gb.gain[w] == *g);
                let best = tied.clone().map(|w| &gb.bias[w]).min().unwrap();
                if *best < gb.bias[cur] {
                    let w = tied.filter(|&w| gb.bias[w] == *best).min().unwrap();
                    next.set(v, w);
                    changed = true;
                }
            }
        }
        if !changed {
            return (s, gb);
        }
        s = next;
    }
    panic!("mean-payoff policy iteration did not converge");
}

/// An MD strategy minimizing the expected mean payoff from `start`, and
/// that minimum.
pub fn min_mean_md(m: &FiniteMdp, start: usize) -> (MdStrategy, Rational) {
    let reward: Vec<i64> = m.rewards().iter().map(|&r| r as i64).collect();
    let (s, gb) = min_mean_policy(m, &reward, None);
    let g = gb.gain[start].clone();
    (s, g)
}

pub fn expected_mean(m: &FiniteMdp, s: &MdStrategy, start: usize) -> Rational {
    let reward: Vec<i64> = m.rewards().iter().map(|&r| r as i64).collect();
    chain::gains(&chain_with_reward(m, s, &reward)).swap_remove(start)
}

/// All MD strategies of `m` in lexicographic order, or `None` when there are
/// more than `bound`.
pub fn enumerate_md(m: &FiniteMdp, bound: usize) -> Option<Vec<MdStrategy>> {
    let ctrl: Vec<usize> = (0..m.num_vertices()).filter(|&v| m.is_controlled(v)).collect();
    let mut total = 1usize;
    for &v in &ctrl {
        total = total.checked_mul(m.succ(v).len()).filter(|&t| t <= bound)?;
    }
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; ctrl.len()];
    loop {
        let mut s = MdStrategy::new(vec![None; m.num_vertices()]);
        for (i, &v) in ctrl.iter().enumerate() {
            s.set(v, m.succ(v)[digits[i]]);
        }
        out.push(s);
        let mut i = ctrl.len();
        loop {
            if i == 0 {
                return Some(out);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < m.succ(ctrl[i]).len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_mdp, parse_ocmdp, rational, to_boundaryless_reward_mdp};
    use crate::testutil::{arb_mdp, e6};
    use proptest::prelude::*;

    #[test]
    fn reach_examples() {
        let m = parse_mdp(
            "mdp\nvertex v P r=0\nvertex t P r=0\nvertex d P r=0\nedge v t 1/2\nedge v d 1/2\nedge t t 1\nedge d d 1\n",
        )
        .unwrap();
        let (_, val) = max_reach(&m, &[false, true, false]);
        assert_eq!(val, vec![rational(1, 2), rational(1, 1), rational(0, 1)]);
        assert_eq!(almost_sure_reach_set(&m, &[false, true, false]), vec![false, true, false]);
        assert_eq!(almost_sure_reach_set(&m, &[true; 3]), vec![true; 3]);
    }

    #[test]
    fn min_mean_examples() {
        let m = parse_mdp("mdp\nvertex v N r=1\nedge v v\n").unwrap();
        assert_eq!(min_mean_md(&m, 0).1, rational(1, 1));
        let m = e6();
        let (s, g) = min_mean_md(&m, 0);
        assert_eq!(g, rational(-1, 2));
        assert_eq!(s.get(0), Some(1));
        let w1 = parse_ocmdp("ocmdp\nstate q P\nprule q +1 q 1/3\nprule q -1 q 2/3\nzrule q 0 q 1\n").unwrap();
        assert_eq!(min_mean_md(&to_boundaryless_reward_mdp(&w1).mdp, 0).1, rational(-1, 6));
    }

    #[test]
    fn expected_mean_examples() {
        let m = parse_mdp("mdp\nvertex v N r=0\nedge v v\n").unwrap();
        assert_eq!(expected_mean(&m, &MdStrategy::lowest(&m), 0), rational(0, 1));
        let m = e6();
        assert_eq!(expected_mean(&m, &MdStrategy::new(vec![Some(2), None, None]), 0), rational(1, 2));
        let m = parse_mdp(
            "mdp\nvertex s P r=0\nvertex x N r=-1\nvertex y N r=0\nedge s x 1/2\nedge s y 1/2\nedge x x\nedge y y\n",
        )
        .unwrap();
        assert_eq!(expected_mean(&m, &MdStrategy::lowest(&m), 0), rational(-1, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sure_set_matches_value_one(m in arb_mdp(6, 3), t in proptest::collection::vec(any::<bool>(), 6)) {
            let target: Vec<bool> = t[..m.num_vertices()].to_vec();
            let (s, val) = max_reach(&m, &target);
            let sure = almost_sure_reach_set(&m, &target);
            for v in 0..m.num_vertices() {
                prop_assert_eq!(sure[v], val[v].is_one());
            }
            // the strategy attains the values
            let c = crate::chain::induced_chain(&m, &s).unwrap();
            prop_assert_eq!(crate::chain::reach_probabilities(&c, &target), val.clone());
            // values dominate every MD strategy
            for other in enumerate_md(&m, 1000).unwrap() {
                let c = crate::chain::induced_chain(&m, &other).unwrap();
                let p = crate::chain::reach_probabilities(&c, &target);
                for v in 0..m.num_vertices() {
                    prop_assert!(p[v] <= val[v]);
                }
            }
        }

        #[test]
        fn reach_monotone_in_target(m in arb_mdp(6, 3), t in proptest::collection::vec(any::<bool>(), 6), extra in 0usize..6) {
            let target: Vec<bool> = t[..m.num_vertices()].to_vec();
            let mut bigger = target.clone();
            bigger[extra % m.num_vertices()] = true;
            let a = max_reach(&m, &target).1;
            let b = max_reach(&m, &bigger).1;
            for v in 0..m.num_vertices() {
                prop_assert!(a[v] <= b[v]);
            }
        }

        #[test]
        fn min_mean_is_minimal(m in arb_mdp(6, 3)) {
            for start in 0..m.num_vertices() {
                let (s, g) = min_mean_md(&m, start);
                prop_assert_eq!(expected_mean(&m, &s, start), g.clone());
                for other in enumerate_md(&m, 1000).unwrap() {
                    prop_assert!(g <= expected_mean(&m, &other, start));
                }
            }
        }
    }
}
