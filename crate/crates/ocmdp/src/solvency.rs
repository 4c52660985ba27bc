//! Qualitative bankruptcy in solvency games, and their reduction to
//! OC-MDPs without final states.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};

use crate::model::{Action, OcMdp, Owner, Rational, Rule, SolvencyGame};

/// Expected wealth change of one play of `action`.
pub fn drift(action: &Action) -> Rational {
    action.outcomes.iter().fold(Rational::zero(), |acc, (d, p)| acc + Rational::from_integer((*d).into()) * p)
}

/// Which bankruptcy question to answer. Each asks whether some strategy
/// makes the bankruptcy probability, from every positive initial wealth,
/// satisfy the named condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Probability `> 0`.
    Positive,
    /// Probability `= 1`.
    One,
    /// Probability `= 0`.
    Zero,
    /// Probability `< 1`.
    BelowOne,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Positive, Mode::One, Mode::Zero, Mode::BelowOne];

    pub fn symbol(self) -> &'static str {
        match self {
            Mode::Positive => "p>0",
            Mode::One => "p=1",
            Mode::Zero => "p=0",
            Mode::BelowOne => "p<1",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown mode `{0}` (expected p>0, p=1, p=0 or p<1)")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p>0" | "positive" => Ok(Mode::Positive),
            "p=1" | "one" => Ok(Mode::One),
            "p=0" | "zero" => Ok(Mode::Zero),
            "p<1" | "below_one" | "below-one" => Ok(Mode::BelowOne),
            _ => Err(UnknownMode(s.to_string())),
        }
    }
}

fn can_lose(a: &Action) -> bool {
    a.outcomes.iter().any(|(d, _)| *d < 0)
}

pub fn qual_bankruptcy(g: &SolvencyGame, mode: Mode) -> bool {
    let acts = g.actions();
    match mode {
        Mode::Positive => acts.iter().any(can_lose),
        Mode::One => acts.iter().any(|a| can_lose(a) && !drift(a).is_positive()),
        Mode::Zero => acts.iter().any(|a| !can_lose(a)),
        Mode::BelowOne => acts.iter().any(|a| !can_lose(a) || drift(a).is_positive()),
    }
}

/// Index of the base state in [`solvency_to_ocmdp`] output.
pub const BASE: usize = 0;

/// OC-MDP whose counter is the wealth: a controlled base state picks an
/// action, the action's state draws an outcome, and a chain of `|delta|`
/// auxiliary states moves the counter one unit at a time back to base.
/// Every zero rule is a self-loop and there are no final states, so
/// termination is bankruptcy. The size is linear in the sum of `|delta|`.
pub fn solvency_to_ocmdp(g: &SolvencyGame) -> OcMdp {
    let mut names = vec!["$base".to_string()];
    let mut owner = vec![Owner::Controlled];
    let mut pos = Vec::new();
    let one = || Some(Rational::one());
    for act in g.actions() {
        let s = names.len();
        names.push(format!("act.{}", act.name));
        owner.push(Owner::Probabilistic);
        pos.push(Rule::new(BASE, 0, s, None));
        for (j, (d, p)) in act.outcomes.iter().enumerate() {
            if *d == 0 {
                pos.push(Rule::new(s, 0, BASE, Some(p.clone())));
                continue;
            }
            let step = d.signum() as i8;
            let len = d.unsigned_abs() as usize;
            let first = names.len();
            for k in 0..len {
                names.push(format!("aux.{}.{j}.{k}", act.name));
                owner.push(Owner::Probabilistic);
            }
            pos.push(Rule::new(s, 0, first, Some(p.clone())));
            for k in 0..len {
                let to = if k + 1 == len { BASE } else { first + k + 1 };
                pos.push(Rule::new(first + k, step, to, one()));
            }
        }
    }
    let zero =
        (0..names.len()).map(|p| Rule::new(p, 0, p, (owner[p] == Owner::Probabilistic).then(one).flatten())).collect();
    OcMdp::new(names, owner, zero, pos, &[]).expect("reduction of a valid game is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;
    use crate::model::{parse_solvency, rational};
    use crate::oracle::{cmd_cn_value, enumerate_cmd, random_solvency};
    use crate::termination::{bounded_reach_zero, nt_membership, nt_value_one};
    use crate::Config;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn act(name: &str, outcomes: &[(i64, i64, i64)]) -> Action {
        Action { name: name.into(), outcomes: outcomes.iter().map(|&(d, n, m)| (d, rational(n, m))).collect() }
    }

    fn game(acts: Vec<Action>) -> SolvencyGame {
        SolvencyGame::new(acts).unwrap()
    }

    fn decisions(g: &SolvencyGame) -> [bool; 4] {
        Mode::ALL.map(|m| qual_bankruptcy(g, m))
    }

    #[test]
    fn drift_values() {
        assert_eq!(drift(&act("a", &[(1, 1, 2), (-1, 1, 2)])), rational(0, 1));
        assert_eq!(drift(&act("a", &[(2, 1, 3), (-1, 2, 3)])), rational(0, 1));
        assert_eq!(drift(&act("a", &[(1, 2, 3), (-1, 1, 3)])), rational(1, 3));
    }

    #[test]
    fn mode_examples() {
        let a1 = act("a1", &[(1, 1, 2), (-1, 1, 2)]);
        let a3 = act("a3", &[(1, 1, 1)]);
        assert_eq!(decisions(&game(vec![a1.clone()])), [true, true, false, false]);
        assert_eq!(decisions(&game(vec![a3.clone()])), [false, false, true, true]);
        assert_eq!(decisions(&game(vec![a1, a3])), [true, true, true, true]);
    }

    #[test]
    fn mode_text() {
        for m in Mode::ALL {
            assert_eq!(m.symbol().parse::<Mode>(), Ok(m));
        }
        assert_eq!("below_one".parse::<Mode>(), Ok(Mode::BelowOne));
        assert!("p>=1".parse::<Mode>().is_err());
    }

    #[test]
    fn reduction_shapes() {
        let a = solvency_to_ocmdp(&game(vec![act("d", &[(-1, 1, 1)])]));
        assert_eq!(a.num_states(), 3);
        let nt = nt_value_one(&a);
        assert!(nt.safe.iter().all(|&s| s));

        let a = solvency_to_ocmdp(&game(vec![act("f", &[(2, 1, 2), (-2, 1, 2)])]));
        assert_eq!(a.num_states(), 6);
        assert!(nt_value_one(&a).safe[BASE]);

        let g = parse_solvency("solvency\naction z\noutcome 0 1/3\noutcome 1 2/3\n").unwrap();
        let a = solvency_to_ocmdp(&g);
        assert_eq!(a.num_states(), 3);
        let s = a.state_index("act.z").unwrap();
        assert!(a.positive_out(s).iter().any(|&r| {
            let r = &a.positive_rules()[r];
            r.to == BASE && r.delta == 0 && r.prob == Some(rational(1, 3))
        }));
        assert!(!a.has_finals());
    }

    /// Some action whose outcome chains contain no decrement.
    fn decrement_free_action(a: &OcMdp) -> bool {
        let adj: Vec<Vec<usize>> = (0..a.num_states())
            .map(|p| {
                if p == BASE {
                    return Vec::new();
                }
                a.positive_out(p).iter().map(|&r| a.positive_rules()[r].to).collect()
            })
            .collect();
        a.positive_out(BASE).iter().any(|&r| {
            let seen = graph::forward_reach(&adj, &[a.positive_rules()[r].to]);
            (0..a.num_states())
                .filter(|&p| seen[p] && p != BASE)
                .all(|p| a.positive_out(p).iter().all(|&r| a.positive_rules()[r].delta >= 0))
        })
    }

    fn below_one_by_selectors(a: &OcMdp) -> bool {
        enumerate_cmd(a, 16).unwrap().iter().any(|s| cmd_cn_value(a, s, BASE) < Rational::one())
    }

    /// The same game written with every probability scaled by `k/k` and
    /// outcomes listed in reverse.
    fn rescale(g: &SolvencyGame, k: i64) -> SolvencyGame {
        let mut text = String::from("solvency\n");
        for a in g.actions() {
            text += &format!("action {}\n", a.name);
            for (d, p) in a.outcomes.iter().rev() {
                text += &format!("outcome {d} {}/{}\n", p.numer() * k, p.denom() * k);
            }
        }
        parse_solvency(&text).unwrap()
    }

    #[test]
    fn random_games_agree_with_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..120 {
            let g = random_solvency(&mut rng, 3, 4);
            let a = solvency_to_ocmdp(&g);
            let d = decisions(&g);
            let nt = nt_value_one(&a);
            assert_eq!(d[0], bounded_reach_zero(&a, Config::new(BASE, 1), None), "{g:?}");
            assert_eq!(d[1], nt.safe[BASE], "{g:?}");
            assert_eq!(d[1], nt_membership(&nt, BASE, 1), "{g:?}");
            assert_eq!(d[2], decrement_free_action(&a), "{g:?}");
            assert_eq!(d[3], below_one_by_selectors(&a), "{g:?}");
            assert_eq!(decisions(&rescale(&g, 3)), d);
        }
    }

    #[test]
    fn below_one_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let g = random_solvency(&mut rng, 3, 4);
            if !qual_bankruptcy(&g, Mode::BelowOne) {
                continue;
            }
            let h = random_solvency(&mut rng, 1, 4);
            let mut acts = g.actions().to_vec();
            let mut extra = h.actions()[0].clone();
            extra.name = "extra".into();
            acts.push(extra);
            assert!(qual_bankruptcy(&game(acts), Mode::BelowOne));
        }
    }
}
