//! Acceptance criteria 1-7. Each criterion prints one PASS/FAIL line to
//! stderr, bypassing the test harness capture.

use std::io::Write;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocmdp::chain;
use ocmdp::cn::{ocmdp_cn, solve_cn};
use ocmdp::graph;
use ocmdp::model::{
    format_aautomaton, format_cmd_strategy, format_counter_regular, parse_ocmdp, rational, to_boundaryless_reward_mdp,
    Action, CmdStrategy,
};
use ocmdp::oracle::{
    brute_force_qual_mp, brute_force_st, cmd_cn_value, enumerate_cmd, random_mdp, random_ocmdp, random_solvency,
    simulate, truncated_termination_lower_bound, SimMode, SimOptions, SimStrategy,
};
use ocmdp::qualmp::{mp_witness_holds, qual_mp};
use ocmdp::solvency::{drift, qual_bankruptcy, solvency_to_ocmdp, Mode, BASE};
use ocmdp::termination::{
    bounded_reach_zero, certify_st, nt_membership, nt_value_one, st_optimal_strategy, st_optvalone,
};
use ocmdp::{Config, OcMdp, Rational, SolvencyGame};

const INSTANCES: usize = 200;
const ENUM_BOUND: usize = 1_000_000;
/// Minimum termination frequency in the simulation part of criterion 3.
const SIM_FREQ: f64 = 0.98;
const SIM_STEPS: u64 = 100_000;
const SIM_RUNS: u64 = 10_000;
const ST_RANDOM: usize = 60;
const ST_SAMPLES: usize = 20;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn w1(num: i64, den: i64) -> OcMdp {
    parse_ocmdp(&format!(
        "ocmdp\nstate q P\nprule q +1 q {num}/{den}\nprule q -1 q {}/{den}\nzrule q 0 q 1\n",
        den - num
    ))
    .unwrap()
}

fn qbd(p: (i64, i64)) -> OcMdp {
    parse_ocmdp(&format!(
        "ocmdp\nstate s1 P\nstate s2 P\nprule s1 +1 s1 {}/{}\nprule s1 +1 s2 {}/{}\nprule s2 -1 s2 1\nzrule s1 0 s1 1\nzrule s2 0 s2 1\n",
        p.1 - p.0,
        p.1,
        p.0,
        p.1
    ))
    .unwrap()
}

fn incrementer() -> OcMdp {
    parse_ocmdp("ocmdp\nstate t P\nprule t +1 t 1\nzrule t 0 t 1\n").unwrap()
}

fn st_example() -> OcMdp {
    parse_ocmdp(
        "ocmdp\nstate p N\nstate r P\nstate s P\n\
         prule p +1 p\nprule p 0 r\nzrule p +1 p\n\
         prule r 0 s 1/2\nprule r -1 r 1/2\nzrule r 0 r 1\n\
         prule s -1 s 1\nzrule s 0 s 1\nfinal s\n",
    )
    .unwrap()
}

fn t2() -> OcMdp {
    parse_ocmdp(
        "ocmdp\nstate c N\nstate s P\nstate r P\n\
         prule c -1 s\nprule c -1 r\nprule c +1 c\nzrule c 0 c\n\
         prule s -1 s 1\nzrule s 0 s 1\n\
         prule r +1 r 1\nzrule r 0 r 1\nfinal s\n",
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..INSTANCES {
        let m = random_mdp(&mut rng, 6, 3);
        let (win, sigma) = qual_mp(&m);
        let brute = brute_force_qual_mp(&m, ENUM_BOUND).map_err(|e| e.to_string())?;
        ensure(win == brute, || format!("instance {k}: winning sets differ"))?;
        for v in (0..m.num_vertices()).filter(|&v| win[v]) {
            ensure(mp_witness_holds(&m, &sigma, v), || format!("instance {k}: strategy fails at {}", m.name(v)))?;
        }
    }
    Ok(format!("{INSTANCES} MDPs, sets equal and strategies verified"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..INSTANCES {
        let a = random_ocmdp(&mut rng, 4, 3, false);
        let (vals, _) = ocmdp_cn(&a);
        let all = enumerate_cmd(&a, ENUM_BOUND).map_err(|e| e.to_string())?;
        for p in 0..a.num_states() {
            let best = all.iter().map(|s| cmd_cn_value(&a, s, p)).max().unwrap();
            ensure(vals[p] == best, || format!("instance {k}, state {}: {} vs {best}", a.name(p), vals[p]))?;
        }
    }
    Ok(format!("{INSTANCES} OC-MDPs, values equal to the selector maximum"))
}

/// Every CN-good BSCC of the chain induced by `s` has negative mean.
fn strictly_negative(a: &OcMdp, s: &CmdStrategy) -> bool {
    let b = to_boundaryless_reward_mdp(a);
    let c = chain::induced_chain(&b.mdp, &b.md_of_cmd(s)).unwrap();
    chain::bsccs(&c)
        .iter()
        .filter(|x| chain::cn_holds_in_bscc(&c, x))
        .all(|x| chain::mean_reward_of_bscc(&c, x).is_negative())
}

fn termination_frequency(a: &OcMdp, s: &CmdStrategy, start: Config, seed: u64) -> Result<f64, String> {
    let opts = SimOptions { steps: SIM_STEPS, runs: SIM_RUNS, seed, mode: SimMode::Bounded };
    let r = simulate(a, SimStrategy::Cmd(s), start, opts).map_err(|e| e.to_string())?;
    Ok(r.terminated as f64 / r.runs as f64)
}

fn criterion_3() -> Outcome {
    let nt = nt_value_one(&w1(1, 3));
    ensure(nt.safe == [true], || "W1 with up-probability 1/3 is not all-safe".into())?;
    let nt = nt_value_one(&incrementer());
    ensure(!nt.safe[0] && nt_membership(&nt, 0, 0) && !nt_membership(&nt, 0, 1), || {
        "incrementer is not exactly {t(0)}".into()
    })?;
    let nt = nt_value_one(&qbd((1, 256)));
    ensure(nt.safe == [true, true], || "QBD is not all value one".into())?;

    let mut sims = vec![(w1(1, 3), Config::new(0, 5)), (qbd((1, 4)), Config::new(0, 1))];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut random = 0;
    while random < 5 {
        let a = random_ocmdp(&mut rng, 3, 3, false);
        let nt = nt_value_one(&a);
        if !strictly_negative(&a, &nt.strategy) {
            continue;
        }
        let Some(p) = (0..a.num_states()).find(|&p| nt.safe[p] || nt.thresholds[p].is_some_and(|t| t > 0)) else {
            continue;
        };
        let level = if nt.safe[p] { a.num_states() as i64 + 2 } else { nt.thresholds[p].unwrap() as i64 };
        sims.push((a, Config::new(p, level)));
        random += 1;
    }
    let mut worst = 1.0f64;
    for (k, (a, start)) in sims.iter().enumerate() {
        let nt = nt_value_one(a);
        ensure(strictly_negative(a, &nt.strategy), || format!("simulation {k} has a drift-free good BSCC"))?;
        let f = termination_frequency(a, &nt.strategy, *start, 30 + k as u64)?;
        worst = worst.min(f);
        ensure(f >= SIM_FREQ, || format!("simulation {k}: termination frequency {f}"))?;
    }

    // Drift zero: value one by chain classification.
    let fair = w1(1, 2);
    let nt = nt_value_one(&fair);
    let b = to_boundaryless_reward_mdp(&fair);
    let c = chain::induced_chain(&b.mdp, &b.md_of_cmd(&nt.strategy)).unwrap();
    let bs = chain::bsccs(&c);
    ensure(
        nt.safe == [true]
            && bs.len() == 1
            && chain::mean_reward_of_bscc(&c, &bs[0]).is_zero()
            && chain::cn_holds_in_bscc(&c, &bs[0]),
        || "fair walk is not classified as value one".into(),
    )?;
    Ok(format!("examples hold; {} simulations, worst frequency {worst:.4}", sims.len()))
}

fn criterion_4() -> Outcome {
    let a = st_example();
    let (rect, _) = st_optvalone(&a, 1).map_err(|e| e.to_string())?;
    let s = a.state_index("s").unwrap();
    ensure(rect.period == 1, || format!("example period {}", rect.period))?;
    for i in 0..40u64 {
        for p in 0..3 {
            ensure(rect.is_black(p, i) == (p == s), || format!("example cell {}({i})", a.name(p)))?;
        }
    }

    let a = t2();
    let (rect, _) = st_optvalone(&a, 1).map_err(|e| e.to_string())?;
    let (c, s) = (a.state_index("c").unwrap(), a.state_index("s").unwrap());
    for i in 0..40u64 {
        for p in 0..3 {
            let want = p == s || (p == c && i >= 1);
            ensure(rect.is_black(p, i) == want, || format!("T2 cell {}({i})", a.name(p)))?;
        }
    }
    let nq = a.num_states();
    let n = rect.n();
    let brute = brute_force_st(&a, n, 2 * nq * nq * (1 << (2 * nq)), ENUM_BOUND).map_err(|e| e.to_string())?;
    for (i, row) in brute.iter().enumerate() {
        ensure(row.as_slice() == rect.initial[i].as_slice(), || format!("T2 brute force differs at level {i}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut certified = 0;
    for k in 0..ST_RANDOM {
        let a = random_ocmdp(&mut rng, 3, 3, true);
        let (rect, _) = st_optvalone(&a, 1).map_err(|e| e.to_string())?;
        let n = rect.n();
        ensure(rect.period >= 1 && rect.period <= n, || format!("instance {k}: period {}", rect.period))?;
        ensure(rect.initial[n] == rect.periodic[rect.period - 1], || format!("instance {k}: A_N != A_N+l"))?;
        let s = st_optimal_strategy(&a, &rect).map_err(|e| format!("instance {k}: {e}"))?;
        let black: Vec<(usize, u64)> = (0..=(4 * n) as u64)
            .flat_map(|i| (0..a.num_states()).map(move |p| (p, i)))
            .filter(|&(p, i)| rect.is_black(p, i))
            .collect();
        if black.is_empty() {
            continue;
        }
        let cells: Vec<(usize, u64)> = (0..ST_SAMPLES).map(|_| black[rng.random_range(0..black.len())]).collect();
        let ok = certify_st(&a, &s, &cells).map_err(|e| format!("instance {k}: {e}"))?;
        ensure(ok.iter().all(|&b| b), || format!("instance {k}: a sampled black cell is not certified"))?;
        certified += cells.len();
    }
    Ok(format!("examples reproduced; {ST_RANDOM} random instances, {certified} black cells certified"))
}

fn criterion_5() -> Outcome {
    let a = qbd((1, 256));
    let start = Config::new(0, 1);
    let at64 = truncated_termination_lower_bound(&a, start, 64).map_err(|e| e.to_string())?;
    let keep = rational(255, 256);
    let mut pow = Rational::one();
    for _ in 0..63 {
        pow *= &keep;
    }
    let want = Rational::one() - pow;
    ensure(at64 == want, || format!("K=64 bound {at64} differs from 1-(255/256)^63"))?;
    let mut prev = Rational::zero();
    for k in [8, 16, 32, 64, 128] {
        let v = truncated_termination_lower_bound(&a, start, k).map_err(|e| e.to_string())?;
        ensure(v >= prev, || format!("bound decreases at K={k}"))?;
        prev = v;
    }
    ensure(nt_value_one(&a).safe[0], || "QBD start state not value one".into())?;
    let approx = num_traits::ToPrimitive::to_f64(&at64).unwrap();
    Ok(format!("K=64 bound {approx:.4} exact, monotone, true value 1"))
}

fn can_lose(a: &Action) -> bool {
    a.outcomes.iter().any(|(d, _)| *d < 0)
}

/// Some action whose chains in the reduction never decrement.
fn decrement_free(a: &OcMdp) -> bool {
    let adj: Vec<Vec<usize>> =
        (0..a.num_states())
            .map(|p| {
                if p == BASE {
                    Vec::new()
                } else {
                    a.positive_out(p).iter().map(|&r| a.positive_rules()[r].to).collect()
                }
            })
            .collect();
    a.positive_out(BASE).iter().any(|&r| {
        let seen = graph::forward_reach(&adj, &[a.positive_rules()[r].to]);
        (0..a.num_states())
            .filter(|&p| seen[p] && p != BASE)
            .all(|p| a.positive_out(p).iter().all(|&r| a.positive_rules()[r].delta >= 0))
    })
}

fn rescaled(g: &SolvencyGame, k: i64) -> SolvencyGame {
    let mut text = String::from("solvency\n");
    for a in g.actions() {
        text += &format!("action {}\n", a.name);
        for (d, p) in a.outcomes.iter().rev() {
            text += &format!("outcome {d} {}/{}\n", p.numer() * k, p.denom() * k);
        }
    }
    ocmdp::model::parse_solvency(&text).unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for k in 0..INSTANCES {
        let g = random_solvency(&mut rng, 3, 4);
        let a = solvency_to_ocmdp(&g);
        let d = Mode::ALL.map(|m| qual_bankruptcy(&g, m));
        let nt = nt_value_one(&a);
        ensure(d[0] == bounded_reach_zero(&a, Config::new(BASE, 1), None), || format!("game {k}: p>0"))?;
        ensure(d[1] == nt.safe[BASE], || format!("game {k}: p=1"))?;
        ensure(d[2] == decrement_free(&a), || format!("game {k}: p=0"))?;
        let cond = g.actions().iter().any(|x| !can_lose(x)) || g.actions().iter().any(|x| drift(x).is_positive());
        ensure(d[3] == cond, || format!("game {k}: p<1"))?;
        for scale in [2, 7] {
            let h = rescaled(&g, scale);
            ensure(Mode::ALL.map(|m| qual_bankruptcy(&h, m)) == d, || format!("game {k}: rescaling by {scale}"))?;
        }
    }
    Ok(format!("{INSTANCES} games agree with the reduction and the predicate"))
}

fn reduced(x: &Rational) -> bool {
    x.denom().is_positive() && x.numer().gcd(x.denom()).is_one()
}

fn st_text(a: &OcMdp, jobs: usize) -> Result<String, String> {
    let (rect, aut) = st_optvalone(a, jobs).map_err(|e| e.to_string())?;
    let s = st_optimal_strategy(a, &rect).map_err(|e| e.to_string())?;
    Ok(format!("{}\n{}\n{}", rect.format(a), format_aautomaton(a, &aut), format_counter_regular(a, &s)))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..50 {
        let m = random_mdp(&mut rng, 6, 3);
        let (v, _) = solve_cn(&m);
        let a = random_ocmdp(&mut rng, 4, 3, false);
        let (w, s) = ocmdp_cn(&a);
        ensure(v.iter().chain(&w).all(reduced), || "unreduced value".into())?;
        ensure(ocmdp_cn(&a) == (w.clone(), s.clone()), || "CN analysis not repeatable".into())?;
        ensure(format_cmd_strategy(&a, &s) == format_cmd_strategy(&a, &ocmdp_cn(&a).1), || "CN text differs".into())?;
        checked += v.len() + w.len();
    }
    let q = qbd((1, 256));
    for k in [8, 64] {
        let b = truncated_termination_lower_bound(&q, Config::new(0, 1), k).map_err(|e| e.to_string())?;
        ensure(reduced(&b), || "unreduced bound".into())?;
    }

    let mut models = vec![st_example(), t2()];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    models.extend((0..8).map(|_| random_ocmdp(&mut rng, 3, 3, true)));
    for (k, a) in models.iter().enumerate() {
        let one = st_text(a, 1)?;
        ensure(one == st_text(a, 1)?, || format!("st model {k}: repeated runs differ"))?;
        ensure(one == st_text(a, 4)?, || format!("st model {k}: jobs 4 differs from jobs 1"))?;
    }

    let a = w1(2, 3);
    let s = nt_value_one(&a).strategy;
    let opts = SimOptions { steps: 1000, runs: 500, seed: 99, mode: SimMode::Bounded };
    let r1 = simulate(&a, SimStrategy::Cmd(&s), Config::new(0, 1), opts).map_err(|e| e.to_string())?;
    let r2 = simulate(&a, SimStrategy::Cmd(&s), Config::new(0, 1), opts).map_err(|e| e.to_string())?;
    ensure(r1.to_string() == r2.to_string(), || "simulation not repeatable".into())?;
    Ok(format!("{checked} values reduced; st output identical across {} models and job counts", models.len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("qual-MP oracle equivalence", criterion_1),
        ("CN oracle equivalence", criterion_2),
        ("NT example suite", criterion_3),
        ("ST reproduction", criterion_4),
        ("truncation pitfall", criterion_5),
        ("solvency cross-check", criterion_6),
        ("determinism and exactness", criterion_7),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = std::time::Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        let line = match &r {
            Ok(msg) => format!("criterion {}: PASS  {name}: {msg} ({secs:.1}s)", i + 1),
            Err(msg) => {
                failed.push(i + 1);
                format!("criterion {}: FAIL  {name}: {msg} ({secs:.1}s)", i + 1)
            }
        };
        writeln!(std::io::stderr().lock(), "{line}").unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
