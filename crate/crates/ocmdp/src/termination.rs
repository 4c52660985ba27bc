//! Termination objectives of OC-MDPs with a boundary: qualitative
//! non-selective termination (NT) with counter-oblivious strategies, and the
//! optimal-value-one set of selective termination (ST) with counter-regular
//! strategies.

use std::collections::VecDeque;
use std::fmt;

use num_traits::One;
use rayon::prelude::*;
use thiserror::Error;

use crate::chain;
use crate::cn::ocmdp_qual_cn;
use crate::graph;
use crate::model::{
    to_boundaryless_reward_mdp, truncated_unfolding, AAutomaton, CmdStrategy, Config, CounterRegularStrategy,
    MdStrategy, ModelError, OcMdp, Owner, Rational, Rule,
};

/// Largest number of control states accepted by the ST algorithm. The
/// candidate loop is quadratic in `2^|Q|`.
pub const MAX_ST_STATES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TerminationError {
    #[error("selective termination needs at least one final state")]
    NoFinals,
    #[error("{0} control states exceed the supported maximum of {MAX_ST_STATES}")]
    TooLarge(usize),
    #[error("coloring breaks the periodic construction at `{state}` level {level}")]
    Precondition { state: String, level: usize },
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("configuration {state}({level}) lies above the strategy threshold {threshold}")]
    AboveThreshold { state: String, level: u64, threshold: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    Black,
    White,
    Gray,
    Red,
}

impl Color {
    pub fn letter(self) -> char {
        match self {
            Color::Black => 'B',
            Color::White => 'W',
            Color::Gray => 'G',
            Color::Red => 'R',
        }
    }
}

/// Colors of `Q × {0..width}`; column `i` holds the colors of `p(i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    height: usize,
    width: usize,
    cells: Vec<Color>,
}

impl Coloring {
    pub fn new(height: usize, width: usize, fill: Color) -> Self {
        Coloring { height, width, cells: vec![fill; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, p: usize, i: usize) -> Color {
        self.cells[i * self.height + p]
    }

    pub fn set(&mut self, p: usize, i: usize, c: Color) {
        self.cells[i * self.height + p] = c;
    }

    pub fn column(&self, i: usize) -> &[Color] {
        &self.cells[i * self.height..(i + 1) * self.height]
    }

    /// Color of `p(i)` for any `i`, with columns beyond `n + ell` repeating
    /// columns `n+1..=n+ell`.
    pub fn periodic(&self, p: usize, i: usize, n: usize, ell: usize) -> Color {
        if i <= n + ell {
            self.get(p, i)
        } else {
            self.get(p, n + 1 + (i - n - 1) % ell)
        }
    }
}

/// Successors `(q, j, rule)` of `p(i)`: zero rules at `i = 0`, positive
/// rules otherwise.
fn successors(a: &OcMdp, p: usize, i: usize) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    let (out, rules) = a.rules_at(p, i as i64);
    out.iter().map(move |&r| (rules[r].to, (i as i64 + rules[r].delta as i64) as usize, r))
}

fn rule_at(a: &OcMdp, i: usize, r: usize) -> &Rule {
    if i == 0 {
        &a.zero_rules()[r]
    } else {
        &a.positive_rules()[r]
    }
}

/// Predecessor lists by target state: `(from, delta)` for zero and positive
/// rules.
struct Preds {
    zero: Vec<Vec<(usize, i8)>>,
    pos: Vec<Vec<(usize, i8)>>,
}

impl Preds {
    fn new(a: &OcMdp) -> Self {
        let n = a.num_states();
        let mut zero = vec![Vec::new(); n];
        let mut pos = vec![Vec::new(); n];
        for r in a.zero_rules() {
            zero[r.to].push((r.from, r.delta));
        }
        for r in a.positive_rules() {
            pos[r.to].push((r.from, r.delta));
        }
        Preds { zero, pos }
    }

    /// Configurations `q(j)` with a transition into `p(i)`.
    fn of(&self, p: usize, i: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let at = |j: usize| if j == 0 { &self.zero[p] } else { &self.pos[p] };
        for j in i.saturating_sub(1)..=i + 1 {
            for &(q, d) in at(j) {
                if j as i64 + d as i64 == i as i64 {
                    out.push((q, j));
                }
            }
        }
        out
    }
}

/// The answer of the NT analysis: `p(i)` has value one iff `p` is safe, or
/// `i` is at most the threshold of `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NtAnswer {
    pub safe: Vec<bool>,
    /// `Some(i_p)` for unsafe `p`.
    pub thresholds: Vec<Option<usize>>,
    pub strategy: CmdStrategy,
}

/// Configurations with NT value one, and a CMD strategy optimal in all of
/// them.
pub fn nt_value_one(a: &OcMdp) -> NtAnswer {
    let nq = a.num_states();
    let (safe, cn) = ocmdp_qual_cn(a);
    let t = truncated_unfolding(a, nq, true);
    let target: Vec<bool> = (0..t.mdp.num_vertices())
        .map(|v| {
            let (p, i) = t.config(v);
            i == 0 || (i == nq && safe[p])
        })
        .collect();
    let (win, choice) = graph::almost_sure_reach(&t.mdp, &target);
    let mut thresholds = vec![None; nq];
    let mut selector: Vec<Option<usize>> = cn.selector().to_vec();
    for p in (0..nq).filter(|&p| !safe[p]) {
        let ip = (0..nq).rev().find(|&i| win[t.vertex(p, i)]).expect("level 0 is a target");
        debug_assert!((0..=ip).all(|i| win[t.vertex(p, i)]));
        thresholds[p] = Some(ip);
        if ip > 0 && a.is_controlled(p) {
            let w = choice[t.vertex(p, ip)].expect("winning controlled vertex has a choice");
            let (q, j) = t.config(w);
            let delta = j as i64 - ip as i64;
            let r = a
                .positive_out(p)
                .iter()
                .copied()
                .find(|&r| a.positive_rules()[r].to == q && a.positive_rules()[r].delta as i64 == delta)
                .expect("unfolding edges come from rules");
            selector[p] = Some(r);
        }
    }
    debug_assert!((0..nq).filter(|&p| safe[p]).all(|p| {
        let mut to = a.positive_out(p).iter().map(|&r| safe[a.positive_rules()[r].to]);
        if a.is_controlled(p) {
            to.any(|s| s)
        } else {
            to.all(|s| s)
        }
    }));
    NtAnswer { safe, thresholds, strategy: CmdStrategy::new(selector) }
}

/// Whether `p(i)` has NT value one.
pub fn nt_membership(ans: &NtAnswer, p: usize, i: u64) -> bool {
    i == 0 || ans.safe[p] || ans.thresholds[p].is_some_and(|t| i <= t as u64)
}

/// Configurations `q(j)`, `j <= cap`, with a path to the target that only
/// visits configurations accepted by `allowed`. The target is `F × {0}`, or
/// `Q × {0}` when there are no final states.
fn reach_zero_set(a: &OcMdp, cap: usize, allowed: Option<&dyn Fn(usize, usize) -> bool>) -> Vec<bool> {
    let nq = a.num_states();
    let ok = |q: usize, j: usize| allowed.is_none_or(|f| f(q, j));
    let preds = Preds::new(a);
    let mut seen = vec![false; nq * (cap + 1)];
    let mut queue = VecDeque::new();
    for q in 0..nq {
        if (!a.has_finals() || a.is_final(q)) && ok(q, 0) {
            seen[q] = true;
            queue.push_back((q, 0));
        }
    }
    while let Some((q, j)) = queue.pop_front() {
        for (r, k) in preds.of(q, j) {
            if k <= cap && !seen[k * nq + r] && ok(r, k) {
                seen[k * nq + r] = true;
                queue.push_back((r, k));
            }
        }
    }
    seen
}

/// Whether some path from `from` reaches counter 0 in a final state (any
/// state when there are no finals), visiting only configurations accepted
/// by `allowed`. The counter is bounded by `from.counter + |Q|²`, which
/// loses no paths.
pub fn bounded_reach_zero(a: &OcMdp, from: Config, allowed: Option<&dyn Fn(usize, usize) -> bool>) -> bool {
    assert!(from.counter >= 0, "negative counter");
    let nq = a.num_states();
    let i = from.counter as usize;
    reach_zero_set(a, i + nq * nq, allowed)[i * nq + from.state]
}

/// The OC-MDP over non-white cells `[p,i]` of the periodic window, with
/// the positive rule of `base` each new rule comes from.
#[derive(Clone, Debug)]
pub struct PeriodicOcMdp {
    pub ocmdp: OcMdp,
    /// `(p, i)` of each control state.
    pub cells: Vec<(usize, usize)>,
    /// Originating rule in `base` of each positive rule.
    pub origin: Vec<usize>,
}

impl PeriodicOcMdp {
    pub fn state_of(&self, p: usize, i: usize) -> Option<usize> {
        self.cells.iter().position(|&c| c == (p, i))
    }
}

/// The OC-MDP `A_{C,ℓ}` of the colors in columns `n+1..=n+ell`.
pub fn build_periodic_ocmdp(
    base: &OcMdp,
    c: &Coloring,
    n: usize,
    ell: usize,
) -> Result<PeriodicOcMdp, TerminationError> {
    let nq = base.num_states();
    assert!(ell >= 1 && c.width() > n + ell, "window too narrow");
    let mut index = vec![None; nq * (ell + 1)];
    let mut cells = Vec::new();
    for i in 1..=ell {
        for p in 0..nq {
            if c.get(p, n + i) != Color::White {
                index[i * nq + p] = Some(cells.len());
                cells.push((p, i));
            }
        }
    }
    if cells.is_empty() {
        return Err(TerminationError::Inconsistent("periodic window is all white".into()));
    }
    let names: Vec<String> = cells.iter().map(|&(p, i)| format!("[{},{i}]", base.name(p))).collect();
    let owner: Vec<Owner> = cells.iter().map(|&(p, _)| base.owner(p)).collect();
    let mut zero = Vec::new();
    let mut pos = Vec::new();
    let mut origin = Vec::new();
    for (s, &(p, i)) in cells.iter().enumerate() {
        let one = (owner[s] == Owner::Probabilistic).then(Rational::one);
        zero.push(Rule::new(s, 0, s, one));
        let mut any = false;
        for &r in base.positive_out(p) {
            let rule = &base.positive_rules()[r];
            let k = i as i64 + rule.delta as i64;
            let (j, d) = if k == 0 {
                (ell, -1)
            } else if k == ell as i64 + 1 {
                (1, 1)
            } else {
                (k as usize, 0)
            };
            match index[j * nq + rule.to] {
                Some(t) => {
                    pos.push(Rule::new(s, d, t, rule.prob.clone()));
                    origin.push(r);
                    any = true;
                }
                None if owner[s] == Owner::Probabilistic => {
                    return Err(TerminationError::Precondition { state: base.name(p).to_string(), level: n + i })
                }
                None => {}
            }
        }
        if !any {
            return Err(TerminationError::Precondition { state: base.name(p).to_string(), level: n + i });
        }
    }
    let ocmdp = OcMdp::new(names, owner, zero, pos, &[])?;
    Ok(PeriodicOcMdp { ocmdp, cells, origin })
}

/// Evaluation context of one (ℓ, C) candidate window.
struct Window<'a> {
    a: &'a OcMdp,
    preds: &'a Preds,
    n: usize,
    ell: usize,
}

impl Window<'_> {
    fn color(&self, b: &Coloring, q: usize, j: usize) -> Color {
        b.periodic(q, j, self.n, self.ell)
    }

    fn check_color(&self, b: &Coloring, p: usize, i: usize) -> Color {
        let a = self.a;
        let (mut black, mut white) = (false, false);
        let succ: Vec<Color> = successors(a, p, i).map(|(q, j, _)| self.color(b, q, j)).collect();
        if a.is_controlled(p) {
            white |= succ.iter().all(|&c| c == Color::White);
            black |= succ.contains(&Color::Black);
        } else {
            black |= succ.iter().all(|&c| c == Color::Black);
            white |= succ.contains(&Color::White);
        }
        for (q, j) in self.preds.of(p, i) {
            if j > self.n + self.ell + 1 {
                continue;
            }
            match (a.owner(q), self.color(b, q, j)) {
                (Owner::Probabilistic, Color::Black) => black = true,
                (Owner::Controlled, Color::White) => white = true,
                _ => {}
            }
        }
        let cur = b.get(p, i);
        match (black, white) {
            (false, false) => cur,
            (true, true) => Color::Red,
            (true, false) if cur == Color::Gray || cur == Color::Black => Color::Black,
            (false, true) if cur == Color::Gray || cur == Color::White => Color::White,
            _ => Color::Red,
        }
    }
}

/// The color of `p(i)` enforced by its neighbours in the window
/// `0..=n+ell`, with column `n+ell+1` read as column `n+1`. Red marks a
/// conflict.
pub fn check_color(a: &OcMdp, b: &Coloring, n: usize, ell: usize, p: usize, i: usize) -> Color {
    let preds = Preds::new(a);
    Window { a, preds: &preds, n, ell }.check_color(b, p, i)
}

/// Stage at which a candidate was rejected, or its black cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CandidateOutcome {
    ColorConflict,
    ValueConflict,
    PathConflict,
    /// Black flags over `Q × {0..=n+ell}`, column-major.
    Accepted(Vec<bool>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub period: usize,
    /// Bit `p` set iff `p` is black in the guessed column.
    pub mask: u64,
    pub outcome: CandidateOutcome,
}

/// Counter cap for path searches in the window: above `n + ell` the
/// coloring is periodic, and any detour above a level can be shortened to
/// rise at most `(|Q|·ell)²` over it.
fn path_cap(nq: usize, n: usize) -> usize {
    2 * n + 2 + (nq * n) * (nq * n)
}

fn evaluate(a: &OcMdp, preds: &Preds, n: usize, ell: usize, mask: u64) -> CandidateOutcome {
    let nq = a.num_states();
    let w = Window { a, preds, n, ell };
    let mut b = Coloring::new(nq, n + ell + 1, Color::Gray);
    for q in a.finals() {
        b.set(q, 0, Color::Black);
    }
    for p in 0..nq {
        let c = if mask >> p & 1 == 1 { Color::Black } else { Color::White };
        b.set(p, n, c);
        b.set(p, n + ell, c);
    }
    loop {
        let mut changed = false;
        for i in 0..=n + ell {
            for p in 0..nq {
                let c = w.check_color(&b, p, i);
                if c == Color::Red {
                    return CandidateOutcome::ColorConflict;
                }
                if c != b.get(p, i) {
                    b.set(p, i, c);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    match build_periodic_ocmdp(a, &b, n, ell) {
        Ok(per) => {
            let nt = nt_value_one(&per.ocmdp);
            for (s, &(p, i)) in per.cells.iter().enumerate() {
                match (b.get(p, n + i), nt.safe[s]) {
                    (Color::Gray, true) => b.set(p, n + i, Color::Black),
                    (Color::Gray, false) => b.set(p, n + i, Color::White),
                    (_, false) => return CandidateOutcome::ValueConflict,
                    _ => {}
                }
            }
        }
        // an all-white window has nothing to check
        Err(TerminationError::Inconsistent(_)) => {}
        Err(_) => return CandidateOutcome::ValueConflict,
    }
    let cap = path_cap(nq, n);
    loop {
        let open = |q: usize, j: usize| matches!(b.periodic(q, j, n, ell), Color::Black | Color::Gray);
        let good = reach_zero_set(a, cap, Some(&open));
        let mut next = b.clone();
        let mut changed = false;
        for i in 0..=n {
            for p in 0..nq {
                let cur = b.get(p, i);
                if cur == Color::White {
                    continue;
                }
                let mut hits = successors(a, p, i).map(|(q, j, _)| good[j * nq + q]);
                let holds = if a.is_controlled(p) { hits.any(|h| h) } else { hits.all(|h| h) };
                if !holds {
                    if cur == Color::Black {
                        return CandidateOutcome::PathConflict;
                    }
                    next.set(p, i, Color::White);
                    changed = true;
                }
            }
        }
        b = next;
        if !changed {
            break;
        }
    }
    CandidateOutcome::Accepted(finish(a, &mut b, n, ell))
}

fn finish(a: &OcMdp, b: &mut Coloring, n: usize, ell: usize) -> Vec<bool> {
    let nq = a.num_states();
    for i in 0..=n {
        for p in 0..nq {
            if b.get(p, i) == Color::Gray {
                b.set(p, i, Color::Black);
            }
        }
    }
    (0..(n + ell + 1) * nq).map(|x| b.get(x % nq, x / nq) == Color::Black).collect()
}

/// The initial and periodic rectangles of the ST value-one coloring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StRectangles {
    /// Columns `0..=N`, each indexed by state.
    pub initial: Vec<Vec<bool>>,
    /// Columns `N+1..=N+ℓ`.
    pub periodic: Vec<Vec<bool>>,
    pub period: usize,
}

impl StRectangles {
    pub fn n(&self) -> usize {
        self.initial.len() - 1
    }

    pub fn num_states(&self) -> usize {
        self.initial[0].len()
    }

    pub fn is_black(&self, p: usize, i: u64) -> bool {
        let n = self.n() as u64;
        if i <= n {
            self.initial[i as usize][p]
        } else {
            self.periodic[((i - n - 1) % self.period as u64) as usize][p]
        }
    }

    /// The coloring over `0..=N+ℓ`.
    pub fn coloring(&self) -> Coloring {
        let mut c = Coloring::new(self.num_states(), self.n() + self.period + 1, Color::White);
        for (i, col) in self.initial.iter().chain(&self.periodic).enumerate() {
            for (p, &b) in col.iter().enumerate() {
                if b {
                    c.set(p, i, Color::Black);
                }
            }
        }
        c
    }

    /// A-automaton recognizing the black configurations: one chain of
    /// DFA states `0..=N+ℓ` per control state, looping back to `N+1`.
    pub fn automaton(&self) -> AAutomaton {
        let nq = self.num_states();
        let w = self.n() + self.period + 1;
        let mut advance = Vec::with_capacity(nq * w);
        let mut accepting = Vec::with_capacity(nq * w);
        for p in 0..nq {
            for c in 0..w {
                advance.push(p * w + if c + 1 < w { c + 1 } else { self.n() + 1 });
                accepting.push(self.is_black(p, c as u64));
            }
        }
        AAutomaton::new(advance, accepting, (0..nq).map(|p| p * w).collect()).expect("well-formed chains")
    }

    pub fn format(&self, a: &OcMdp) -> String {
        let mut out = format!("period ℓ={}\n", self.period);
        let width = self.n() + self.period + 1;
        for p in 0..self.num_states() {
            let row: String = (0..width).map(|i| if self.is_black(p, i as u64) { 'B' } else { 'W' }).collect();
            out.push_str(&format!("{} {row}\n", a.name(p)));
        }
        out
    }

    /// Reads the output of [`StRectangles::format`]. `N` is `2^|Q|`.
    pub fn parse(a: &OcMdp, text: &str) -> Result<Self, ModelError> {
        let bad = |line: usize, msg: &str| ModelError::Syntax { line, msg: msg.to_string() };
        let nq = a.num_states();
        if nq >= 32 {
            return Err(ModelError::Invalid("too many states for rectangles".into()));
        }
        let n = 1usize << nq;
        let mut lines =
            text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
        let period: usize = header
            .trim()
            .strip_prefix("period ℓ=")
            .and_then(|s| s.parse().ok())
            .filter(|&l| (1..=n).contains(&l))
            .ok_or_else(|| bad(hl + 1, "expected `period ℓ=<n>` with 1 <= n <= 2^|Q|"))?;
        let width = n + period + 1;
        let mut rows: Vec<Option<Vec<bool>>> = vec![None; nq];
        for (ln, line) in lines {
            let mut it = line.split_whitespace();
            let (Some(name), Some(cells), None) = (it.next(), it.next(), it.next()) else {
                return Err(bad(ln + 1, "expected `<state> <B|W cells>`"));
            };
            let p = a.state_index(name).ok_or_else(|| bad(ln + 1, &format!("unknown state `{name}`")))?;
            if rows[p].is_some() {
                return Err(bad(ln + 1, "duplicate row"));
            }
            if cells.len() != width || !cells.bytes().all(|c| c == b'B' || c == b'W') {
                return Err(bad(ln + 1, "row must have N+ℓ+1 cells of B or W"));
            }
            rows[p] = Some(cells.bytes().map(|c| c == b'B').collect());
        }
        let rows: Vec<Vec<bool>> = rows
            .into_iter()
            .enumerate()
            .map(|(p, r)| r.ok_or_else(|| ModelError::Invalid(format!("missing row for `{}`", a.name(p)))))
            .collect::<Result<_, _>>()?;
        let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<bool>>();
        if col(n) != col(n + period) {
            return Err(ModelError::Invalid("columns N and N+ℓ differ".into()));
        }
        Ok(StRectangles { initial: (0..=n).map(col).collect(), periodic: (n + 1..width).map(col).collect(), period })
    }
}

/// `N = 2^|Q|` after the size checks shared by the ST operations.
fn st_window(a: &OcMdp) -> Result<usize, TerminationError> {
    if !a.has_finals() {
        return Err(TerminationError::NoFinals);
    }
    if a.num_states() > MAX_ST_STATES {
        return Err(TerminationError::TooLarge(a.num_states()));
    }
    Ok(1 << a.num_states())
}

/// Evaluates every candidate period `ℓ ∈ 1..=N` and column guess, on
/// `jobs` worker threads. Candidates come back in (ℓ, mask) order.
pub fn st_candidates(a: &OcMdp, jobs: usize) -> Result<Vec<Candidate>, TerminationError> {
    let n = st_window(a)?;
    let nq = a.num_states();
    let preds = Preds::new(a);
    let todo: Vec<(usize, u64)> = (1..=n).flat_map(|ell| (0..1u64 << nq).map(move |m| (ell, m))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    Ok(pool.install(|| {
        todo.par_iter()
            .map(|&(ell, mask)| Candidate { period: ell, mask, outcome: evaluate(a, &preds, n, ell, mask) })
            .collect()
    }))
}

/// Unions the black cells of accepted candidates and cuts the least
/// period. The result does not depend on the order of `candidates`.
pub fn st_merge(a: &OcMdp, candidates: &[Candidate]) -> Result<StRectangles, TerminationError> {
    let n = st_window(a)?;
    let nq = a.num_states();
    let mut acc = vec![false; (2 * n + 1) * nq];
    for c in candidates {
        if let CandidateOutcome::Accepted(black) = &c.outcome {
            for (x, &b) in black.iter().enumerate() {
                acc[x] |= b;
            }
        }
    }
    let col = |i: usize| acc[i * nq..(i + 1) * nq].to_vec();
    let period = (1..=n)
        .find(|&l| col(n) == col(n + l))
        .ok_or_else(|| TerminationError::Inconsistent("no period found in the accumulated coloring".into()))?;
    Ok(StRectangles { initial: (0..=n).map(col).collect(), periodic: (n + 1..=n + period).map(col).collect(), period })
}

/// Rectangles of the configurations with an ST-optimal strategy, and the
/// A-automaton recognizing them.
pub fn st_optvalone(a: &OcMdp, jobs: usize) -> Result<(StRectangles, AAutomaton), TerminationError> {
    let rect = st_merge(a, &st_candidates(a, jobs)?)?;
    let aut = rect.automaton();
    Ok((rect, aut))
}

/// Counter-regular strategy optimal from every black configuration of
/// `rect`: fixed shortest all-black paths to `F × {0}` below `N`, and the
/// CMD strategy of the periodic OC-MDP lifted to the levels above.
pub fn st_optimal_strategy(a: &OcMdp, rect: &StRectangles) -> Result<CounterRegularStrategy, TerminationError> {
    let n = st_window(a)?;
    let nq = a.num_states();
    if rect.num_states() != nq || rect.n() != n {
        return Err(TerminationError::Inconsistent("rectangles do not match the OC-MDP".into()));
    }
    let ell = rect.period;
    let cap = path_cap(nq, n);
    let threshold = cap.max(nq * nq * n * n + n + ell);
    let phases = threshold + ell + 1;
    let mut table: Vec<Option<usize>> = vec![None; nq * phases];

    // Distances to F × {0} through black configurations.
    let preds = Preds::new(a);
    let mut dist = vec![usize::MAX; nq * (cap + 1)];
    let mut queue = VecDeque::new();
    for q in a.finals() {
        if rect.is_black(q, 0) {
            dist[q] = 0;
            queue.push_back((q, 0usize));
        }
    }
    while let Some((q, j)) = queue.pop_front() {
        for (r, k) in preds.of(q, j) {
            if k <= cap && dist[k * nq + r] == usize::MAX && rect.is_black(r, k as u64) {
                dist[k * nq + r] = dist[j * nq + q] + 1;
                queue.push_back((r, k));
            }
        }
    }
    for i in 0..=n {
        for p in 0..nq {
            if !rect.is_black(p, i as u64) {
                continue;
            }
            let (mut q, mut j) = (p, i);
            if dist[j * nq + q] == usize::MAX {
                return Err(TerminationError::Inconsistent(format!("no black path from {}({i})", a.name(p))));
            }
            while dist[j * nq + q] > 0 {
                let d = dist[j * nq + q];
                let (q2, j2, r) = successors(a, q, j)
                    .find(|&(q2, j2, _)| j2 <= cap && dist[j2 * nq + q2] == d - 1)
                    .expect("a successor one step closer exists");
                if a.is_controlled(q) && table[q * phases + j].is_none() {
                    table[q * phases + j] = Some(r);
                }
                (q, j) = (q2, j2);
            }
        }
    }

    if rect.periodic.iter().flatten().any(|&b| b) {
        let per = build_periodic_ocmdp(a, &rect.coloring(), n, ell)?;
        let xi = nt_value_one(&per.ocmdp);
        debug_assert!(xi.safe.iter().all(|&s| s), "every periodic cell has NT value one");
        for (s, &(p, i)) in per.cells.iter().enumerate() {
            if !a.is_controlled(p) {
                continue;
            }
            let r = per.origin[xi.strategy.get(s).expect("controlled cell has a selection")];
            let mut level = n + i;
            while level < phases {
                if table[p * phases + level].is_none() {
                    table[p * phases + level] = Some(r);
                }
                level += ell;
            }
        }
    }
    for p in (0..nq).filter(|&p| a.is_controlled(p)) {
        for ph in 0..phases {
            let slot = &mut table[p * phases + ph];
            if slot.is_none() {
                *slot = Some(if ph == 0 { a.zero_out(p)[0] } else { a.positive_out(p)[0] });
            }
        }
    }
    Ok(CounterRegularStrategy::new(a, threshold as u64, ell as u64, table)?)
}

/// Decides, for each listed configuration at or below the threshold of
/// `s`, whether `s` reaches `F × {0}` from it with probability one.
///
/// Levels above the threshold repeat with the strategy's period, so they
/// form a one-counter Markov chain over (state, phase). An excursion
/// entering it must come back down almost surely, and it can come back
/// exactly in the states of its one-level descent relation. With that,
/// the question becomes almost-sure reachability in a finite graph over
/// the levels up to the threshold.
pub fn certify_st(
    a: &OcMdp,
    s: &CounterRegularStrategy,
    cells: &[(usize, u64)],
) -> Result<Vec<bool>, TerminationError> {
    if !a.has_finals() {
        return Err(TerminationError::NoFinals);
    }
    let nq = a.num_states();
    let t = s.threshold() as usize;
    let ell = s.period() as usize;
    for &(p, i) in cells {
        if i > s.threshold() {
            return Err(TerminationError::AboveThreshold {
                state: a.name(p).to_string(),
                level: i,
                threshold: s.threshold(),
            });
        }
    }
    let chosen = |p: usize, phase: usize, zero: bool| -> Result<Vec<usize>, TerminationError> {
        let out = if zero { a.zero_out(p) } else { a.positive_out(p) };
        if !a.is_controlled(p) {
            return Ok(out.to_vec());
        }
        let r = s.table_entry(p, phase).ok_or_else(|| {
            TerminationError::Inconsistent(format!("strategy undefined at `{}` phase {phase}", a.name(p)))
        })?;
        Ok(vec![r])
    };

    // Periodic part: state (p, k) stands for p at levels t + k + mℓ.
    let sid = |p: usize, k: usize| (k - 1) * nq + p;
    let m = nq * ell;
    let mut names = Vec::with_capacity(m);
    let mut zero = Vec::with_capacity(m);
    let mut pos = Vec::new();
    let mut step: Vec<Vec<(usize, i8)>> = vec![Vec::new(); m];
    for k in 1..=ell {
        for p in 0..nq {
            names.push(format!("[{},{k}]", a.name(p)));
            zero.push(Rule::new(sid(p, k), 0, sid(p, k), Some(Rational::one())));
            let rules = chosen(p, t + k, false)?;
            for r in rules {
                let rule = &a.positive_rules()[r];
                let x = k as i64 + rule.delta as i64;
                let (j, d) = if x == 0 {
                    (ell, -1)
                } else if x == ell as i64 + 1 {
                    (1, 1)
                } else {
                    (x as usize, 0)
                };
                let prob = rule.prob.clone().unwrap_or_else(Rational::one);
                pos.push(Rule::new(sid(p, k), d, sid(rule.to, j), Some(prob)));
                step[sid(p, k)].push((sid(rule.to, j), d));
            }
        }
    }
    let chain_a = OcMdp::new(names, vec![Owner::Probabilistic; m], zero, pos, &[])?;

    // Almost-sure descent from each (q, 1) at block counter 1.
    let b = to_boundaryless_reward_mdp(&chain_a);
    let bc = chain::induced_chain(&b.mdp, &MdStrategy::new(vec![None; b.mdp.num_vertices()])).expect("no choices");
    let good = chain::cn_good_states(&bc);
    let cn = chain::reach_probabilities(&bc, &good);
    let safe: Vec<bool> = (0..m).map(|x| cn[b.state_vertex(x)].is_one()).collect();
    let tr = truncated_unfolding(&chain_a, m, true);
    let tc = chain::induced_chain(&tr.mdp, &MdStrategy::new(vec![None; tr.mdp.num_vertices()])).expect("no choices");
    let target: Vec<bool> = (0..tr.mdp.num_vertices())
        .map(|v| {
            let (x, i) = tr.config(v);
            i == 0 || (i == m && safe[x])
        })
        .collect();
    let nt = chain::reach_probabilities(&tc, &target);
    let descends: Vec<bool> = (0..nq).map(|q| nt[tr.vertex(sid(q, 1), 1)].is_one()).collect();

    // land[x][y]: from x one block up, y is hit first one block lower.
    let mut land = vec![vec![false; m]; m];
    for x in 0..m {
        for &(y, d) in &step[x] {
            if d == -1 {
                land[x][y] = true;
            }
        }
    }
    loop {
        let mut changed = false;
        for x in 0..m {
            for &(y, d) in &step[x] {
                let l = &land;
                let via: Vec<usize> = match d {
                    0 => (0..m).filter(|&z| l[y][z]).collect(),
                    1 => (0..m).filter(|&u| l[y][u]).flat_map(|u| (0..m).filter(move |&z| l[u][z])).collect(),
                    _ => Vec::new(),
                };
                for z in via {
                    if !land[x][z] {
                        land[x][z] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Finite graph over Q × {0..=t} plus a sink for escapes.
    let node = |p: usize, i: usize| i * nq + p;
    let bad = nq * (t + 1);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); bad + 1];
    let mut target = vec![false; bad + 1];
    for i in 0..=t {
        for p in 0..nq {
            let v = node(p, i);
            if i == 0 && a.is_final(p) {
                target[v] = true;
                continue;
            }
            for r in chosen(p, i, i == 0)? {
                let rule = rule_at(a, i, r);
                let j = (i as i64 + rule.delta as i64) as usize;
                if j <= t {
                    adj[v].push(node(rule.to, j));
                } else if !descends[rule.to] {
                    adj[v].push(bad);
                } else {
                    // landing at level t: states of the form (q, ℓ)
                    for q in 0..nq {
                        if land[sid(rule.to, 1)][sid(q, ell)] {
                            adj[v].push(node(q, t));
                        }
                    }
                }
            }
        }
    }
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); bad + 1];
    for (v, ws) in adj.iter().enumerate() {
        for &w in ws {
            radj[w].push(v);
        }
    }
    let from_target: Vec<usize> = (0..=bad).filter(|&v| target[v]).collect();
    let can = graph::forward_reach(&radj, &from_target);
    Ok(cells
        .iter()
        .map(|&(p, i)| {
            let seen = graph::forward_reach(&adj, &[node(p, i as usize)]);
            seen.iter().zip(&can).all(|(&s, &c)| !s || c)
        })
        .collect())
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_ocmdp;
    use crate::oracle::{cmd_cn_value, enumerate_cmd};
    use crate::testutil::{arb_ocmdp, w1};
    use proptest::prelude::*;

    pub(crate) fn st_example() -> OcMdp {
        parse_ocmdp(
            "ocmdp\nstate p N\nstate r P\nstate s P\n\
             prule p +1 p\nprule p 0 r\nzrule p +1 p\n\
             prule r 0 s 1/2\nprule r -1 r 1/2\nzrule r 0 r 1\n\
             prule s -1 s 1\nzrule s 0 s 1\nfinal s\n",
        )
        .unwrap()
    }

    pub(crate) fn t2() -> OcMdp {
        parse_ocmdp(
            "ocmdp\nstate c N\nstate s P\nstate r P\n\
             prule c -1 s\nprule c -1 r\nprule c +1 c\nzrule c 0 c\n\
             prule s -1 s 1\nzrule s 0 s 1\n\
             prule r +1 r 1\nzrule r 0 r 1\nfinal s\n",
        )
        .unwrap()
    }

    fn qbd() -> OcMdp {
        parse_ocmdp(
            "ocmdp\nstate s1 P\nstate s2 P\nprule s1 +1 s1 255/256\nprule s1 +1 s2 1/256\nprule s2 -1 s2 1\nzrule s1 0 s1 1\nzrule s2 0 s2 1\n",
        )
        .unwrap()
    }

    fn incrementer() -> OcMdp {
        parse_ocmdp("ocmdp\nstate t P\nprule t +1 t 1\nzrule t 0 t 1\n").unwrap()
    }

    #[test]
    fn nt_examples() {
        let ans = nt_value_one(&w1((1, 3)));
        assert_eq!(ans.safe, vec![true]);
        assert_eq!(ans.strategy, CmdStrategy::new(vec![None]));
        let ans = nt_value_one(&qbd());
        assert_eq!(ans.safe, vec![true, true]);
        let ans = nt_value_one(&incrementer());
        assert_eq!((ans.safe.clone(), ans.thresholds.clone()), (vec![false], vec![Some(0)]));
        assert!(nt_membership(&ans, 0, 0));
        assert!(!nt_membership(&ans, 0, 1));
        assert!(nt_membership(&nt_value_one(&w1((1, 3))), 0, 1_000_000_000));
    }

    #[test]
    fn nt_threshold_below_state_count() {
        // u can only step down into the upward sink v, or to w which falls
        let a = parse_ocmdp(
            "ocmdp\nstate u N\nstate v P\nstate w P\nprule u -1 w\nprule u +1 v\nprule v +1 v 1\nprule w +1 v 1\n\
             zrule u 0 u\nzrule v 0 v 1\nzrule w 0 w 1\n",
        )
        .unwrap();
        let ans = nt_value_one(&a);
        assert_eq!(ans.safe, vec![false; 3]);
        assert_eq!(ans.thresholds, vec![Some(1), Some(0), Some(0)]);
        assert_eq!(ans.strategy.get(0), Some(0));
    }

    #[test]
    fn reach_zero_examples() {
        assert!(bounded_reach_zero(&w1((1, 3)), Config::new(0, 3), None));
        assert!(!bounded_reach_zero(&incrementer(), Config::new(0, 1), None));
        let st = st_example();
        assert!(bounded_reach_zero(&st, Config::new(2, 5), None));
        assert!(!bounded_reach_zero(&st, Config::new(1, 0), None));
        let only_low = |_: usize, j: usize| j <= 2;
        assert!(!bounded_reach_zero(&st, Config::new(2, 5), Some(&only_low)));
    }

    #[test]
    fn periodic_construction() {
        let a = parse_ocmdp("ocmdp\nstate q P\nprule q -1 q 1\nzrule q 0 q 1\n").unwrap();
        let c = Coloring::new(1, 4, Color::Black);
        let per = build_periodic_ocmdp(&a, &c, 2, 1).unwrap();
        assert_eq!(per.ocmdp.names(), &["[q,1]".to_string()]);
        assert_eq!(per.ocmdp.positive_rules(), &[Rule::new(0, -1, 0, Some(Rational::one()))]);

        let st = st_example();
        let mut c = Coloring::new(3, 10, Color::White);
        for i in 0..10 {
            c.set(2, i, Color::Black);
        }
        let per = build_periodic_ocmdp(&st, &c, 8, 1).unwrap();
        assert_eq!(per.cells, vec![(2, 1)]);
        assert_eq!(per.ocmdp.positive_rules(), &[Rule::new(0, -1, 0, Some(Rational::one()))]);

        let up = parse_ocmdp("ocmdp\nstate q N\nprule q +1 q\nprule q -1 q\nzrule q 0 q\n").unwrap();
        let per = build_periodic_ocmdp(&up, &Coloring::new(1, 5, Color::Black), 2, 2).unwrap();
        let seam: Vec<(usize, i8, usize)> =
            per.ocmdp.positive_rules().iter().map(|r| (r.from, r.delta, r.to)).collect();
        assert_eq!(seam, vec![(0, 0, 1), (0, -1, 1), (1, 1, 0), (1, 0, 0)]);

        let mut c = Coloring::new(3, 10, Color::White);
        c.set(1, 9, Color::Black);
        assert!(matches!(build_periodic_ocmdp(&st, &c, 8, 1), Err(TerminationError::Precondition { .. })));
    }

    #[test]
    fn check_color_rules() {
        let a = parse_ocmdp("ocmdp\nstate x P\nstate y N\nprule x 0 x 1\nprule y 0 x\nzrule x 0 x 1\nzrule y 0 y\n")
            .unwrap();
        let mut b = Coloring::new(2, 6, Color::Gray);
        assert_eq!(check_color(&a, &b, 2, 1, 0, 1), Color::Gray);
        b.set(0, 1, Color::Black);
        // x(1) loops on itself: its only successor is black
        assert_eq!(check_color(&a, &b, 2, 1, 0, 1), Color::Black);
        let mut c = Coloring::new(2, 6, Color::White);
        c.set(1, 3, Color::Black);
        assert_eq!(check_color(&a, &c, 2, 1, 1, 3), Color::Red);
        let mut d = Coloring::new(2, 6, Color::Gray);
        d.set(0, 2, Color::Black);
        d.set(1, 2, Color::Gray);
        assert_eq!(check_color(&a, &d, 2, 1, 1, 2), Color::Black);
    }

    fn rows(rect: &StRectangles) -> Vec<String> {
        (0..rect.num_states())
            .map(|p| (0..=rect.n() + rect.period).map(|i| if rect.is_black(p, i as u64) { 'B' } else { 'W' }).collect())
            .collect()
    }

    #[test]
    fn st_example_rectangles() {
        let a = st_example();
        let (rect, aut) = st_optvalone(&a, 1).unwrap();
        assert_eq!(rect.period, 1);
        assert_eq!(rows(&rect), vec!["W".repeat(10), "W".repeat(10), "B".repeat(10)]);
        assert!(aut.accepts(2, 1000) && !aut.accepts(0, 1000) && !aut.accepts(1, 0));
        let text = rect.format(&a);
        assert!(text.starts_with("period ℓ=1\np WWWW"));
        assert_eq!(StRectangles::parse(&a, &text).unwrap(), rect);
        let s = st_optimal_strategy(&a, &rect).unwrap();
        let cells: Vec<(usize, u64)> = (0..10).map(|i| (2, i)).collect();
        assert!(certify_st(&a, &s, &cells).unwrap().iter().all(|&b| b));
        assert_eq!(certify_st(&a, &s, &[(1, 3), (0, 2)]).unwrap(), vec![false, false]);
    }

    #[test]
    fn t2_rectangles_and_strategy() {
        let a = t2();
        let (rect, _) = st_optvalone(&a, 2).unwrap();
        assert_eq!(rect.period, 1);
        let mut c = "W".to_string();
        c.push_str(&"B".repeat(9));
        assert_eq!(rows(&rect), vec![c, "B".repeat(10), "W".repeat(10)]);
        let s = st_optimal_strategy(&a, &rect).unwrap();
        for ph in 1..s.num_phases() {
            assert_eq!(s.table_entry(0, ph), Some(0));
        }
        let cells: Vec<(usize, u64)> = (1..9).map(|i| (0, i)).chain((0..9).map(|i| (1, i))).collect();
        assert!(certify_st(&a, &s, &cells).unwrap().iter().all(|&b| b));
    }

    #[test]
    fn unreachable_final_leaves_only_itself() {
        let a = parse_ocmdp(
            "ocmdp\nstate f P\nstate u P\nprule f +1 u 1\nprule u +1 u 1\nzrule f 0 f 1\nzrule u 0 u 1\nfinal f\n",
        )
        .unwrap();
        let (rect, _) = st_optvalone(&a, 1).unwrap();
        let mut f = "B".to_string();
        f.push_str(&"W".repeat(5));
        assert_eq!(rows(&rect), vec![f, "W".repeat(6)]);
    }

    #[test]
    fn merge_ignores_candidate_order() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let a = t2();
        let mut cands = st_candidates(&a, 1).unwrap();
        let want = st_merge(&a, &cands).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            cands.shuffle(&mut rng);
            assert_eq!(st_merge(&a, &cands).unwrap(), want);
        }
        assert_eq!(st_candidates(&a, 3).unwrap().len(), 64);
    }

    #[test]
    fn rectangles_are_a_check_color_fixpoint() {
        for a in [st_example(), t2()] {
            let (rect, _) = st_optvalone(&a, 1).unwrap();
            let c = rect.coloring();
            for i in 0..c.width() {
                for p in 0..a.num_states() {
                    assert_eq!(check_color(&a, &c, rect.n(), rect.period, p, i), c.get(p, i));
                }
            }
        }
    }

    #[test]
    fn st_needs_finals_and_small_inputs() {
        assert_eq!(st_optvalone(&w1((1, 3)), 1).unwrap_err(), TerminationError::NoFinals);
    }

    #[test]
    fn random_st_instances_certify() {
        use crate::oracle::{brute_force_st, random_ocmdp};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let a = random_ocmdp(&mut rng, 3, 3, true);
            let (rect, _) = st_optvalone(&a, 1).unwrap();
            let n = rect.n();
            assert!(rect.period >= 1 && rect.period <= n);
            assert_eq!(rect.initial[n], rect.periodic[rect.period - 1]);
            let s = st_optimal_strategy(&a, &rect)
                .unwrap_or_else(|e| panic!("{e}\n{}{}", crate::model::format_ocmdp(&a), rect.format(&a)));
            let cells: Vec<(usize, u64)> =
                (0..=(n + rect.period) as u64).flat_map(|i| (0..a.num_states()).map(move |p| (p, i))).collect();
            let ok = certify_st(&a, &s, &cells).unwrap();
            for (&(p, i), &c) in cells.iter().zip(&ok) {
                assert_eq!(c, rect.is_black(p, i), "{}({i}) in\n{}", a.name(p), crate::model::format_ocmdp(&a));
            }
            let brute = brute_force_st(&a, n, 4 * n, 1_000_000).unwrap();
            for (i, row) in brute.iter().enumerate() {
                for (p, &b) in row.iter().enumerate() {
                    assert!(!b || rect.is_black(p, i as u64));
                }
            }
        }
    }

    /// Restriction of `a` to the selector `f`: controlled states keep only
    /// the chosen positive rule and become probabilistic.
    fn fix(a: &OcMdp, f: &CmdStrategy) -> OcMdp {
        let one = Some(Rational::one());
        let pos = a
            .positive_rules()
            .iter()
            .enumerate()
            .filter(|(i, r)| !a.is_controlled(r.from) || f.get(r.from) == Some(*i))
            .map(|(_, r)| Rule { prob: r.prob.clone().or(one.clone()), ..r.clone() })
            .collect();
        let zero = a
            .zero_rules()
            .iter()
            .enumerate()
            .filter(|(i, r)| !a.is_controlled(r.from) || a.zero_out(r.from)[0] == *i)
            .map(|(_, r)| Rule { prob: r.prob.clone().or(one.clone()), ..r.clone() })
            .collect();
        OcMdp::new(a.names().to_vec(), vec![Owner::Probabilistic; a.num_states()], zero, pos, &[]).unwrap()
    }

    /// NT value-one flags over levels `0..=levels` under a fixed selector,
    /// from the chain alone: CN value one above `|Q|`, exact truncated
    /// reachability below.
    fn chain_nt(a: &OcMdp, f: &CmdStrategy, levels: usize) -> Vec<Vec<bool>> {
        let nq = a.num_states();
        let fixed = fix(a, f);
        let none = CmdStrategy::new(vec![None; nq]);
        let safe: Vec<bool> = (0..nq).map(|p| cmd_cn_value(&fixed, &none, p).is_one()).collect();
        let t = truncated_unfolding(&fixed, nq, true);
        let c = chain::induced_chain(&t.mdp, &MdStrategy::new(vec![None; t.mdp.num_vertices()])).unwrap();
        let target: Vec<bool> = (0..t.mdp.num_vertices())
            .map(|v| {
                let (p, i) = t.config(v);
                i == 0 || (i == nq && safe[p])
            })
            .collect();
        let pr = chain::reach_probabilities(&c, &target);
        (0..=levels)
            .map(|i| (0..nq).map(|p| if i >= nq { safe[p] } else { pr[t.vertex(p, i)].is_one() }).collect())
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn nt_matches_selector_enumeration(a in arb_ocmdp(3, 3)) {
            let nq = a.num_states();
            let ans = nt_value_one(&a);
            let levels = nq + 2;
            let mut best = vec![vec![false; nq]; levels + 1];
            for f in enumerate_cmd(&a, 1_000_000).unwrap() {
                for (i, row) in chain_nt(&a, &f, levels).into_iter().enumerate() {
                    for p in 0..nq {
                        best[i][p] |= row[p];
                    }
                }
            }
            let mine = chain_nt(&a, &ans.strategy, levels);
            for i in 0..=levels {
                for p in 0..nq {
                    prop_assert_eq!(nt_membership(&ans, p, i as u64), best[i][p]);
                    prop_assert_eq!(mine[i][p], best[i][p]);
                }
            }
            for p in (0..nq).filter(|&p| ans.safe[p]) {
                prop_assert!(ans.thresholds[p].is_none());
            }
            for t in ans.thresholds.iter().flatten() {
                prop_assert!(*t < nq);
            }
        }
    }
}
