//! Domain types: one-counter MDPs, finite reward MDPs, solvency games and
//! the strategy classes used across the crate.

mod construct;
mod text;

pub use construct::{to_boundaryless_reward_mdp, truncated_unfolding, BoundarylessMdp, TruncatedMdp};
pub use text::{
    format_aautomaton, format_cmd_strategy, format_counter_regular, format_md_strategy, format_mdp, format_ocmdp,
    format_solvency, parse_aautomaton, parse_cmd_strategy, parse_counter_regular, parse_md_strategy, parse_mdp,
    parse_ocmdp, parse_solvency,
};

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number; every probability, value and drift uses it.
pub type Rational = BigRational;

/// Renders `x` as `num/den`, always with an explicit denominator.
pub fn fmt_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `num/den` or a bare integer. The denominator must be positive.
pub fn parse_rational(tok: &str) -> Option<Rational> {
    let (n, d) = tok.split_once('/').unwrap_or((tok, "1"));
    if n.is_empty() || d.is_empty() || d.starts_with(['+', '-']) {
        return None;
    }
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if !d.is_positive() {
        return None;
    }
    Some(Rational::new(n, d))
}

pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Owner {
    Controlled,
    Probabilistic,
}

impl Owner {
    pub fn letter(self) -> char {
        match self {
            Owner::Controlled => 'N',
            Owner::Probabilistic => 'P',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Zero,
    Positive,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Zero => "zero",
            RuleKind::Positive => "positive",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("duplicate {kind} rule ({from},{delta},{to})")]
    DuplicateRule { kind: RuleKind, from: String, delta: i8, to: String },
    #[error("invalid delta {delta} for a {kind} rule")]
    BadDelta { kind: RuleKind, delta: i8 },
    #[error("state `{state}` has no outgoing {kind} rule")]
    MissingRule { state: String, kind: RuleKind },
    #[error("distribution sum ≠ 1 at `{at}` (sum is {sum})")]
    DistributionSum { at: String, sum: String },
    #[error("`{at}`: {msg}")]
    Probability { at: String, msg: String },
    #[error("final state `{0}` must have (q,0,q) as its only zero rule")]
    FinalNotNormalized(String),
    #[error("vertex `{0}` has no outgoing edge")]
    NoSuccessor(String),
    #[error("duplicate edge `{0}` -> `{1}`")]
    DuplicateEdge(String, String),
    #[error("index {0} out of range")]
    OutOfRange(usize),
    #[error("{0}")]
    Invalid(String),
}

/// A rule `(from, delta, to)`; `prob` is present exactly for rules out of
/// probabilistic states.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub from: usize,
    pub delta: i8,
    pub to: usize,
    pub prob: Option<Rational>,
}

impl Rule {
    pub fn new(from: usize, delta: i8, to: usize, prob: Option<Rational>) -> Self {
        Rule { from, delta, to, prob }
    }
}

fn check_distribution(at: &str, probs: &[&Rational]) -> Result<(), ModelError> {
    let mut sum = Rational::zero();
    for p in probs {
        if !p.is_positive() {
            return Err(ModelError::Probability {
                at: at.to_string(),
                msg: format!("probability {} is not positive", fmt_rational(p)),
            });
        }
        sum += *p;
    }
    if !sum.is_one() {
        return Err(ModelError::DistributionSum { at: at.to_string(), sum: fmt_rational(&sum) });
    }
    Ok(())
}

fn check_names(names: &[String]) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for n in names {
        if n.is_empty() || n.chars().any(char::is_whitespace) || n.starts_with('#') {
            return Err(ModelError::Invalid(format!("bad name `{n}`")));
        }
        if !seen.insert(n.as_str()) {
            return Err(ModelError::DuplicateName(n.clone()));
        }
    }
    Ok(())
}

/// One-counter MDP. States and rules keep their construction order, which
/// is also the tie-breaking order of every procedure in the crate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OcMdp {
    names: Vec<String>,
    owner: Vec<Owner>,
    zero_rules: Vec<Rule>,
    positive_rules: Vec<Rule>,
    finals: Vec<bool>,
    zero_out: Vec<Vec<usize>>,
    positive_out: Vec<Vec<usize>>,
}

impl OcMdp {
    pub fn new(
        names: Vec<String>,
        owner: Vec<Owner>,
        zero_rules: Vec<Rule>,
        positive_rules: Vec<Rule>,
        finals: &[usize],
    ) -> Result<Self, ModelError> {
        let n = names.len();
        if owner.len() != n {
            return Err(ModelError::Invalid("owner list length mismatch".into()));
        }
        if n == 0 {
            return Err(ModelError::Invalid("no states".into()));
        }
        check_names(&names)?;
        let mut final_flags = vec![false; n];
        for &f in finals {
            *final_flags.get_mut(f).ok_or(ModelError::OutOfRange(f))? = true;
        }
        let mut zero_out = vec![Vec::new(); n];
        let mut positive_out = vec![Vec::new(); n];
        for (kind, rules, out) in
            [(RuleKind::Zero, &zero_rules, &mut zero_out), (RuleKind::Positive, &positive_rules, &mut positive_out)]
        {
            let mut seen = HashSet::new();
            for (i, r) in rules.iter().enumerate() {
                if r.from >= n || r.to >= n {
                    return Err(ModelError::OutOfRange(r.from.max(r.to)));
                }
                let ok = match kind {
                    RuleKind::Zero => r.delta == 0 || r.delta == 1,
                    RuleKind::Positive => (-1..=1).contains(&r.delta),
                };
                if !ok {
                    return Err(ModelError::BadDelta { kind, delta: r.delta });
                }
                if !seen.insert((r.from, r.delta, r.to)) {
                    return Err(ModelError::DuplicateRule {
                        kind,
                        from: names[r.from].clone(),
                        delta: r.delta,
                        to: names[r.to].clone(),
                    });
                }
                match (owner[r.from], &r.prob) {
                    (Owner::Controlled, Some(_)) => {
                        return Err(ModelError::Probability {
                            at: names[r.from].clone(),
                            msg: "controlled state rules carry no probability".into(),
                        })
                    }
                    (Owner::Probabilistic, None) => {
                        return Err(ModelError::Probability {
                            at: names[r.from].clone(),
                            msg: "probabilistic state rules need a probability".into(),
                        })
                    }
                    _ => {}
                }
                out[r.from].push(i);
            }
            for p in 0..n {
                if out[p].is_empty() {
                    return Err(ModelError::MissingRule { state: names[p].clone(), kind });
                }
                if owner[p] == Owner::Probabilistic {
                    let probs: Vec<&Rational> = out[p].iter().map(|&i| rules[i].prob.as_ref().unwrap()).collect();
                    check_distribution(&format!("{} ({kind} rules)", names[p]), &probs)?;
                }
            }
        }
        for p in 0..n {
            if final_flags[p] {
                let z = &zero_out[p];
                if z.len() != 1 || zero_rules[z[0]].delta != 0 || zero_rules[z[0]].to != p {
                    return Err(ModelError::FinalNotNormalized(names[p].clone()));
                }
            }
        }
        Ok(OcMdp { names, owner, zero_rules, positive_rules, finals: final_flags, zero_out, positive_out })
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, p: usize) -> &str {
        &self.names[p]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn owner(&self, p: usize) -> Owner {
        self.owner[p]
    }

    pub fn is_controlled(&self, p: usize) -> bool {
        self.owner[p] == Owner::Controlled
    }

    pub fn zero_rules(&self) -> &[Rule] {
        &self.zero_rules
    }

    pub fn positive_rules(&self) -> &[Rule] {
        &self.positive_rules
    }

    /// Indices into `zero_rules()` of the rules leaving `p`.
    pub fn zero_out(&self, p: usize) -> &[usize] {
        &self.zero_out[p]
    }

    /// Indices into `positive_rules()` of the rules leaving `p`.
    pub fn positive_out(&self, p: usize) -> &[usize] {
        &self.positive_out[p]
    }

    pub fn is_final(&self, p: usize) -> bool {
        self.finals[p]
    }

    pub fn finals(&self) -> Vec<usize> {
        (0..self.num_states()).filter(|&p| self.finals[p]).collect()
    }

    pub fn has_finals(&self) -> bool {
        self.finals.iter().any(|&f| f)
    }

    /// Probability of a rule; 1 for rules out of controlled states.
    pub fn rule_prob(rule: &Rule) -> Rational {
        rule.prob.clone().unwrap_or_else(Rational::one)
    }

    /// Rules usable at counter value `counter` (zero rules at 0).
    pub fn rules_at(&self, p: usize, counter: i64) -> (&[usize], &[Rule]) {
        if counter == 0 {
            (&self.zero_out[p], &self.zero_rules)
        } else {
            (&self.positive_out[p], &self.positive_rules)
        }
    }
}

/// Finite MDP with vertex rewards in {-1,0,+1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteMdp {
    names: Vec<String>,
    owner: Vec<Owner>,
    reward: Vec<i8>,
    succ: Vec<Vec<usize>>,
    prob: Vec<Vec<Rational>>,
}

impl FiniteMdp {
    /// `prob[v]` must be empty for controlled `v` and parallel to `succ[v]`
    /// for probabilistic `v`.
    pub fn new(
        names: Vec<String>,
        owner: Vec<Owner>,
        reward: Vec<i8>,
        succ: Vec<Vec<usize>>,
        prob: Vec<Vec<Rational>>,
    ) -> Result<Self, ModelError> {
        let n = names.len();
        if owner.len() != n || reward.len() != n || succ.len() != n || prob.len() != n {
            return Err(ModelError::Invalid("vertex table length mismatch".into()));
        }
        check_names(&names)?;
        for v in 0..n {
            if !(-1..=1).contains(&reward[v]) {
                return Err(ModelError::Invalid(format!("reward of `{}` not in {{-1,0,1}}", names[v])));
            }
            if succ[v].is_empty() {
                return Err(ModelError::NoSuccessor(names[v].clone()));
            }
            let mut seen = HashSet::new();
            for &w in &succ[v] {
                if w >= n {
                    return Err(ModelError::OutOfRange(w));
                }
                if !seen.insert(w) {
                    return Err(ModelError::DuplicateEdge(names[v].clone(), names[w].clone()));
                }
            }
            match owner[v] {
                Owner::Controlled if !prob[v].is_empty() => {
                    return Err(ModelError::Probability {
                        at: names[v].clone(),
                        msg: "controlled vertex edges carry no probability".into(),
                    })
                }
                Owner::Probabilistic => {
                    if prob[v].len() != succ[v].len() {
                        return Err(ModelError::Probability {
                            at: names[v].clone(),
                            msg: "every edge of a probabilistic vertex needs a probability".into(),
                        });
                    }
                    check_distribution(&names[v], &prob[v].iter().collect::<Vec<_>>())?;
                }
                _ => {}
            }
        }
        Ok(FiniteMdp { names, owner, reward, succ, prob })
    }

    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn owner(&self, v: usize) -> Owner {
        self.owner[v]
    }

    pub fn is_controlled(&self, v: usize) -> bool {
        self.owner[v] == Owner::Controlled
    }

    pub fn reward(&self, v: usize) -> i8 {
        self.reward[v]
    }

    pub fn rewards(&self) -> &[i8] {
        &self.reward
    }

    pub fn succ(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    /// Edge probabilities of a probabilistic vertex, parallel to `succ(v)`.
    pub fn probs(&self, v: usize) -> &[Rational] {
        &self.prob[v]
    }

    /// Copy with the reward function replaced.
    pub fn with_rewards(&self, reward: Vec<i8>) -> Result<Self, ModelError> {
        FiniteMdp::new(self.names.clone(), self.owner.clone(), reward, self.succ.clone(), self.prob.clone())
    }

    /// Predecessor lists.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.num_vertices()];
        for v in 0..self.num_vertices() {
            for &w in &self.succ[v] {
                pred[w].push(v);
            }
        }
        pred
    }
}

/// Deterministic memoryless strategy: a successor for each controlled vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MdStrategy {
    choice: Vec<Option<usize>>,
}

impl MdStrategy {
    pub fn new(choice: Vec<Option<usize>>) -> Self {
        MdStrategy { choice }
    }

    /// Every controlled vertex takes its lowest-index successor.
    pub fn lowest(m: &FiniteMdp) -> Self {
        let choice = (0..m.num_vertices()).map(|v| m.is_controlled(v).then(|| m.succ(v)[0])).collect();
        MdStrategy { choice }
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        self.choice.get(v).copied().flatten()
    }

    pub fn set(&mut self, v: usize, w: usize) {
        self.choice[v] = Some(w);
    }

    pub fn choices(&self) -> &[Option<usize>] {
        &self.choice
    }

    pub fn validate(&self, m: &FiniteMdp) -> Result<(), ModelError> {
        if self.choice.len() != m.num_vertices() {
            return Err(ModelError::Invalid("strategy size mismatch".into()));
        }
        for v in 0..m.num_vertices() {
            match (m.is_controlled(v), self.choice[v]) {
                (true, Some(w)) if m.succ(v).contains(&w) => {}
                (true, Some(w)) => {
                    return Err(ModelError::Invalid(format!(
                        "`{}` -> `{}` is not an edge",
                        m.name(v),
                        m.names.get(w).map(String::as_str).unwrap_or("?")
                    )))
                }
                (true, None) => return Err(ModelError::Invalid(format!("no choice at `{}`", m.name(v)))),
                (false, Some(_)) => {
                    return Err(ModelError::Invalid(format!("choice at probabilistic `{}`", m.name(v))))
                }
                (false, None) => {}
            }
        }
        Ok(())
    }
}

/// Counter-oblivious selector: a positive rule for every controlled state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CmdStrategy {
    selector: Vec<Option<usize>>,
}

impl CmdStrategy {
    pub fn new(selector: Vec<Option<usize>>) -> Self {
        CmdStrategy { selector }
    }

    /// Index into `positive_rules()` chosen at `p`.
    pub fn get(&self, p: usize) -> Option<usize> {
        self.selector.get(p).copied().flatten()
    }

    pub fn selector(&self) -> &[Option<usize>] {
        &self.selector
    }

    pub fn validate(&self, a: &OcMdp) -> Result<(), ModelError> {
        if self.selector.len() != a.num_states() {
            return Err(ModelError::Invalid("selector size mismatch".into()));
        }
        for p in 0..a.num_states() {
            match (a.is_controlled(p), self.selector[p]) {
                (true, Some(r)) if a.positive_out(p).contains(&r) => {}
                (true, _) => return Err(ModelError::Invalid(format!("bad or missing selection at `{}`", a.name(p)))),
                (false, Some(_)) => {
                    return Err(ModelError::Invalid(format!("selection at probabilistic `{}`", a.name(p))))
                }
                (false, None) => {}
            }
        }
        Ok(())
    }
}

/// Deterministic finite-memory strategy. The memory is the automaton state
/// after reading the history including the current vertex: starting from
/// `initial`, entering vertex `v` moves memory `k` to `step(k, v)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FdStrategy {
    memory: usize,
    vertices: usize,
    initial: usize,
    step: Vec<usize>,
    choice: Vec<usize>,
}

impl FdStrategy {
    /// `step[k * vertices + v]` and `choice[v * memory + k]`; choices at
    /// probabilistic vertices are ignored.
    ///
    /// The memory is updated on entering a vertex, so the choice at `v`
    /// sees the state reached after reading `v` itself; a run from `s`
    /// starts in `step(initial, s)`.
    pub fn new(
        m: &FiniteMdp,
        memory: usize,
        initial: usize,
        step: Vec<usize>,
        choice: Vec<usize>,
    ) -> Result<Self, ModelError> {
        let nv = m.num_vertices();
        if memory == 0 || initial >= memory || step.len() != memory * nv || choice.len() != memory * nv {
            return Err(ModelError::Invalid("malformed finite-memory strategy".into()));
        }
        if let Some(&k) = step.iter().find(|&&k| k >= memory) {
            return Err(ModelError::OutOfRange(k));
        }
        for v in 0..nv {
            if m.is_controlled(v) {
                for k in 0..memory {
                    let w = choice[v * memory + k];
                    if !m.succ(v).contains(&w) {
                        return Err(ModelError::Invalid(format!("memory {k}: bad choice at `{}`", m.name(v))));
                    }
                }
            }
        }
        Ok(FdStrategy { memory, vertices: nv, initial, step, choice })
    }

    /// Memoryless strategy viewed as a one-state automaton.
    pub fn from_md(m: &FiniteMdp, s: &MdStrategy) -> Result<Self, ModelError> {
        s.validate(m)?;
        let nv = m.num_vertices();
        let choice = (0..nv).map(|v| s.get(v).unwrap_or(m.succ(v)[0])).collect();
        FdStrategy::new(m, 1, 0, vec![0; nv], choice)
    }

    pub fn memory_size(&self) -> usize {
        self.memory
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn step(&self, k: usize, v: usize) -> usize {
        self.step[k * self.vertices + v]
    }

    pub fn choice(&self, v: usize, k: usize) -> usize {
        self.choice[v * self.memory + k]
    }
}

/// One-letter DFA with a per-state entry map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AAutomaton {
    advance: Vec<usize>,
    accepting: Vec<bool>,
    entry: Vec<usize>,
}

impl AAutomaton {
    pub fn new(advance: Vec<usize>, accepting: Vec<bool>, entry: Vec<usize>) -> Result<Self, ModelError> {
        let n = advance.len();
        if n == 0 || accepting.len() != n {
            return Err(ModelError::Invalid("malformed automaton".into()));
        }
        if let Some(&c) = advance.iter().chain(entry.iter()).find(|&&c| c >= n) {
            return Err(ModelError::OutOfRange(c));
        }
        Ok(AAutomaton { advance, accepting, entry })
    }

    pub fn num_dfa_states(&self) -> usize {
        self.advance.len()
    }

    pub fn advance(&self, c: usize) -> usize {
        self.advance[c]
    }

    pub fn is_accepting(&self, c: usize) -> bool {
        self.accepting[c]
    }

    pub fn entry(&self, p: usize) -> usize {
        self.entry[p]
    }

    pub fn num_entries(&self) -> usize {
        self.entry.len()
    }

    /// DFA state reached from `c` after reading `i` letters.
    pub fn run_from(&self, c: usize, i: u64) -> usize {
        let n = self.advance.len();
        let mut first_seen = vec![u64::MAX; n];
        let mut cur = c;
        let mut t = 0u64;
        while t < i {
            if first_seen[cur] != u64::MAX {
                let cycle = t - first_seen[cur];
                let rest = (i - t) % cycle;
                for _ in 0..rest {
                    cur = self.advance[cur];
                }
                return cur;
            }
            first_seen[cur] = t;
            cur = self.advance[cur];
            t += 1;
        }
        cur
    }

    /// Whether configuration `p(i)` is recognized.
    pub fn accepts(&self, p: usize, i: u64) -> bool {
        self.accepting[self.run_from(self.entry[p], i)]
    }
}

/// Strategy whose choice at `p(i)` depends on `p` and the phase of `i`:
/// phases `0..=threshold+period`, with counters above `threshold+period`
/// cycling through the last `period` phases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterRegularStrategy {
    threshold: u64,
    period: u64,
    automaton: AAutomaton,
    table: Vec<Option<usize>>,
}

impl CounterRegularStrategy {
    /// `table[p * phases + phase]`, `phases = threshold + period + 1`.
    pub fn new(a: &OcMdp, threshold: u64, period: u64, table: Vec<Option<usize>>) -> Result<Self, ModelError> {
        if period == 0 {
            return Err(ModelError::Invalid("period must be positive".into()));
        }
        let phases = (threshold + period + 1) as usize;
        if table.len() != phases * a.num_states() {
            return Err(ModelError::Invalid("strategy table size mismatch".into()));
        }
        for p in 0..a.num_states() {
            for ph in 0..phases {
                let Some(r) = table[p * phases + ph] else { continue };
                let ok = if ph == 0 { a.zero_out(p).contains(&r) } else { a.positive_out(p).contains(&r) };
                if !a.is_controlled(p) || !ok {
                    return Err(ModelError::Invalid(format!("bad selection at `{}` phase {ph}", a.name(p))));
                }
            }
        }
        let mut advance: Vec<usize> = (1..phases).collect();
        advance.push(threshold as usize + 1);
        let automaton = AAutomaton::new(advance, vec![false; phases], vec![0; a.num_states()])?;
        Ok(CounterRegularStrategy { threshold, period, automaton, table })
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn num_phases(&self) -> usize {
        (self.threshold + self.period + 1) as usize
    }

    pub fn automaton(&self) -> &AAutomaton {
        &self.automaton
    }

    pub fn phase(&self, counter: u64) -> usize {
        let (t, l) = (self.threshold, self.period);
        if counter <= t + l {
            counter as usize
        } else {
            (t + 1 + (counter - t - 1) % l) as usize
        }
    }

    /// Rule chosen at `p(counter)`: an index into `zero_rules()` at counter
    /// 0, into `positive_rules()` otherwise.
    pub fn rule(&self, p: usize, counter: u64) -> Option<usize> {
        self.table[p * self.num_phases() + self.phase(counter)]
    }

    pub fn table_entry(&self, p: usize, phase: usize) -> Option<usize> {
        self.table[p * self.num_phases() + phase]
    }
}

/// Configuration `state(counter)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Config {
    pub state: usize,
    pub counter: i64,
}

impl Config {
    pub fn new(state: usize, counter: i64) -> Self {
        Config { state, counter }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pub name: String,
    pub outcomes: Vec<(i64, Rational)>,
}

/// Solvency game: a list of finite-support wealth-change distributions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolvencyGame {
    actions: Vec<Action>,
}

impl SolvencyGame {
    pub fn new(actions: Vec<Action>) -> Result<Self, ModelError> {
        if actions.is_empty() {
            return Err(ModelError::Invalid("no actions".into()));
        }
        check_names(&actions.iter().map(|a| a.name.clone()).collect::<Vec<_>>())?;
        for a in &actions {
            if a.outcomes.is_empty() {
                return Err(ModelError::Invalid(format!("action `{}` has empty support", a.name)));
            }
            let mut seen = HashSet::new();
            for (d, _) in &a.outcomes {
                if !seen.insert(*d) {
                    return Err(ModelError::Invalid(format!("action `{}` repeats delta {d}", a.name)));
                }
            }
            check_distribution(&a.name, &a.outcomes.iter().map(|(_, p)| p).collect::<Vec<_>>())?;
        }
        Ok(SolvencyGame { actions })
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_text() {
        assert_eq!(parse_rational("2/4"), Some(rational(1, 2)));
        assert_eq!(parse_rational("3"), Some(rational(3, 1)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("1/-2"), None);
        assert_eq!(parse_rational("/2"), None);
        assert_eq!(fmt_rational(&rational(1, 1)), "1/1");
        assert_eq!(fmt_rational(&rational(-2, 6)), "-1/3");
    }

    #[test]
    fn automaton_run_wraps_into_cycle() {
        let a = AAutomaton::new(vec![1, 2, 1], vec![false, true, false], vec![0]).unwrap();
        assert_eq!(a.run_from(0, 0), 0);
        assert_eq!(a.run_from(0, 1), 1);
        assert_eq!(a.run_from(0, 2), 2);
        assert_eq!(a.run_from(0, 1_000_000_001), 1);
        assert!(a.accepts(0, 999));
        assert!(!a.accepts(0, 1000));
    }

    #[test]
    fn md_strategy_validation() {
        let m = FiniteMdp::new(
            vec!["u".into(), "a".into()],
            vec![Owner::Controlled, Owner::Probabilistic],
            vec![0, -1],
            vec![vec![0, 1], vec![0]],
            vec![vec![], vec![rational(1, 1)]],
        )
        .unwrap();
        assert!(MdStrategy::lowest(&m).validate(&m).is_ok());
        assert!(MdStrategy::new(vec![None, None]).validate(&m).is_err());
        assert!(MdStrategy::new(vec![Some(1), Some(0)]).validate(&m).is_err());
    }

    #[test]
    fn finite_mdp_rejects_bad_distribution() {
        let r = FiniteMdp::new(
            vec!["a".into(), "b".into()],
            vec![Owner::Probabilistic, Owner::Controlled],
            vec![0, 0],
            vec![vec![0, 1], vec![1]],
            vec![vec![rational(1, 2), rational(1, 3)], vec![]],
        );
        assert!(matches!(r, Err(ModelError::DistributionSum { .. })));
    }
}
