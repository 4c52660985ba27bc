use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::construct::fmt_delta;
use super::{
    fmt_rational, parse_rational, AAutomaton, Action, CmdStrategy, CounterRegularStrategy, FiniteMdp, MdStrategy,
    ModelError, OcMdp, Owner, Rational, Rule, SolvencyGame,
};

/// Upper bound on table sizes accepted from text, so hostile inputs cannot
/// request huge allocations.
const MAX_TABLE: u64 = 1 << 24;

fn syntax(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Syntax { line, msg: msg.into() }
}

/// Non-empty lines with comments stripped, as (1-based line number, tokens).
fn lines(text: &str) -> Vec<(usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("");
            let toks: Vec<&str> = l.split_whitespace().collect();
            (!toks.is_empty()).then_some((i + 1, toks))
        })
        .collect()
}

fn expect_header<'a>(ls: &'a [(usize, Vec<&'a str>)], header: &str) -> Result<&'a [(usize, Vec<&'a str>)], ModelError> {
    match ls.first() {
        Some((_, t)) if t.len() == 1 && t[0] == header => Ok(&ls[1..]),
        Some((n, _)) => Err(syntax(*n, format!("expected header `{header}`"))),
        None => Err(syntax(1, format!("empty input, expected header `{header}`"))),
    }
}

fn owner_tok(line: usize, t: &str) -> Result<Owner, ModelError> {
    match t {
        "N" => Ok(Owner::Controlled),
        "P" => Ok(Owner::Probabilistic),
        _ => Err(syntax(line, format!("owner must be N or P, got `{t}`"))),
    }
}

fn delta_tok(line: usize, t: &str) -> Result<i8, ModelError> {
    match t {
        "-1" => Ok(-1),
        "0" | "+0" | "-0" => Ok(0),
        "+1" | "1" => Ok(1),
        _ => Err(syntax(line, format!("bad counter change `{t}`"))),
    }
}

fn prob_tok(line: usize, t: &str) -> Result<Rational, ModelError> {
    parse_rational(t).ok_or_else(|| syntax(line, format!("bad rational `{t}`")))
}

fn lookup(line: usize, index: &HashMap<&str, usize>, name: &str) -> Result<usize, ModelError> {
    index.get(name).copied().ok_or_else(|| syntax(line, format!("unknown name `{name}`")))
}

pub fn parse_ocmdp(text: &str) -> Result<OcMdp, ModelError> {
    let ls = lines(text);
    let body = expect_header(&ls, "ocmdp")?;
    let mut names = Vec::new();
    let mut owner = Vec::new();
    for (n, t) in body {
        if t[0] == "state" {
            if t.len() != 3 {
                return Err(syntax(*n, "expected `state <name> N|P`"));
            }
            if names.iter().any(|x: &String| x == t[1]) {
                return Err(syntax(*n, format!("duplicate state `{}`", t[1])));
            }
            names.push(t[1].to_string());
            owner.push(owner_tok(*n, t[2])?);
        }
    }
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut zero = Vec::new();
    let mut pos = Vec::new();
    let mut finals = Vec::new();
    let mut seen = HashSet::new();
    for (n, t) in body {
        match t[0] {
            "state" => {}
            "zrule" | "prule" => {
                if t.len() != 4 && t.len() != 5 {
                    return Err(syntax(*n, format!("expected `{} <p> <d> <q> [<num>/<den>]`", t[0])));
                }
                let from = lookup(*n, &index, t[1])?;
                let delta = delta_tok(*n, t[2])?;
                let to = lookup(*n, &index, t[3])?;
                let zero_kind = t[0] == "zrule";
                if zero_kind && delta < 0 {
                    return Err(syntax(*n, "zero rules cannot decrement"));
                }
                if !seen.insert((zero_kind, from, delta, to)) {
                    return Err(syntax(*n, "duplicate rule"));
                }
                let prob = match (owner[from], t.get(4)) {
                    (Owner::Probabilistic, Some(p)) => Some(prob_tok(*n, p)?),
                    (Owner::Probabilistic, None) => return Err(syntax(*n, "rules of P states need a probability")),
                    (Owner::Controlled, Some(_)) => return Err(syntax(*n, "rules of N states take no probability")),
                    (Owner::Controlled, None) => None,
                };
                let r = Rule::new(from, delta, to, prob);
                if zero_kind {
                    zero.push(r);
                } else {
                    pos.push(r);
                }
            }
            "final" => {
                if t.len() != 2 {
                    return Err(syntax(*n, "expected `final <q>`"));
                }
                let q = lookup(*n, &index, t[1])?;
                if !finals.contains(&q) {
                    finals.push(q);
                }
            }
            other => return Err(syntax(*n, format!("unknown directive `{other}`"))),
        }
    }
    OcMdp::new(names, owner, zero, pos, &finals)
}

pub fn format_ocmdp(a: &OcMdp) -> String {
    let mut s = String::from("ocmdp\n");
    for p in 0..a.num_states() {
        let _ = writeln!(s, "state {} {}", a.name(p), a.owner(p).letter());
    }
    for (kw, rules) in [("zrule", a.zero_rules()), ("prule", a.positive_rules())] {
        for r in rules {
            let _ = write!(s, "{kw} {} {} {}", a.name(r.from), fmt_delta(r.delta), a.name(r.to));
            if let Some(p) = &r.prob {
                let _ = write!(s, " {}", fmt_rational(p));
            }
            s.push('\n');
        }
    }
    for q in a.finals() {
        let _ = writeln!(s, "final {}", a.name(q));
    }
    s
}

pub fn parse_mdp(text: &str) -> Result<FiniteMdp, ModelError> {
    let ls = lines(text);
    let body = expect_header(&ls, "mdp")?;
    let mut names = Vec::new();
    let mut owner = Vec::new();
    let mut reward = Vec::new();
    for (n, t) in body {
        if t[0] == "vertex" {
            if t.len() != 4 {
                return Err(syntax(*n, "expected `vertex <name> N|P r=<-1|0|1>`"));
            }
            if names.iter().any(|x: &String| x == t[1]) {
                return Err(syntax(*n, format!("duplicate vertex `{}`", t[1])));
            }
            names.push(t[1].to_string());
            owner.push(owner_tok(*n, t[2])?);
            let r = t[3].strip_prefix("r=").ok_or_else(|| syntax(*n, "expected `r=<reward>`"))?;
            reward.push(delta_tok(*n, r)?);
        }
    }
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut succ = vec![Vec::new(); names.len()];
    let mut prob = vec![Vec::new(); names.len()];
    for (n, t) in body {
        match t[0] {
            "vertex" => {}
            "edge" => {
                if t.len() != 3 && t.len() != 4 {
                    return Err(syntax(*n, "expected `edge <u> <v> [<num>/<den>]`"));
                }
                let u = lookup(*n, &index, t[1])?;
                let v = lookup(*n, &index, t[2])?;
                if succ[u].contains(&v) {
                    return Err(syntax(*n, "duplicate edge"));
                }
                match (owner[u], t.get(3)) {
                    (Owner::Probabilistic, Some(p)) => prob[u].push(prob_tok(*n, p)?),
                    (Owner::Probabilistic, None) => return Err(syntax(*n, "edges of P vertices need a probability")),
                    (Owner::Controlled, Some(_)) => return Err(syntax(*n, "edges of N vertices take no probability")),
                    (Owner::Controlled, None) => {}
                }
                succ[u].push(v);
            }
            other => return Err(syntax(*n, format!("unknown directive `{other}`"))),
        }
    }
    FiniteMdp::new(names, owner, reward, succ, prob)
}

pub fn format_mdp(m: &FiniteMdp) -> String {
    let mut s = String::from("mdp\n");
    for v in 0..m.num_vertices() {
        let _ = writeln!(s, "vertex {} {} r={}", m.name(v), m.owner(v).letter(), m.reward(v));
    }
    for v in 0..m.num_vertices() {
        for (k, &w) in m.succ(v).iter().enumerate() {
            let _ = write!(s, "edge {} {}", m.name(v), m.name(w));
            if let Some(p) = m.probs(v).get(k) {
                let _ = write!(s, " {}", fmt_rational(p));
            }
            s.push('\n');
        }
    }
    s
}

pub fn parse_solvency(text: &str) -> Result<SolvencyGame, ModelError> {
    let ls = lines(text);
    let body = expect_header(&ls, "solvency")?;
    let mut actions: Vec<Action> = Vec::new();
    for (n, t) in body {
        match t[0] {
            "action" => {
                if t.len() != 2 {
                    return Err(syntax(*n, "expected `action <name>`"));
                }
                actions.push(Action { name: t[1].to_string(), outcomes: Vec::new() });
            }
            "outcome" => {
                if t.len() != 3 {
                    return Err(syntax(*n, "expected `outcome <delta> <num>/<den>`"));
                }
                let a = actions.last_mut().ok_or_else(|| syntax(*n, "outcome before any action"))?;
                let d: i64 = t[1].parse().map_err(|_| syntax(*n, format!("bad delta `{}`", t[1])))?;
                if d.unsigned_abs() > MAX_TABLE {
                    return Err(syntax(*n, "delta too large"));
                }
                a.outcomes.push((d, prob_tok(*n, t[2])?));
            }
            other => return Err(syntax(*n, format!("unknown directive `{other}`"))),
        }
    }
    SolvencyGame::new(actions)
}

pub fn format_solvency(g: &SolvencyGame) -> String {
    let mut s = String::from("solvency\n");
    for a in g.actions() {
        let _ = writeln!(s, "action {}", a.name);
        for (d, p) in &a.outcomes {
            let _ = writeln!(s, "outcome {d} {}", fmt_rational(p));
        }
    }
    s
}

fn state_index(a: &OcMdp) -> HashMap<&str, usize> {
    a.names().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

fn find_rule(rules: &[Rule], out: &[usize], delta: i8, to: usize) -> Option<usize> {
    out.iter().copied().find(|&i| rules[i].delta == delta && rules[i].to == to)
}

pub fn parse_cmd_strategy(a: &OcMdp, text: &str) -> Result<CmdStrategy, ModelError> {
    let ls = lines(text);
    let body = expect_header(&ls, "cmd")?;
    let index = state_index(a);
    let mut sel = vec![None; a.num_states()];
    for (n, t) in body {
        if t[0] != "select" || t.len() != 4 {
            return Err(syntax(*n, "expected `select <state> <d> <target>`"));
        }
        let p = lookup(*n, &index, t[1])?;
        let d = delta_tok(*n, t[2])?;
        let q = lookup(*n, &index, t[3])?;
        let r = find_rule(a.positive_rules(), a.positive_out(p), d, q)
            .ok_or_else(|| syntax(*n, "no such positive rule"))?;
        if sel[p].replace(r).is_some() {
            return Err(syntax(*n, "state selected twice"));
        }
    }
    let s = CmdStrategy::new(sel);
    s.validate(a)?;
    Ok(s)
}

pub fn format_cmd_strategy(a: &OcMdp, s: &CmdStrategy) -> String {
    let mut out = String::from("cmd\n");
    for p in 0..a.num_states() {
        if let Some(r) = s.get(p) {
            let r = &a.positive_rules()[r];
            let _ = writeln!(out, "select {} {} {}", a.name(p), fmt_delta(r.delta), a.name(r.to));
        }
    }
    out
}

pub fn parse_md_strategy(m: &FiniteMdp, text: &str) -> Result<MdStrategy, ModelError> {
    let ls = lines(text);
    let body = expect_header(&ls, "md")?;
    let index: HashMap<&str, usize> = m.names().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut choice = vec![None; m.num_vertices()];
    for (n, t) in body {
        if t[0] != "choose" || t.len() != 3 {
            return Err(syntax(*n, "expected `choose <vertex> <vertex>`"));
        }
        let u = lookup(*n, &index, t[1])?;
        let v = lookup(*n, &index, t[2])?;
        if choice[u].replace(v).is_some() {
            return Err(syntax(*n, "vertex chosen twice"));
        }
    }
    let s = MdStrategy::new(choice);
    s.validate(m)?;
    Ok(s)
}

pub fn format_md_strategy(m: &FiniteMdp, s: &MdStrategy) -> String {
    let mut out = String::from("md\n");
    for v in 0..m.num_vertices() {
        if let Some(w) = s.get(v) {
            let _ = writeln!(out, "choose {} {}", m.name(v), m.name(w));
        }
    }
    out
}

fn key_value(line: usize, tok: &str, key: &str) -> Result<u64, ModelError> {
    tok.strip_prefix(key)
        .and_then(|x| x.strip_prefix('='))
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| syntax(line, format!("expected `{key}=<n>`")))
}

pub fn parse_counter_regular(a: &OcMdp, text: &str) -> Result<CounterRegularStrategy, ModelError> {
    let ls = lines(text);
    let (n0, head) = ls.first().ok_or_else(|| syntax(1, "empty input"))?;
    if head.len() != 3 || head[0] != "cregular" {
        return Err(syntax(*n0, "expected `cregular threshold=<t> period=<l>`"));
    }
    let threshold = key_value(*n0, head[1], "threshold")?;
    let period = key_value(*n0, head[2], "period")?;
    let phases = threshold
        .checked_add(period)
        .and_then(|x| x.checked_add(1))
        .filter(|&x| x.saturating_mul(a.num_states() as u64) <= MAX_TABLE)
        .ok_or_else(|| syntax(*n0, "strategy table too large"))? as usize;
    let index = state_index(a);
    let mut table = vec![None; phases * a.num_states()];
    for (n, t) in &ls[1..] {
        if t[0] != "select" || t.len() != 5 {
            return Err(syntax(*n, "expected `select <state> <phase> <d> <target>`"));
        }
        let p = lookup(*n, &index, t[1])?;
        let ph: usize = t[2].parse().map_err(|_| syntax(*n, "bad phase"))?;
        if ph >= phases {
            return Err(syntax(*n, "phase out of range"));
        }
        let d = delta_tok(*n, t[3])?;
        let q = lookup(*n, &index, t[4])?;
        let r = if ph == 0 {
            find_rule(a.zero_rules(), a.zero_out(p), d, q)
        } else {
            find_rule(a.positive_rules(), a.positive_out(p), d, q)
        }
        .ok_or_else(|| syntax(*n, "no such rule"))?;
        if table[p * phases + ph].replace(r).is_some() {
            return Err(syntax(*n, "selection repeated"));
        }
    }
    CounterRegularStrategy::new(a, threshold, period, table)
}

pub fn format_counter_regular(a: &OcMdp, s: &CounterRegularStrategy) -> String {
    let mut out = format!("cregular threshold={} period={}\n", s.threshold(), s.period());
    for p in 0..a.num_states() {
        for ph in 0..s.num_phases() {
            if let Some(r) = s.table_entry(p, ph) {
                let r = if ph == 0 { &a.zero_rules()[r] } else { &a.positive_rules()[r] };
                let _ = writeln!(out, "select {} {ph} {} {}", a.name(p), fmt_delta(r.delta), a.name(r.to));
            }
        }
    }
    out
}

pub fn parse_aautomaton(a: &OcMdp, text: &str) -> Result<AAutomaton, ModelError> {
    let ls = lines(text);
    let body = expect_header(&ls, "aautomaton")?;
    let index = state_index(a);
    let mut entry = vec![None; a.num_states()];
    let mut steps: Vec<(usize, usize)> = Vec::new();
    let mut accepts = Vec::new();
    let mut size = 0usize;
    let dfa = |n: usize, t: &str| -> Result<usize, ModelError> {
        let c: u64 = t.parse().map_err(|_| syntax(n, format!("bad dfa state `{t}`")))?;
        if c >= MAX_TABLE {
            return Err(syntax(n, "dfa state index too large"));
        }
        Ok(c as usize)
    };
    for (n, t) in body {
        match (t[0], t.len()) {
            ("entry", 3) => {
                let p = lookup(*n, &index, t[1])?;
                let c = dfa(*n, t[2])?;
                size = size.max(c + 1);
                if entry[p].replace(c).is_some() {
                    return Err(syntax(*n, "entry repeated"));
                }
            }
            ("step", 3) => {
                let (c, d) = (dfa(*n, t[1])?, dfa(*n, t[2])?);
                size = size.max(c + 1).max(d + 1);
                steps.push((c, d));
            }
            ("accept", 2) => {
                let c = dfa(*n, t[1])?;
                size = size.max(c + 1);
                accepts.push(c);
            }
            _ => return Err(syntax(*n, "expected `entry`, `step` or `accept` line")),
        }
    }
    let mut advance = vec![None; size];
    for (c, d) in steps {
        if advance[c].replace(d).is_some() {
            return Err(ModelError::Invalid(format!("dfa state {c} has two steps")));
        }
    }
    let advance = advance
        .into_iter()
        .enumerate()
        .map(|(c, d)| d.ok_or_else(|| ModelError::Invalid(format!("dfa state {c} has no step"))))
        .collect::<Result<Vec<_>, _>>()?;
    let entry = entry
        .into_iter()
        .enumerate()
        .map(|(p, c)| c.ok_or_else(|| ModelError::Invalid(format!("no entry for `{}`", a.name(p)))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut accepting = vec![false; size];
    for c in accepts {
        accepting[c] = true;
    }
    AAutomaton::new(advance, accepting, entry)
}

pub fn format_aautomaton(a: &OcMdp, m: &AAutomaton) -> String {
    let mut out = String::from("aautomaton\n");
    for p in 0..a.num_states() {
        let _ = writeln!(out, "entry {} {}", a.name(p), m.entry(p));
    }
    for c in 0..m.num_dfa_states() {
        let _ = writeln!(out, "step {c} {}", m.advance(c));
    }
    for c in 0..m.num_dfa_states() {
        if m.is_accepting(c) {
            let _ = writeln!(out, "accept {c}");
        }
    }
    out
}
