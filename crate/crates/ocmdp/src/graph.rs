//! Graph algorithms shared by the chain and MDP procedures.

use std::collections::VecDeque;

use crate::model::FiniteMdp;

/// Strongly connected components of the subgraph induced by `active`.
/// Members are sorted; components are ordered by their lowest member.
pub fn sccs(adj: &[Vec<usize>], active: &[bool]) -> Vec<Vec<usize>> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    for s in 0..n {
        if !active[s] || index[s] != UNSEEN {
            continue;
        }
        index[s] = counter;
        low[s] = counter;
        counter += 1;
        stack.push(s);
        on_stack[s] = true;
        call.push((s, 0));
        while let Some(top) = call.last_mut() {
            let v = top.0;
            if top.1 < adj[v].len() {
                let w = adj[v][top.1];
                top.1 += 1;
                if !active[w] {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out.sort_by_key(|c| c[0]);
    out
}

/// Components of `sccs` with no edge leaving them (towards active nodes).
pub fn bottom_sccs(adj: &[Vec<usize>], active: &[bool]) -> Vec<Vec<usize>> {
    let comps = sccs(adj, active);
    let mut comp_of = vec![usize::MAX; adj.len()];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v] = i;
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter(|(i, c)| c.iter().all(|&v| adj[v].iter().all(|&w| !active[w] || comp_of[w] == *i)))
        .map(|(_, c)| c)
        .collect()
}

/// Nodes reachable from `from` (inclusive) along `adj`.
pub fn forward_reach(adj: &[Vec<usize>], from: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in from {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Vertices with some path to `target` that stays inside `within`
/// (targets count regardless of `within`).
pub fn can_reach(m: &FiniteMdp, target: &[bool], within: &[bool]) -> Vec<bool> {
    let pred = m.predecessors();
    let mut seen = vec![false; m.num_vertices()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for v in 0..m.num_vertices() {
        if target[v] {
            seen[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(w) = queue.pop_front() {
        for &u in &pred[w] {
            if !seen[u] && within[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// Breadth-first distance to `target` inside `within`, using only edges
/// between members of `within`, plus for each controlled non-target vertex
/// at finite distance the lowest-index successor one step closer.
pub fn distance_strategy(m: &FiniteMdp, target: &[bool], within: &[bool]) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let n = m.num_vertices();
    let pred = m.predecessors();
    let mut dist: Vec<Option<usize>> = vec![None; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for v in 0..n {
        if target[v] && within[v] {
            dist[v] = Some(0);
            queue.push_back(v);
        }
    }
    while let Some(w) = queue.pop_front() {
        let d = dist[w].unwrap();
        for &u in &pred[w] {
            if dist[u].is_none() && within[u] {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    let mut choice = vec![None; n];
    for v in 0..n {
        if !m.is_controlled(v) {
            continue;
        }
        match dist[v] {
            Some(0) => {}
            Some(d) => {
                choice[v] = m.succ(v).iter().copied().filter(|&w| within[w] && dist[w] == Some(d - 1)).min();
            }
            None => {}
        }
    }
    (dist, choice)
}

/// Vertices from which some strategy reaches `target` with probability 1,
/// together with a memoryless witness defined on the winning controlled
/// non-target vertices. Purely graph-theoretic.
pub fn almost_sure_reach(m: &FiniteMdp, target: &[bool]) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = m.num_vertices();
    let mut win = vec![true; n];
    loop {
        let reach = can_reach(m, target, &win);
        let mut changed = false;
        for v in 0..n {
            if win[v] && !reach[v] {
                win[v] = false;
                changed = true;
            }
        }
        // drop vertices that cannot avoid leaving the candidate set
        let mut again = true;
        while again {
            again = false;
            for v in 0..n {
                if !win[v] || target[v] {
                    continue;
                }
                let stays = if m.is_controlled(v) {
                    m.succ(v).iter().any(|&w| win[w])
                } else {
                    m.succ(v).iter().all(|&w| win[w])
                };
                if !stays {
                    win[v] = false;
                    again = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let (_, choice) = distance_strategy(m, target, &win);
    (win, choice)
}

/// Maximal end components of the sub-MDP induced by `within`, ordered by
/// lowest member.
pub fn mecs(m: &FiniteMdp, within: &[bool]) -> Vec<Vec<usize>> {
    let n = m.num_vertices();
    let mut label: Vec<Option<usize>> = (0..n).map(|v| within[v].then_some(0)).collect();
    let mut classes = 1usize;
    loop {
        // prune vertices that cannot stay inside their class
        let mut pruned = false;
        let mut again = true;
        while again {
            again = false;
            for v in 0..n {
                let Some(l) = label[v] else { continue };
                let same = |w: &usize| label[*w] == Some(l);
                let stays = if m.is_controlled(v) { m.succ(v).iter().any(same) } else { m.succ(v).iter().all(same) };
                if !stays {
                    label[v] = None;
                    again = true;
                    pruned = true;
                }
            }
        }
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|v| match label[v] {
                Some(l) => m.succ(v).iter().copied().filter(|&w| label[w] == Some(l)).collect(),
                None => Vec::new(),
            })
            .collect();
        let active: Vec<bool> = label.iter().map(Option::is_some).collect();
        let comps = sccs(&adj, &active);
        let unchanged = !pruned && comps.len() == classes && {
            // each old class is exactly one SCC
            comps.iter().all(|c| c.iter().all(|&v| label[v] == label[c[0]]))
        };
        if unchanged {
            return comps;
        }
        classes = comps.len();
        for (i, c) in comps.iter().enumerate() {
            for &v in c {
                label[v] = Some(i);
            }
        }
    }
}
