//! SCCs, bottom SCCs, maximal end components and obtainsets.

use thiserror::Error;

use crate::model::{Model, ModelKind, WeightedReachObjective};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("outcome {0} is not an outcome of the objective")]
    UnknownOutcome(f64),
    #[error("the penalty outcome's states depend on the strategy in a non-stopping MDP")]
    NonStopping,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scc {
    /// Sorted state indices.
    pub states: Vec<usize>,
    pub is_bottom: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mec {
    /// Sorted state indices.
    pub states: Vec<usize>,
    /// Sorted (state, action index) pairs.
    pub actions: Vec<(usize, usize)>,
}

/// Tarjan's algorithm over the nodes with `alive[v]`, iterative.
fn tarjan(n: usize, alive: &[bool], succ: &dyn Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if !alive[root] || index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if !alive[w] {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let s = succ(w);
                    call.push((w, s, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(parent) = call.last() {
                    let p = parent.0;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

fn all_successors(m: &Model, s: usize) -> Vec<usize> {
    let mut v: Vec<usize> = m.actions[s].iter().flat_map(|a| a.succ.iter().map(|t| t.target)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// SCC partition ordered by smallest member.
pub fn sccs(m: &Model) -> Vec<Scc> {
    let n = m.num_states();
    let comps = tarjan(n, &vec![true; n], &|s| all_successors(m, s));
    let mut comp_of = vec![0; n];
    for (i, c) in comps.iter().enumerate() {
        for &s in c {
            comp_of[s] = i;
        }
    }
    comps
        .iter()
        .enumerate()
        .map(|(i, c)| Scc {
            states: c.clone(),
            is_bottom: c.iter().all(|&s| all_successors(m, s).iter().all(|&t| comp_of[t] == i)),
        })
        .collect()
}

pub fn bsccs(m: &Model) -> Vec<Scc> {
    sccs(m).into_iter().filter(|c| c.is_bottom).collect()
}

/// States reachable from `from` under some action choice.
pub fn reachable(m: &Model, from: usize) -> Vec<bool> {
    let mut seen = vec![false; m.num_states()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(s) = stack.pop() {
        for t in all_successors(m, s) {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen
}

/// Maximal end components inside `restrict_to` (all states when `None`).
pub fn mecs(m: &Model, restrict_to: Option<&[bool]>) -> Vec<Mec> {
    let n = m.num_states();
    let mut alive: Vec<bool> = match restrict_to {
        Some(r) => r.to_vec(),
        None => vec![true; n],
    };
    let mut enabled: Vec<Vec<bool>> = m.actions.iter().map(|a| vec![true; a.len()]).collect();
    loop {
        let mut changed = false;
        // drop actions that can leave the live region, then states without actions
        loop {
            let mut inner = false;
            for s in 0..n {
                if !alive[s] {
                    continue;
                }
                for (i, a) in m.actions[s].iter().enumerate() {
                    if enabled[s][i] && a.succ.iter().any(|t| !alive[t.target]) {
                        enabled[s][i] = false;
                        inner = true;
                    }
                }
                if !enabled[s].iter().any(|&e| e) {
                    alive[s] = false;
                    inner = true;
                }
            }
            if !inner {
                break;
            }
            changed = true;
        }
        let succ = |s: usize| -> Vec<usize> {
            let mut v: Vec<usize> = m.actions[s]
                .iter()
                .enumerate()
                .filter(|(i, _)| enabled[s][*i])
                .flat_map(|(_, a)| a.succ.iter().map(|t| t.target))
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let comps = tarjan(n, &alive, &succ);
        let mut comp_of = vec![usize::MAX; n];
        for (i, c) in comps.iter().enumerate() {
            for &s in c {
                comp_of[s] = i;
            }
        }
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            for (i, a) in m.actions[s].iter().enumerate() {
                if enabled[s][i] && a.succ.iter().any(|t| comp_of[t.target] != comp_of[s]) {
                    enabled[s][i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return comps
                .into_iter()
                .map(|c| {
                    let enabled = &enabled;
                    let actions = c
                        .iter()
                        .flat_map(|&s| (0..m.actions[s].len()).filter(move |&i| enabled[s][i]).map(move |i| (s, i)))
                        .collect();
                    Mec { states: c, actions }
                })
                .collect();
        }
    }
}

/// States whose reaching realizes outcome `o`.
pub fn obtainset(m: &Model, obj: &WeightedReachObjective, o: f64) -> Result<Vec<usize>, GraphError> {
    let mut set: Vec<usize> = obj.targets.iter().filter(|(_, &r)| r == o).map(|(&s, _)| s).collect();
    if o != obj.penalty {
        if set.is_empty() {
            return Err(GraphError::UnknownOutcome(o));
        }
        return Ok(set);
    }
    let is_target = |s: usize| obj.targets.contains_key(&s);
    match m.kind {
        ModelKind::Mc => {
            for c in bsccs(m) {
                if c.states.iter().all(|&s| !is_target(s)) {
                    set.extend(c.states);
                }
            }
        }
        ModelKind::Mdp => {
            // stopping: the only end components outside the targets are sink states
            for c in mecs(m, None) {
                if c.states.iter().any(|&s| is_target(s)) {
                    continue;
                }
                if c.states.len() == 1 && m.is_absorbing(c.states[0]) {
                    set.push(c.states[0]);
                } else {
                    return Err(GraphError::NonStopping);
                }
            }
        }
    }
    set.sort_unstable();
    Ok(set)
}
