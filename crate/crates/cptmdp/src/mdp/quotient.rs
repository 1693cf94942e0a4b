use std::collections::BTreeMap;

use crate::graph::{mecs, obtainset, Mec};
use crate::model::{outcome_vector, validate_objective, Action, Model, ModelKind, WeightedReachObjective};

/// Where a quotient state comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuotientState {
    Original(usize),
    /// Index into [`QuotientResult::mecs`].
    Collapsed(usize),
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuotientAction {
    /// (original state, action index)
    Original(usize, usize),
    Stay,
}

/// A stopping MDP equivalent to the input for weighted reachability.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientResult {
    pub quotient: Model,
    pub objective: WeightedReachObjective,
    /// The sink z reached by stay actions.
    pub sink: usize,
    pub back_map: Vec<QuotientState>,
    pub action_map: Vec<Vec<QuotientAction>>,
    /// Collapsed end components, in original indices.
    pub mecs: Vec<Mec>,
    /// Original state to quotient state.
    pub state_map: Vec<usize>,
    /// The normalized input model and objective.
    pub original: Model,
    pub original_objective: WeightedReachObjective,
}

fn fresh_name(taken: &[String], base: &str) -> String {
    let mut name = base.to_string();
    while taken.iter().any(|s| s == &name) {
        name.push('\'');
    }
    name
}

/// Collapses every end component outside the targets into a state with its
/// leaving actions plus `stay`, which moves to a fresh sink.
pub fn make_stopping(m: &Model, obj: &WeightedReachObjective) -> QuotientResult {
    let (m, obj) = validate_objective(m, obj);
    let n = m.num_states();
    let non_target: Vec<bool> = (0..n).map(|s| !obj.targets.contains_key(&s)).collect();
    let ecs = mecs(&m, Some(&non_target));
    let mut mec_of = vec![usize::MAX; n];
    for (i, c) in ecs.iter().enumerate() {
        for &s in &c.states {
            mec_of[s] = i;
        }
    }

    let mut back_map = Vec::new();
    let mut names = Vec::new();
    let mut state_map = vec![usize::MAX; n];
    let mut rep_of_mec = vec![usize::MAX; ecs.len()];
    for s in 0..n {
        match mec_of[s] {
            usize::MAX => {
                state_map[s] = back_map.len();
                back_map.push(QuotientState::Original(s));
                names.push(m.states[s].clone());
            }
            i => {
                if rep_of_mec[i] == usize::MAX {
                    rep_of_mec[i] = back_map.len();
                    back_map.push(QuotientState::Collapsed(i));
                    let members: Vec<&str> = ecs[i].states.iter().map(|&t| m.states[t].as_str()).collect();
                    names.push(format!("mec:{}", members.join("+")));
                }
                state_map[s] = rep_of_mec[i];
            }
        }
    }
    let sink = back_map.len();
    back_map.push(QuotientState::Sink);
    let sink_name = fresh_name(&names, "z");
    names.push(sink_name);

    let map_dist = |a: &Action| -> Vec<(usize, f64)> { a.dist().map(|(t, p)| (state_map[t], p)).collect() };
    let mut actions = Vec::with_capacity(back_map.len());
    let mut action_map = Vec::with_capacity(back_map.len());
    for q in &back_map {
        match *q {
            QuotientState::Original(s) => {
                actions.push(m.actions[s].iter().map(|a| Action::new(a.name.clone(), map_dist(a))).collect());
                action_map.push((0..m.actions[s].len()).map(|i| QuotientAction::Original(s, i)).collect());
            }
            QuotientState::Collapsed(i) => {
                let mut acts = Vec::new();
                let mut amap = Vec::new();
                for &s in &ecs[i].states {
                    for (ai, a) in m.actions[s].iter().enumerate() {
                        if ecs[i].actions.binary_search(&(s, ai)).is_err() {
                            acts.push(Action::new(format!("{}.{}", m.states[s], a.name), map_dist(a)));
                            amap.push(QuotientAction::Original(s, ai));
                        }
                    }
                }
                let taken: Vec<String> = acts.iter().map(|a: &Action| a.name.clone()).collect();
                acts.push(Action::new(fresh_name(&taken, "stay"), vec![(sink, 1.0)]));
                amap.push(QuotientAction::Stay);
                actions.push(acts);
                action_map.push(amap);
            }
            QuotientState::Sink => {
                actions.push(vec![Action::self_loop("loop", sink)]);
                action_map.push(vec![QuotientAction::Stay]);
            }
        }
    }
    let quotient = Model {
        kind: if actions.iter().all(|a: &Vec<Action>| a.len() == 1) { m.kind } else { ModelKind::Mdp },
        states: names,
        initial: state_map[m.initial],
        actions,
    };
    let objective = WeightedReachObjective {
        targets: obj.targets.iter().map(|(&s, &r)| (state_map[s], r)).collect::<BTreeMap<_, _>>(),
        penalty: obj.penalty,
    };
    QuotientResult {
        quotient,
        objective,
        sink,
        back_map,
        action_map,
        mecs: ecs,
        state_map,
        original: m,
        original_objective: obj,
    }
}

/// One target set per outcome, in increasing outcome order; the penalty's set is {z}.
pub fn build_mo_query(q: &QuotientResult) -> Vec<Vec<usize>> {
    outcome_vector(&q.objective)
        .into_iter()
        .map(|o| {
            if o == q.objective.penalty {
                let mut set = obtainset(&q.quotient, &q.objective, o).unwrap_or_default();
                if !set.contains(&q.sink) {
                    set.push(q.sink);
                    set.sort_unstable();
                }
                set
            } else {
                obtainset(&q.quotient, &q.objective, o).expect("outcome comes from the objective")
            }
        })
        .collect()
}
