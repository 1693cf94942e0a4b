//! Mean-payoff objectives through a weighted end-component quotient.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::graph::{mecs, Mec, Scc};
use crate::mc::ensure_chain;
use crate::mdp::{solve_weighted_reach, CptSolveResult, Direction, SolveOptions};
use crate::model::{Action, MeanPayoffObjective, Model, ModelKind, StrategyScope, WeightedReachObjective};
use crate::numeric::{solve_linear, solve_lp, LinearProgram, LinearSystem, LpOutcome, Relation};
use crate::prospect::CptParams;

/// Gains closer than this are one outcome.
pub const GAIN_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MecGain {
    pub mec: Mec,
    pub gain_max: f64,
    pub gain_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpState {
    Original(usize),
    /// Index into [`MpQuotient::gains`].
    Collapsed(usize),
    /// The target reached by staying in that component.
    Gain(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpQuotient {
    pub model: Model,
    pub objective: WeightedReachObjective,
    pub back_map: Vec<MpState>,
    pub gains: Vec<MecGain>,
}

fn check_rewards(m: &Model, rewards: &MeanPayoffObjective) -> Result<(), Error> {
    if rewards.rewards.len() != m.num_states() {
        return Err(Error::InvalidInput(format!(
            "{} rewards for {} states",
            rewards.rewards.len(),
            m.num_states()
        )));
    }
    Ok(())
}

/// Long-run average reward inside a bottom SCC of a chain.
pub fn bscc_mean_payoff(m: &Model, rewards: &MeanPayoffObjective, c: &Scc) -> Result<f64, Error> {
    ensure_chain(m)?;
    check_rewards(m, rewards)?;
    let n = c.states.len();
    let mut pos = vec![usize::MAX; m.num_states()];
    for (i, &s) in c.states.iter().enumerate() {
        pos[s] = i;
    }
    // row j: Σ_i ν_i P(i, j) - ν_j = 0, with row 0 replaced by Σ ν = 1
    let mut matrix = vec![vec![0.0; n]; n];
    for (i, &s) in c.states.iter().enumerate() {
        matrix[i][i] -= 1.0;
        for (t, p) in m.actions[s][0].dist() {
            if pos[t] == usize::MAX {
                return Err(Error::InvalidInput("component is not closed".into()));
            }
            matrix[pos[t]][i] += p;
        }
    }
    matrix[0] = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let nu = solve_linear(&LinearSystem { matrix, rhs })?;
    Ok(c.states.iter().zip(&nu).map(|(&s, v)| v * rewards.rewards[s]).sum())
}

/// Best (or worst) long-run average reward while confined to the end component.
pub fn mec_optimal_gain(m: &Model, rewards: &MeanPayoffObjective, mec: &Mec, sense: Direction) -> Result<f64, Error> {
    check_rewards(m, rewards)?;
    let sign = if sense == Direction::Max { 1.0 } else { -1.0 };
    let nv = mec.actions.len();
    let objective = mec.actions.iter().map(|&(s, _)| sign * rewards.rewards[s]).collect();
    let mut lp = LinearProgram::new(objective);
    for &s in &mec.states {
        let row = mec
            .actions
            .iter()
            .map(|&(t, a)| (if t == s { 1.0 } else { 0.0 }) - m.actions[t][a].prob_to(s))
            .collect();
        lp.push(row, Relation::Eq, 0.0);
    }
    lp.push(vec![1.0; nv], Relation::Eq, 1.0);
    match solve_lp(&lp)? {
        LpOutcome::Optimal { value, .. } => Ok(sign * value),
        _ => Err(Error::InvalidInput("end component has no stationary distribution".into())),
    }
}

fn fresh(taken: &[String], base: String) -> String {
    let mut name = base;
    while taken.iter().any(|s| s == &name) {
        name.push('\'');
    }
    name
}

/// Every end component becomes a state whose `stay` action reaches a target worth its gain.
pub fn weighted_mec_quotient(m: &Model, rewards: &MeanPayoffObjective, sense: Direction) -> Result<MpQuotient, Error> {
    m.validate()?;
    check_rewards(m, rewards)?;
    let ecs = mecs(m, None);
    let mut gains = Vec::with_capacity(ecs.len());
    let mut distinct: Vec<f64> = Vec::new();
    for mec in ecs {
        let gain_max = mec_optimal_gain(m, rewards, &mec, Direction::Max)?;
        let gain_min = mec_optimal_gain(m, rewards, &mec, Direction::Min)?.min(gain_max);
        gains.push(MecGain { mec, gain_max, gain_min });
    }
    let n = m.num_states();
    let mut mec_of = vec![usize::MAX; n];
    for (i, g) in gains.iter().enumerate() {
        for &s in &g.mec.states {
            mec_of[s] = i;
        }
    }
    let mut back_map = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut state_map = vec![usize::MAX; n];
    let mut rep = vec![usize::MAX; gains.len()];
    for s in 0..n {
        match mec_of[s] {
            usize::MAX => {
                state_map[s] = back_map.len();
                back_map.push(MpState::Original(s));
                names.push(m.states[s].clone());
            }
            i => {
                if rep[i] == usize::MAX {
                    rep[i] = back_map.len();
                    back_map.push(MpState::Collapsed(i));
                    let members: Vec<&str> = gains[i].mec.states.iter().map(|&t| m.states[t].as_str()).collect();
                    names.push(format!("mec:{}", members.join("+")));
                }
                state_map[s] = rep[i];
            }
        }
    }
    let mut gain_state = vec![0; gains.len()];
    for i in 0..gains.len() {
        gain_state[i] = back_map.len();
        back_map.push(MpState::Gain(i));
        let base = names[rep[i]].replacen("mec:", "gain:", 1);
        let name = fresh(&names, base);
        names.push(name);
    }

    let map_dist = |a: &Action| -> Vec<(usize, f64)> { a.dist().map(|(t, p)| (state_map[t], p)).collect() };
    let mut actions = Vec::with_capacity(back_map.len());
    let mut targets = BTreeMap::new();
    for (qs, kind) in back_map.iter().enumerate() {
        match *kind {
            MpState::Original(s) => actions.push(m.actions[s].iter().map(|a| Action::new(a.name.clone(), map_dist(a))).collect()),
            MpState::Collapsed(i) => {
                let mut acts: Vec<Action> = Vec::new();
                for &s in &gains[i].mec.states {
                    for (ai, a) in m.actions[s].iter().enumerate() {
                        if gains[i].mec.actions.binary_search(&(s, ai)).is_err() {
                            acts.push(Action::new(format!("{}.{}", m.states[s], a.name), map_dist(a)));
                        }
                    }
                }
                let taken: Vec<String> = acts.iter().map(|a| a.name.clone()).collect();
                acts.push(Action::new(fresh(&taken, "stay".into()), vec![(gain_state[i], 1.0)]));
                actions.push(acts);
            }
            MpState::Gain(i) => {
                actions.push(vec![Action::self_loop("loop", qs)]);
                let g = if sense == Direction::Max { gains[i].gain_max } else { gains[i].gain_min };
                let g = match distinct.iter().find(|&&d| (d - g).abs() <= GAIN_MERGE_TOL) {
                    Some(&d) => d,
                    None => {
                        distinct.push(g);
                        g
                    }
                };
                targets.insert(qs, g);
            }
        }
    }
    let kind = if actions.iter().all(|a: &Vec<Action>| a.len() == 1) { m.kind } else { ModelKind::Mdp };
    let model = Model { kind, states: names, initial: state_map[m.initial], actions };
    Ok(MpQuotient { model, objective: WeightedReachObjective { targets, penalty: 0.0 }, back_map, gains })
}

pub fn mp_cpt_value(
    m: &Model,
    rewards: &MeanPayoffObjective,
    params: &CptParams,
    eps: f64,
    direction: Direction,
) -> Result<CptSolveResult, Error> {
    solve_mean_payoff(m, rewards, params, &SolveOptions { epsilon: eps, direction, ..Default::default() })
}

/// The strategy in the result is stated on the weighted quotient.
pub fn solve_mean_payoff(
    m: &Model,
    rewards: &MeanPayoffObjective,
    params: &CptParams,
    opts: &SolveOptions,
) -> Result<CptSolveResult, Error> {
    let q = weighted_mec_quotient(m, rewards, opts.direction)?;
    let mut r = solve_weighted_reach(&q.model, &q.objective, params, opts)?;
    r.strategy.scope = StrategyScope::Quotient;
    let note = "stated on the weighted end-component quotient";
    r.strategy.notes = if r.strategy.notes.is_empty() { note.into() } else { format!("{note}; {}", r.strategy.notes) };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::bsccs;
    use crate::prospect::utility;

    fn chain(edges: Vec<Vec<(usize, f64)>>) -> Model {
        Model {
            kind: ModelKind::Mc,
            states: (0..edges.len()).map(|i| format!("s{i}")).collect(),
            initial: 0,
            actions: edges.into_iter().map(|e| vec![Action::new("a", e)]).collect(),
        }
    }

    #[test]
    fn bscc_examples() {
        let m = chain(vec![vec![(0, 1.0)]]);
        let r = MeanPayoffObjective { rewards: vec![7.0] };
        assert!((bscc_mean_payoff(&m, &r, &bsccs(&m)[0]).unwrap() - 7.0).abs() < 1e-12);
        let m = chain(vec![vec![(1, 1.0)], vec![(0, 1.0)]]);
        let r = MeanPayoffObjective { rewards: vec![0.0, 10.0] };
        assert!((bscc_mean_payoff(&m, &r, &bsccs(&m)[0]).unwrap() - 5.0).abs() < 1e-12);
    }

    fn camping() -> (Model, MeanPayoffObjective) {
        // s0 can stay put or move to s1, which can stay or return
        let m = Model {
            kind: ModelKind::Mdp,
            states: vec!["s0".into(), "s1".into()],
            initial: 0,
            actions: vec![
                vec![Action::self_loop("stay", 0), Action::new("go", vec![(1, 1.0)])],
                vec![Action::self_loop("stay", 1), Action::new("back", vec![(0, 1.0)])],
            ],
        };
        (m, MeanPayoffObjective { rewards: vec![1.0, 4.0] })
    }

    #[test]
    fn gains_of_one_component() {
        let (m, r) = camping();
        let c = &mecs(&m, None)[0];
        assert!((mec_optimal_gain(&m, &r, c, Direction::Max).unwrap() - 4.0).abs() < 1e-9);
        assert!((mec_optimal_gain(&m, &r, c, Direction::Min).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_component_values() {
        let (m, r) = camping();
        let q = weighted_mec_quotient(&m, &r, Direction::Max).unwrap();
        assert_eq!(q.model.states, vec!["mec:s0+s1", "gain:s0+s1"]);
        let p = CptParams::standard();
        let hi = mp_cpt_value(&m, &r, &p, 0.01, Direction::Max).unwrap().value;
        let lo = mp_cpt_value(&m, &r, &p, 0.01, Direction::Min).unwrap().value;
        assert!((hi - utility(&p, 4.0)).abs() < 1e-9);
        assert!((lo - utility(&p, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn equal_gains_merge() {
        let m = chain(vec![vec![(1, 0.5), (2, 0.5)], vec![(1, 1.0)], vec![(2, 1.0)]]);
        let r = MeanPayoffObjective { rewards: vec![0.0, 3.0, 3.0 + 1e-12] };
        let q = weighted_mec_quotient(&m, &r, Direction::Max).unwrap();
        let vals: Vec<f64> = q.objective.targets.values().copied().collect();
        assert_eq!(vals[0], vals[1]);
    }
}
