//! CPT value of a Markov chain through its induced prospect.

use crate::error::Error;
use crate::graph::obtainset;
use crate::model::{outcome_vector, validate_objective, Model, WeightedReachObjective};
use crate::numeric::{solve_linear, LinearSystem};
use crate::prospect::{cpt, CptParams, LossRanking, Prospect};

/// Distribution over outcomes together with the obtainset behind each outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedProspect {
    pub prospect: Prospect,
    pub per_outcome_states: Vec<(f64, Vec<usize>)>,
}

pub(crate) fn ensure_chain(m: &Model) -> Result<(), Error> {
    match m.actions.iter().position(|a| a.len() != 1) {
        Some(s) => Err(Error::NotMarkovChain(m.states[s].clone())),
        None => Ok(()),
    }
}

/// States from which some state with `goal[s]` is reachable.
pub(crate) fn can_reach(m: &Model, goal: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in &m.actions[s] {
            for t in &a.succ {
                pred[t.target].push(s);
            }
        }
    }
    let mut seen = goal.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&s| goal[s]).collect();
    while let Some(s) = stack.pop() {
        for &p in &pred[s] {
            if !seen[p] {
                seen[p] = true;
                stack.push(p);
            }
        }
    }
    seen
}

/// Probability of eventually entering each of the given closed, disjoint sets from the initial state.
pub fn absorption_probabilities(m: &Model, sets: &[Vec<usize>]) -> Result<Vec<f64>, Error> {
    ensure_chain(m)?;
    let n = m.num_states();
    let mut owner = vec![usize::MAX; n];
    for (i, set) in sets.iter().enumerate() {
        for &s in set {
            if s >= n || owner[s] != usize::MAX {
                return Err(Error::InvalidInput("absorbing sets must be disjoint state sets".into()));
            }
            owner[s] = i;
        }
    }
    for set in sets {
        for &s in set {
            if m.actions[s][0].succ.iter().any(|t| owner[t.target] != owner[s]) {
                return Err(Error::InvalidInput(format!("set containing '{}' is not closed", m.states[s])));
            }
        }
    }
    if owner[m.initial] != usize::MAX {
        let mut out = vec![0.0; sets.len()];
        out[owner[m.initial]] = 1.0;
        return Ok(out);
    }
    let in_sets: Vec<bool> = owner.iter().map(|&o| o != usize::MAX).collect();
    let live = can_reach(m, &in_sets);
    // transient unknowns: states outside the sets that can still reach one
    let idx: Vec<usize> = (0..n).filter(|&s| live[s] && !in_sets[s]).collect();
    if !live[m.initial] {
        return Ok(vec![0.0; sets.len()]);
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in idx.iter().enumerate() {
        pos[s] = i;
    }
    let t = idx.len();
    let mut matrix = vec![vec![0.0; t]; t];
    let mut rhs_per_set = vec![vec![0.0; t]; sets.len()];
    for (i, &s) in idx.iter().enumerate() {
        matrix[i][i] += 1.0;
        for tr in &m.actions[s][0].succ {
            if pos[tr.target] != usize::MAX {
                matrix[i][pos[tr.target]] -= tr.prob;
            } else if owner[tr.target] != usize::MAX {
                rhs_per_set[owner[tr.target]][i] += tr.prob;
            }
        }
    }
    let mut out = Vec::with_capacity(sets.len());
    for rhs in rhs_per_set {
        let x = solve_linear(&LinearSystem { matrix: matrix.clone(), rhs })?;
        out.push(x[pos[m.initial]].clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Outcome distribution of a chain under a weighted-reachability objective.
pub fn induced_prospect(m: &Model, obj: &WeightedReachObjective) -> Result<InducedProspect, Error> {
    ensure_chain(m)?;
    let (m, obj) = validate_objective(m, obj);
    let outcomes = outcome_vector(&obj);
    let mut sets = Vec::with_capacity(outcomes.len());
    for &o in &outcomes {
        sets.push(obtainset(&m, &obj, o)?);
    }
    let probs = absorption_probabilities(&m, &sets)?;
    let prospect = Prospect::new(outcomes.clone(), probs)?;
    Ok(InducedProspect { prospect, per_outcome_states: outcomes.into_iter().zip(sets).collect() })
}

pub fn mc_cpt_value(m: &Model, obj: &WeightedReachObjective, params: &CptParams) -> Result<f64, Error> {
    Ok(cpt(params, &induced_prospect(m, obj)?.prospect))
}

/// CPT value from tail probabilities of the outcome, one reachability solve per tail.
///
/// Gains use P(Φ ≥ o) and P(Φ > o). Losses use P(Φ ≤ o) and P(Φ < o) when ranked
/// worst first, and P(o ≤ Φ ≤ 0) and P(o < Φ ≤ 0) when ranked best first.
pub fn classical_cpt_value(m: &Model, obj: &WeightedReachObjective, params: &CptParams) -> Result<f64, Error> {
    ensure_chain(m)?;
    let (m, obj) = validate_objective(m, obj);
    let outcomes = outcome_vector(&obj);
    let mut sets = Vec::with_capacity(outcomes.len());
    for &o in &outcomes {
        sets.push(obtainset(&m, &obj, o)?);
    }
    let tail = |keep: &dyn Fn(f64) -> bool| -> Result<f64, Error> {
        let union: Vec<usize> = outcomes
            .iter()
            .zip(&sets)
            .filter(|(&o, _)| keep(o))
            .flat_map(|(_, s)| s.iter().copied())
            .collect();
        if union.is_empty() {
            return Ok(0.0);
        }
        Ok(absorption_probabilities(&m, &[union])?[0])
    };
    let mut value = 0.0;
    for &o in &outcomes {
        let u = params.utility.eval(o);
        if o > 0.0 {
            let w = &params.weight_gain;
            value += u * (w.eval(tail(&|x| x >= o)?) - w.eval(tail(&|x| x > o)?));
        } else if o < 0.0 {
            let w = &params.weight_loss;
            let (a, b) = match params.loss_ranking {
                LossRanking::WorstFirst => (tail(&|x| x <= o)?, tail(&|x| x < o)?),
                LossRanking::BestFirst => (tail(&|x| o <= x && x <= 0.0)?, tail(&|x| o < x && x <= 0.0)?),
            };
            value += u * (w.eval(a) - w.eval(b));
        }
    }
    Ok(value)
}
