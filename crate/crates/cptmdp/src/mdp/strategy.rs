//! Memoryless randomized strategies from occupation measures.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::mc::mc_cpt_value;
use crate::model::{validate_objective, Action, Model, ModelKind, Strategy, StrategyScope, WeightedReachObjective};
use crate::prospect::CptParams;

use super::occupation::{quotient_absorbing, Occupation, ReachLp};
use super::quotient::{QuotientAction, QuotientResult, QuotientState};

const ZERO: f64 = 1e-12;
// action frequencies below this are LP slack
const NEGLIGIBLE: f64 = 1e-7;
const SLACKS: [f64; 3] = [1e-9, 1e-8, 1e-7];

// Normalized action frequencies per state; `None` where the state is never left.
fn frequencies(occ: &Occupation) -> Vec<Option<Vec<f64>>> {
    occ.iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total <= ZERO {
                None
            } else {
                Some(row.iter().map(|&x| if x / total < NEGLIGIBLE { 0.0 } else { x / total }).collect())
            }
        })
        .collect()
}

fn renormalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn dominating(lp: &ReachLp, point: &[f64]) -> Result<(Occupation, usize), Error> {
    for slack in SLACKS {
        if let Some((_, occ)) = lp.dominating(point, slack)? {
            return Ok((occ, lp.lp_calls()));
        }
    }
    Err(Error::InfeasiblePoint(format!("{point:?}")))
}

fn named(m: &Model, s: usize, dist: &[f64]) -> BTreeMap<String, f64> {
    m.actions[s]
        .iter()
        .zip(dist)
        .filter(|(_, &p)| p > 0.0)
        .map(|(a, &p)| (a.name.clone(), p))
        .collect()
}

fn first_action(m: &Model, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; m.actions[s].len()];
    v[0] = 1.0;
    v
}

/// Strategy whose reachability vector dominates `best_point`, with the number of LPs solved.
///
/// The strategy is stated on the original model unless some end component is
/// left with a probability strictly between 0 and 1; then it is stated on the quotient.
pub fn extract_strategy_counted(
    q: &QuotientResult,
    query: &[Vec<usize>],
    best_point: &[f64],
) -> Result<(Strategy, usize), Error> {
    let qm = &q.quotient;
    let absorbing = quotient_absorbing(q);
    let lp = ReachLp::new(qm, &absorbing, query);
    let (occ, mut lp_calls) = dominating(&lp, best_point)?;
    let freq = frequencies(&occ);
    let qdist: Vec<Vec<f64>> = (0..qm.num_states())
        .map(|s| freq[s].as_ref().map_or_else(|| first_action(qm, s), |f| renormalized(f)))
        .collect();

    let mut stay = vec![0.0; q.mecs.len()];
    let mut partial = Vec::new();
    for (qs, kind) in q.back_map.iter().enumerate() {
        if let QuotientState::Collapsed(i) = *kind {
            let si = q.action_map[qs].iter().position(|a| *a == QuotientAction::Stay).expect("stay action");
            stay[i] = qdist[qs][si];
            if freq[qs].is_some() && stay[i] > 0.0 && stay[i] < 1.0 {
                partial.push(format!("{} stays with probability {:.6}", qm.states[qs], stay[i]));
            }
        }
    }
    if !partial.is_empty() {
        let choices = (0..qm.num_states()).map(|s| (qm.states[s].clone(), named(qm, s, &qdist[s]))).collect();
        let notes = format!(
            "stated on the end-component quotient; realizing it needs memory: {}",
            partial.join("; ")
        );
        return Ok((Strategy { scope: StrategyScope::Quotient, choices, notes }, lp_calls));
    }

    // original model where kept end components move to a fresh sink
    let m = &q.original;
    let n = m.num_states();
    let sink = n;
    let mut kept = vec![false; n];
    for (i, c) in q.mecs.iter().enumerate() {
        if stay[i] > 0.5 {
            for &s in &c.states {
                kept[s] = true;
            }
        }
    }
    let mut actions: Vec<Vec<Action>> = (0..n)
        .map(|s| if kept[s] { vec![Action::new("stay", vec![(sink, 1.0)])] } else { m.actions[s].clone() })
        .collect();
    actions.push(vec![Action::self_loop("loop", sink)]);
    let mut states = m.states.clone();
    states.push(String::new());
    let m2 = Model { kind: ModelKind::Mdp, states, initial: m.initial, actions };
    let query2: Vec<Vec<usize>> = query
        .iter()
        .map(|set| {
            let mut out = Vec::new();
            for &qs in set {
                match q.back_map[qs] {
                    QuotientState::Original(s) => out.push(s),
                    QuotientState::Sink => out.push(sink),
                    QuotientState::Collapsed(_) => {}
                }
            }
            out
        })
        .collect();
    let mut absorbing2 = vec![false; n + 1];
    absorbing2[sink] = true;
    for &s in q.original_objective.targets.keys() {
        absorbing2[s] = true;
    }
    let lp2 = ReachLp::new(&m2, &absorbing2, &query2);
    let (occ2, calls2) = dominating(&lp2, best_point)?;
    lp_calls += calls2;
    let freq2 = frequencies(&occ2);

    let mut choices = BTreeMap::new();
    for s in 0..n {
        let dist = if kept[s] {
            let c = q.mecs.iter().find(|c| c.states.binary_search(&s).is_ok()).expect("kept state lies in a component");
            let inside: Vec<usize> = c.actions.iter().filter(|(t, _)| *t == s).map(|&(_, a)| a).collect();
            let mut v = vec![0.0; m.actions[s].len()];
            for &a in &inside {
                v[a] = 1.0 / inside.len() as f64;
            }
            v
        } else {
            freq2[s].as_ref().map_or_else(|| first_action(m, s), |f| renormalized(f))
        };
        choices.insert(m.states[s].clone(), named(m, s, &dist));
    }
    let kept_names: Vec<&str> = (0..n).filter(|&s| kept[s]).map(|s| m.states[s].as_str()).collect();
    let notes = if kept_names.is_empty() {
        String::new()
    } else {
        format!("remains forever in end components through: {}", kept_names.join(", "))
    };
    Ok((Strategy { scope: StrategyScope::Original, choices, notes }, lp_calls))
}

pub fn extract_strategy(q: &QuotientResult, query: &[Vec<usize>], best_point: &[f64]) -> Result<Strategy, Error> {
    extract_strategy_counted(q, query, best_point).map(|r| r.0)
}

/// The Markov chain a memoryless strategy induces on the original model.
pub fn induced_chain(m: &Model, obj: &WeightedReachObjective, sigma: &Strategy) -> Result<Model, Error> {
    if sigma.scope != StrategyScope::Original {
        return Err(Error::ScopeMismatch);
    }
    let (m, obj) = validate_objective(m, obj);
    sigma.validate_on(&m)?;
    let actions = (0..m.num_states())
        .map(|s| {
            if obj.targets.contains_key(&s) {
                return vec![Action::self_loop("sigma", s)];
            }
            let mut succ: BTreeMap<usize, f64> = BTreeMap::new();
            for (a, p) in m.actions[s].iter().zip(sigma.distribution(&m, s)) {
                for (t, q) in a.dist() {
                    *succ.entry(t).or_insert(0.0) += p * q;
                }
            }
            vec![Action::new("sigma", succ.into_iter().filter(|(_, p)| *p > 0.0).collect())]
        })
        .collect();
    Ok(Model { kind: ModelKind::Mc, states: m.states.clone(), initial: m.initial, actions })
}

/// CPT value the strategy actually achieves.
pub fn verify_strategy(m: &Model, obj: &WeightedReachObjective, sigma: &Strategy, params: &CptParams) -> Result<f64, Error> {
    let chain = induced_chain(m, obj, sigma)?;
    let (_, obj) = validate_objective(m, obj);
    mc_cpt_value(&chain, &obj, params)
}
