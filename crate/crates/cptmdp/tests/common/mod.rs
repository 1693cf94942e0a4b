#![allow(dead_code)]

use std::collections::BTreeMap;

use cptmdp::model::{Action, Model, ModelKind, Strategy, StrategyScope, WeightedReachObjective};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const REWARDS: [f64; 6] = [-5.0, -1.0, 0.0, 2.0, 10.0, 50.0];

/// Distribution over `support` distinct states out of `n`, small integer weights.
pub fn random_dist(r: &mut ChaCha8Rng, n: usize, max_support: usize) -> Vec<(usize, f64)> {
    let k = r.gen_range(1..=max_support.min(n));
    let targets = sample(r, n, k).into_vec();
    let w: Vec<u32> = (0..k).map(|_| r.gen_range(1..=5)).collect();
    let total: u32 = w.iter().sum();
    targets.into_iter().zip(w).map(|(t, w)| (t, w as f64 / total as f64)).collect()
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

/// Random objective on states 1.., with absorbing targets.
fn random_targets(r: &mut ChaCha8Rng, n: usize, max_targets: usize) -> WeightedReachObjective {
    let t = r.gen_range(1..=max_targets.min(n - 1));
    let mut targets = BTreeMap::new();
    for s in sample(r, n - 1, t).into_iter().map(|s| s + 1) {
        targets.insert(s, REWARDS[r.gen_range(0..REWARDS.len())]);
    }
    let penalty = REWARDS[r.gen_range(0..3)];
    WeightedReachObjective { targets, penalty }
}

/// Random MDP: every non-target state gets 1..=max_actions actions.
pub fn random_mdp(r: &mut ChaCha8Rng, n: usize, max_actions: usize) -> (Model, WeightedReachObjective) {
    let obj = random_targets(r, n, 3);
    let actions = (0..n)
        .map(|s| {
            if obj.targets.contains_key(&s) {
                return vec![Action::self_loop("loop", s)];
            }
            let k = r.gen_range(1..=max_actions);
            (0..k).map(|a| Action::new(format!("a{a}"), random_dist(r, n, 3))).collect()
        })
        .collect();
    (Model { kind: ModelKind::Mdp, states: names(n), initial: 0, actions }, obj)
}

pub fn random_mc(r: &mut ChaCha8Rng, n: usize) -> (Model, WeightedReachObjective) {
    let (mut m, obj) = random_mdp(r, n, 1);
    m.kind = ModelKind::Mc;
    (m, obj)
}

/// MDP with exactly `decisions` states that have two actions.
pub fn random_decision_mdp(r: &mut ChaCha8Rng, n: usize, decisions: usize) -> (Model, WeightedReachObjective) {
    let obj = random_targets(r, n, 3);
    let free: Vec<usize> = (0..n).filter(|s| !obj.targets.contains_key(s)).collect();
    let d = decisions.min(free.len());
    let chosen: Vec<usize> = sample(r, free.len(), d).into_iter().map(|i| free[i]).collect();
    let actions = (0..n)
        .map(|s| {
            if obj.targets.contains_key(&s) {
                vec![Action::self_loop("loop", s)]
            } else {
                let k = if chosen.contains(&s) { 2 } else { 1 };
                (0..k).map(|a| Action::new(format!("a{a}"), random_dist(r, n, 3))).collect()
            }
        })
        .collect();
    (Model { kind: ModelKind::Mdp, states: names(n), initial: 0, actions }, obj)
}

/// Random memoryless strategy; deterministic at about half of the states.
pub fn random_strategy(r: &mut ChaCha8Rng, m: &Model) -> Strategy {
    let mut choices = BTreeMap::new();
    for (s, acts) in m.actions.iter().enumerate() {
        let mut ch = BTreeMap::new();
        if acts.len() == 1 || r.gen_bool(0.5) {
            ch.insert(acts[r.gen_range(0..acts.len())].name.clone(), 1.0);
        } else {
            let w: Vec<f64> = acts.iter().map(|_| r.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            for (a, x) in acts.iter().zip(w) {
                ch.insert(a.name.clone(), x / total);
            }
        }
        choices.insert(m.states[s].clone(), ch);
    }
    Strategy { scope: StrategyScope::Original, choices, notes: String::new() }
}

/// Probability of each distinct outcome under a fixed transition matrix, by value iteration.
pub fn outcome_probs_by_iteration(
    succ: &[Vec<(usize, f64)>],
    initial: usize,
    obj: &WeightedReachObjective,
) -> BTreeMap<u64, f64> {
    let n = succ.len();
    let mut outcomes: Vec<f64> = obj.targets.values().copied().collect();
    outcomes.sort_by(f64::total_cmp);
    outcomes.dedup();
    let mut out = BTreeMap::new();
    let mut reached = 0.0;
    for &o in &outcomes {
        let mut x: Vec<f64> = (0..n).map(|s| if obj.targets.get(&s) == Some(&o) { 1.0 } else { 0.0 }).collect();
        for _ in 0..10_000_000 {
            let mut delta: f64 = 0.0;
            let next: Vec<f64> = (0..n)
                .map(|s| {
                    if obj.targets.contains_key(&s) {
                        x[s]
                    } else {
                        succ[s].iter().map(|&(t, p)| p * x[t]).sum()
                    }
                })
                .collect();
            for s in 0..n {
                delta = delta.max((next[s] - x[s]).abs());
            }
            x = next;
            if delta == 0.0 {
                break;
            }
        }
        *out.entry(o.to_bits()).or_insert(0.0) += x[initial];
        reached += x[initial];
    }
    *out.entry(obj.penalty.to_bits()).or_insert(0.0) += (1.0 - reached).max(0.0);
    out
}

/// Mixed successor distribution of every state under `sigma`.
pub fn mixed_successors(m: &Model, sigma: &Strategy) -> Vec<Vec<(usize, f64)>> {
    (0..m.num_states())
        .map(|s| {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (a, p) in m.actions[s].iter().zip(sigma.distribution(m, s)) {
                for (t, q) in a.dist() {
                    *acc.entry(t).or_insert(0.0) += p * q;
                }
            }
            acc.into_iter().collect()
        })
        .collect()
}

/// Absorption probabilities of each target into its outcome, by dense elimination.
///
/// `succ[s]` lists (target, prob); targets are the states in `target_outcome`.
pub struct FastChain {
    pub n: usize,
    pub target_outcome: Vec<Option<usize>>,
    pub k: usize,
}

impl FastChain {
    /// Probability of each outcome index; the penalty is `penalty_index`.
    pub fn solve(&self, succ: &[Vec<(usize, f64)>], initial: usize, penalty_index: usize) -> Vec<f64> {
        let n = self.n;
        let mut alive: Vec<bool> = self.target_outcome.iter().map(Option::is_some).collect();
        loop {
            let mut changed = false;
            for s in 0..n {
                if !alive[s] && succ[s].iter().any(|&(t, p)| p > 0.0 && alive[t]) {
                    alive[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let dead: Vec<bool> = alive.iter().map(|a| !a).collect();
        let idx: Vec<usize> = (0..n).filter(|&s| self.target_outcome[s].is_none() && !dead[s]).collect();
        let mut pos = vec![usize::MAX; n];
        for (i, &s) in idx.iter().enumerate() {
            pos[s] = i;
        }
        let m = idx.len();
        let mut probs = vec![0.0; self.k];
        if let Some(o) = self.target_outcome[initial] {
            probs[o] = 1.0;
            return probs;
        }
        if dead[initial] {
            probs[penalty_index] = 1.0;
            return probs;
        }
        // (I - Q) X = R, one column per outcome
        let w = m + self.k;
        let mut a = vec![0.0; m * w];
        for (i, &s) in idx.iter().enumerate() {
            a[i * w + i] += 1.0;
            for &(t, p) in &succ[s] {
                if p == 0.0 {
                    continue;
                }
                if let Some(o) = self.target_outcome[t] {
                    a[i * w + m + o] += p;
                } else if pos[t] != usize::MAX {
                    a[i * w + pos[t]] -= p;
                }
            }
        }
        for c in 0..m {
            let piv = (c..m).max_by(|&x, &y| a[x * w + c].abs().total_cmp(&a[y * w + c].abs())).unwrap();
            if piv != c {
                for j in 0..w {
                    a.swap(c * w + j, piv * w + j);
                }
            }
            let d = a[c * w + c];
            for j in c..w {
                a[c * w + j] /= d;
            }
            for rrow in 0..m {
                if rrow != c {
                    let f = a[rrow * w + c];
                    if f != 0.0 {
                        for j in c..w {
                            a[rrow * w + j] -= f * a[c * w + j];
                        }
                    }
                }
            }
        }
        let i = pos[initial];
        let mut reached = 0.0;
        for o in 0..self.k {
            probs[o] = a[i * w + m + o];
            reached += probs[o];
        }
        probs[penalty_index] += (1.0 - reached).max(0.0);
        probs
    }
}

pub mod oracles;
