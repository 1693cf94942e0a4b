//! Finite Markov chains and MDPs, objectives, strategies and their JSON forms.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::CheckedAdd;
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parse error at {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unsupported objective: {0}")]
    UnsupportedObjective(String),
}

fn perr(path: &str, msg: impl Into<String>) -> ModelError {
    ModelError::Parse { path: path.to_string(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mc,
    Mdp,
}

/// One edge of a transition distribution. `exact` is kept when the input gave "num/den".
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub target: usize,
    pub prob: f64,
    pub exact: Option<Ratio<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub name: String,
    /// Sorted by target, no zero entries.
    pub succ: Vec<Transition>,
}

impl Action {
    pub fn new(name: impl Into<String>, succ: Vec<(usize, f64)>) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (t, p) in succ {
            if p > 0.0 {
                *merged.entry(t).or_insert(0.0) += p;
            }
        }
        Action {
            name: name.into(),
            succ: merged.into_iter().map(|(target, prob)| Transition { target, prob, exact: None }).collect(),
        }
    }

    pub fn self_loop(name: impl Into<String>, s: usize) -> Self {
        Action::new(name, vec![(s, 1.0)])
    }

    pub fn dist(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.succ.iter().map(|t| (t.target, t.prob))
    }

    pub fn prob_to(&self, s: usize) -> f64 {
        self.succ.iter().find(|t| t.target == s).map_or(0.0, |t| t.prob)
    }
}

/// A finite MDP; an MC is an MDP with exactly one action per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub states: Vec<String>,
    pub initial: usize,
    pub actions: Vec<Vec<Action>>,
}

impl Model {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.actions[s].iter().all(|a| a.succ.len() == 1 && a.succ[0].target == s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.num_states();
        if n == 0 {
            return Err(ModelError::Validation("model has no states".into()));
        }
        if self.initial >= n {
            return Err(ModelError::Validation("initial state out of range".into()));
        }
        if self.actions.len() != n {
            return Err(ModelError::Validation("action table size differs from state count".into()));
        }
        let mut seen = HashMap::new();
        for (i, s) in self.states.iter().enumerate() {
            if seen.insert(s.as_str(), i).is_some() {
                return Err(ModelError::Validation(format!("duplicate state id '{s}'")));
            }
        }
        for (s, acts) in self.actions.iter().enumerate() {
            let name = &self.states[s];
            if acts.is_empty() {
                return Err(ModelError::Validation(format!("state '{name}' has no actions")));
            }
            if self.kind == ModelKind::Mc && acts.len() != 1 {
                return Err(ModelError::Validation(format!(
                    "Markov chain state '{name}' has {} actions",
                    acts.len()
                )));
            }
            for a in acts {
                let mut total = 0.0;
                for t in &a.succ {
                    if t.target >= n {
                        return Err(ModelError::Validation(format!("dangling successor in '{name}'")));
                    }
                    if !(t.prob >= 0.0) {
                        return Err(ModelError::Validation(format!(
                            "negative probability in '{name}'/'{}'",
                            a.name
                        )));
                    }
                    total += t.prob;
                }
                let exact: Option<Ratio<i64>> = a
                    .succ
                    .iter()
                    .map(|t| t.exact)
                    .try_fold(Ratio::from_integer(0), |acc, e| e.and_then(|e| acc.checked_add(&e)));
                let stochastic = match exact {
                    Some(e) if !a.succ.is_empty() => e == Ratio::from_integer(1),
                    _ => (total - 1.0).abs() <= 1e-9,
                };
                if !stochastic {
                    return Err(ModelError::Validation(format!(
                        "distribution of '{name}'/'{}' sums to {total}",
                        a.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Each path earns the reward of the first target it visits, `penalty` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedReachObjective {
    pub targets: BTreeMap<usize, f64>,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanPayoffObjective {
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    WeightedReach(WeightedReachObjective),
    MeanPayoff(MeanPayoffObjective),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyScope {
    Original,
    Quotient,
}

/// Memoryless randomized strategy, keyed by state and action names.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub scope: StrategyScope,
    pub choices: BTreeMap<String, BTreeMap<String, f64>>,
    pub notes: String,
}

impl Strategy {
    /// Action probabilities of state `s` in action order; missing states get the first action.
    pub fn distribution(&self, m: &Model, s: usize) -> Vec<f64> {
        let acts = &m.actions[s];
        let mut out = vec![0.0; acts.len()];
        match self.choices.get(&m.states[s]) {
            Some(ch) => {
                for (i, a) in acts.iter().enumerate() {
                    out[i] = ch.get(&a.name).copied().unwrap_or(0.0);
                }
            }
            None => out[0] = 1.0,
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "scope": match self.scope { StrategyScope::Original => "original", StrategyScope::Quotient => "quotient" },
            "choices": self.choices,
            "notes": self.notes,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, ModelError> {
        let scope = match v.get("scope").and_then(Value::as_str) {
            Some("original") => StrategyScope::Original,
            Some("quotient") => StrategyScope::Quotient,
            _ => return Err(perr("$.scope", "expected \"original\" or \"quotient\"")),
        };
        let mut choices = BTreeMap::new();
        let obj = v.get("choices").and_then(Value::as_object).ok_or_else(|| perr("$.choices", "expected object"))?;
        for (s, dist) in obj {
            let d = dist.as_object().ok_or_else(|| perr(&format!("$.choices.{s}"), "expected object"))?;
            let mut m = BTreeMap::new();
            for (a, p) in d {
                let p = p.as_f64().ok_or_else(|| perr(&format!("$.choices.{s}.{a}"), "expected number"))?;
                m.insert(a.clone(), p);
            }
            choices.insert(s.clone(), m);
        }
        let notes = v.get("notes").and_then(Value::as_str).unwrap_or("").to_string();
        Ok(Strategy { scope, choices, notes })
    }

    /// Checks each distribution sums to 1 and only uses available actions.
    pub fn validate_on(&self, m: &Model) -> Result<(), ModelError> {
        for (s, dist) in &self.choices {
            let i = m
                .index_of(s)
                .ok_or_else(|| ModelError::Validation(format!("strategy names unknown state '{s}'")))?;
            let mut total = 0.0;
            for (a, &p) in dist {
                if !m.actions[i].iter().any(|x| &x.name == a) {
                    return Err(ModelError::Validation(format!("action '{a}' not available in '{s}'")));
                }
                if p < -1e-12 {
                    return Err(ModelError::Validation(format!("negative probability for '{s}'/'{a}'")));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(ModelError::Validation(format!("strategy at '{s}' sums to {total}")));
            }
        }
        Ok(())
    }
}

fn parse_prob(v: &Value, path: &str) -> Result<(f64, Option<Ratio<i64>>), ModelError> {
    match v {
        Value::Number(n) => n.as_f64().map(|f| (f, None)).ok_or_else(|| perr(path, "bad number")),
        Value::String(s) => {
            let r = Ratio::<i64>::from_str(s.trim()).map_err(|_| perr(path, format!("bad rational '{s}'")))?;
            Ok((*r.numer() as f64 / *r.denom() as f64, Some(r)))
        }
        _ => Err(perr(path, "expected a number or \"num/den\" string")),
    }
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<(Model, Objective), ModelError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| perr(&format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let root = doc.as_object().ok_or_else(|| perr("$", "expected object"))?;
    for key in root.keys() {
        if !["type", "states", "initial", "transitions", "objective"].contains(&key.as_str()) {
            return Err(perr(&format!("$.{key}"), "unknown field"));
        }
    }
    let kind = match root.get("type").and_then(Value::as_str) {
        Some("mc") => ModelKind::Mc,
        Some("mdp") => ModelKind::Mdp,
        _ => return Err(perr("$.type", "expected \"mc\" or \"mdp\"")),
    };
    let states_v = root.get("states").and_then(Value::as_array).ok_or_else(|| perr("$.states", "expected array"))?;
    let mut states = Vec::with_capacity(states_v.len());
    for (i, s) in states_v.iter().enumerate() {
        let name = s.as_str().ok_or_else(|| perr(&format!("$.states[{i}]"), "expected string"))?;
        states.push(name.to_string());
    }
    let index: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != states.len() {
        return Err(ModelError::Validation("duplicate state ids".into()));
    }
    let lookup = |name: &str, path: &str| -> Result<usize, ModelError> {
        index.get(name).copied().ok_or_else(|| perr(path, format!("undeclared state '{name}'")))
    };
    let initial_name = root.get("initial").and_then(Value::as_str).ok_or_else(|| perr("$.initial", "expected string"))?;
    let initial = lookup(initial_name, "$.initial")?;

    let mut actions: Vec<Vec<Action>> = vec![Vec::new(); states.len()];
    let trans = match root.get("transitions") {
        None => Map::new(),
        Some(v) => v.as_object().cloned().ok_or_else(|| perr("$.transitions", "expected object"))?,
    };
    for (s, acts) in &trans {
        let spath = format!("$.transitions.{s}");
        let si = lookup(s, &spath)?;
        let acts = acts.as_object().ok_or_else(|| perr(&spath, "expected object of actions"))?;
        for (a, dist) in acts {
            let apath = format!("{spath}.{a}");
            let dist = dist.as_object().ok_or_else(|| perr(&apath, "expected object of successors"))?;
            let mut succ: BTreeMap<usize, (f64, Option<Ratio<i64>>)> = BTreeMap::new();
            for (t, p) in dist {
                let tpath = format!("{apath}.{t}");
                let ti = lookup(t, &tpath)?;
                let (p, exact) = parse_prob(p, &tpath)?;
                if p < 0.0 {
                    return Err(ModelError::Validation(format!("negative probability at {tpath}")));
                }
                succ.insert(ti, (p, exact));
            }
            let succ = succ
                .into_iter()
                .filter(|(_, (p, _))| *p > 0.0)
                .map(|(target, (prob, exact))| Transition { target, prob, exact })
                .collect();
            actions[si].push(Action { name: a.clone(), succ });
        }
    }
    // states without listed transitions are absorbing
    for (s, acts) in actions.iter_mut().enumerate() {
        if acts.is_empty() {
            acts.push(Action::self_loop("loop", s));
        }
    }
    let model = Model { kind, states: states.clone(), initial, actions };
    model.validate()?;

    let obj_v = root.get("objective").and_then(Value::as_object).ok_or_else(|| perr("$.objective", "expected object"))?;
    let objective = match obj_v.get("kind").and_then(Value::as_str) {
        Some("weighted-reachability") => {
            let mut targets = BTreeMap::new();
            if let Some(t) = obj_v.get("targets") {
                let t = t.as_object().ok_or_else(|| perr("$.objective.targets", "expected object"))?;
                for (s, r) in t {
                    let path = format!("$.objective.targets.{s}");
                    let si = lookup(s, &path)?;
                    let r = r.as_f64().filter(|r| r.is_finite()).ok_or_else(|| perr(&path, "expected number"))?;
                    targets.insert(si, r);
                }
            }
            let penalty = match obj_v.get("penalty") {
                None => 0.0,
                Some(p) => p.as_f64().filter(|r| r.is_finite()).ok_or_else(|| perr("$.objective.penalty", "expected number"))?,
            };
            Objective::WeightedReach(WeightedReachObjective { targets, penalty })
        }
        Some("mean-payoff") => {
            let mut rewards = vec![0.0; model.num_states()];
            if let Some(r) = obj_v.get("rewards") {
                let r = r.as_object().ok_or_else(|| perr("$.objective.rewards", "expected object"))?;
                for (s, v) in r {
                    let path = format!("$.objective.rewards.{s}");
                    let si = lookup(s, &path)?;
                    rewards[si] = v.as_f64().filter(|r| r.is_finite()).ok_or_else(|| perr(&path, "expected number"))?;
                }
            }
            Objective::MeanPayoff(MeanPayoffObjective { rewards })
        }
        Some("total-reward") => {
            return Err(ModelError::UnsupportedObjective(
                "total-reward objectives can have infinitely many outcomes and are not supported".into(),
            ))
        }
        Some(other) => return Err(ModelError::UnsupportedObjective(format!("unknown objective kind '{other}'"))),
        None => return Err(perr("$.objective.kind", "missing")),
    };
    Ok((model, objective))
}

fn prob_json(t: &Transition) -> Value {
    match t.exact {
        Some(r) => Value::String(format!("{}/{}", r.numer(), r.denom())),
        None => json!(t.prob),
    }
}

/// Serializes a model and objective back into the input schema.
pub fn model_to_json(m: &Model, obj: &Objective) -> Value {
    let mut trans = Map::new();
    for (s, acts) in m.actions.iter().enumerate() {
        let mut am = Map::new();
        for a in acts {
            let mut d = Map::new();
            for t in &a.succ {
                d.insert(m.states[t.target].clone(), prob_json(t));
            }
            am.insert(a.name.clone(), Value::Object(d));
        }
        trans.insert(m.states[s].clone(), Value::Object(am));
    }
    let objective = match obj {
        Objective::WeightedReach(o) => {
            let t: Map<String, Value> = o.targets.iter().map(|(&s, &r)| (m.states[s].clone(), json!(r))).collect();
            json!({"kind": "weighted-reachability", "targets": t, "penalty": o.penalty})
        }
        Objective::MeanPayoff(o) => {
            let r: Map<String, Value> =
                o.rewards.iter().enumerate().map(|(s, &r)| (m.states[s].clone(), json!(r))).collect();
            json!({"kind": "mean-payoff", "rewards": r})
        }
    };
    json!({
        "type": match m.kind { ModelKind::Mc => "mc", ModelKind::Mdp => "mdp" },
        "states": m.states,
        "initial": m.states[m.initial],
        "transitions": trans,
        "objective": objective,
    })
}

/// Makes every target absorbing and drops targets whose reward equals the penalty.
pub fn validate_objective(m: &Model, obj: &WeightedReachObjective) -> (Model, WeightedReachObjective) {
    let mut model = m.clone();
    let targets: BTreeMap<usize, f64> =
        obj.targets.iter().filter(|(_, &r)| r != obj.penalty).map(|(&s, &r)| (s, r)).collect();
    for &s in targets.keys() {
        if !model.is_absorbing(s) {
            model.actions[s] = vec![Action::self_loop("loop", s)];
        }
    }
    (model, WeightedReachObjective { targets, penalty: obj.penalty })
}

/// Sorted, deduplicated target rewards together with the penalty outcome.
pub fn outcome_vector(obj: &WeightedReachObjective) -> Vec<f64> {
    let mut v: Vec<f64> = obj.targets.values().copied().collect();
    v.push(obj.penalty);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
