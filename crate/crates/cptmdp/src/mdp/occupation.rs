//! Occupation-measure linear programs for multi-objective reachability.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::Error;
use crate::model::Model;
use crate::numeric::{solve_lp, LinearProgram, LpOutcome, Relation};
use crate::prospect::PROB_TOL;

use super::quotient::QuotientResult;

/// Expected number of times each (state, action) pair is taken, indexed like `Model::actions`.
pub type Occupation = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub enum Achievable {
    Yes(Occupation),
    No,
}

const ZERO: f64 = 1e-12;

/// Flow constraints of a model whose `absorbing` states stop the process.
pub(crate) struct ReachLp<'a> {
    m: &'a Model,
    vars: Vec<(usize, usize)>,
    rows: Vec<usize>,
    row_of: Vec<usize>,
    // probability of moving from each var into each query set
    reach: Vec<Vec<f64>>,
    initial_point: Vec<f64>,
    pub(crate) calls: AtomicUsize,
}

impl<'a> ReachLp<'a> {
    pub(crate) fn new(m: &'a Model, absorbing: &[bool], query: &[Vec<usize>]) -> Self {
        let n = m.num_states();
        let mut set_of = vec![usize::MAX; n];
        for (i, set) in query.iter().enumerate() {
            for &s in set {
                set_of[s] = i;
            }
        }
        let rows: Vec<usize> = (0..n).filter(|&s| !absorbing[s]).collect();
        let mut row_of = vec![usize::MAX; n];
        for (r, &s) in rows.iter().enumerate() {
            row_of[s] = r;
        }
        let mut vars = Vec::new();
        let mut reach = Vec::new();
        for &s in &rows {
            for (ai, a) in m.actions[s].iter().enumerate() {
                vars.push((s, ai));
                let mut r = vec![0.0; query.len()];
                for (t, p) in a.dist() {
                    if set_of[t] != usize::MAX {
                        r[set_of[t]] += p;
                    }
                }
                reach.push(r);
            }
        }
        let mut initial_point = vec![0.0; query.len()];
        if set_of[m.initial] != usize::MAX {
            initial_point[set_of[m.initial]] = 1.0;
        }
        ReachLp { m, vars, rows, row_of, reach, initial_point, calls: AtomicUsize::new(0) }
    }

    fn flow_lp(&self, objective: Vec<f64>) -> LinearProgram {
        let nv = self.vars.len();
        let mut coeffs = vec![vec![0.0; nv]; self.rows.len()];
        for (v, &(s, ai)) in self.vars.iter().enumerate() {
            coeffs[self.row_of[s]][v] += 1.0;
            for (t, p) in self.m.actions[s][ai].dist() {
                if self.row_of[t] != usize::MAX {
                    coeffs[self.row_of[t]][v] -= p;
                }
            }
        }
        let mut lp = LinearProgram::new(objective);
        for (r, c) in coeffs.into_iter().enumerate() {
            let rhs = if self.rows[r] == self.m.initial { 1.0 } else { 0.0 };
            lp.push(c, Relation::Eq, rhs);
        }
        lp
    }

    pub(crate) fn point(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.initial_point.clone();
        for (v, r) in self.reach.iter().enumerate() {
            for (yi, ri) in y.iter_mut().zip(r) {
                *yi += x[v] * ri;
            }
        }
        y
    }

    pub(crate) fn occupation(&self, x: &[f64]) -> Occupation {
        let mut occ: Occupation = self.m.actions.iter().map(|a| vec![0.0; a.len()]).collect();
        for (v, &(s, ai)) in self.vars.iter().enumerate() {
            occ[s][ai] = if x[v] > ZERO { x[v] } else { 0.0 };
        }
        occ
    }

    fn run(&self, lp: &LinearProgram) -> Result<LpOutcome, Error> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(solve_lp(lp)?)
    }

    /// Maximizes `dir · y` over achievable points.
    pub(crate) fn maximize(&self, dir: &[f64]) -> Result<(Vec<f64>, Occupation), Error> {
        let obj = self.reach.iter().map(|r| r.iter().zip(dir).map(|(a, b)| a * b).sum()).collect();
        match self.run(&self.flow_lp(obj))? {
            LpOutcome::Optimal { x, .. } => Ok((self.point(&x), self.occupation(&x))),
            LpOutcome::Unbounded => Err(Error::InvalidInput("reachability program is unbounded".into())),
            LpOutcome::Infeasible => Err(Error::InvalidInput("reachability program is infeasible".into())),
        }
    }

    /// Smallest occupation measure whose point dominates `point - slack`.
    pub(crate) fn dominating(&self, point: &[f64], slack: f64) -> Result<Option<(Vec<f64>, Occupation)>, Error> {
        let mut lp = self.flow_lp(vec![-1.0; self.vars.len()]);
        for i in 0..point.len() {
            let c: Vec<f64> = self.reach.iter().map(|r| r[i]).collect();
            lp.push(c, Relation::Ge, point[i] - self.initial_point[i] - slack);
        }
        match self.run(&lp)? {
            LpOutcome::Optimal { x, .. } => Ok(Some((self.point(&x), self.occupation(&x)))),
            _ => Ok(None),
        }
    }

    pub(crate) fn lp_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

/// States where the stopping quotient halts: targets and the sink.
pub(crate) fn quotient_absorbing(q: &QuotientResult) -> Vec<bool> {
    (0..q.quotient.num_states())
        .map(|s| s == q.sink || q.objective.targets.contains_key(&s))
        .collect()
}

/// Whether some strategy reaches each query set with at least the given probability, up to `PROB_TOL`.
pub fn achievable_point(q: &QuotientResult, query: &[Vec<usize>], point: &[f64]) -> Result<Achievable, Error> {
    if point.len() != query.len() {
        return Err(Error::InvalidInput(format!("point has {} entries for {} sets", point.len(), query.len())));
    }
    let absorbing = quotient_absorbing(q);
    let lp = ReachLp::new(&q.quotient, &absorbing, query);
    Ok(match lp.dominating(point, PROB_TOL)? {
        Some((_, occ)) => Achievable::Yes(occ),
        None => Achievable::No,
    })
}
