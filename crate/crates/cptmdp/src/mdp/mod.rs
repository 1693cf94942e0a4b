//! CPT-optimal strategies for MDPs with weighted-reachability objectives.

mod hull;
mod occupation;
mod optimize;
mod pareto;
mod quotient;
mod strategy;

use std::time::{Duration, Instant};

use serde_json::{json, Value};

pub use hull::{AffineFrame, Facet, Hull};
pub use occupation::{achievable_point, Achievable, Occupation};
pub use optimize::{optimize_cpt_on_frontier, optimize_with, Direction, OptimizeOptions, OptimizeResult};
pub use pareto::{pareto_frontier, Geometry, ParetoApprox};
pub use quotient::{build_mo_query, make_stopping, QuotientAction, QuotientResult, QuotientState};
pub use strategy::{extract_strategy, induced_chain, verify_strategy};

use crate::error::Error;
use crate::model::{outcome_vector, Model, Strategy, WeightedReachObjective};
use crate::par::Exec;
use crate::prospect::{lipschitz_constant, CptParams, Prospect};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub epsilon: f64,
    pub direction: Direction,
    pub bnb: bool,
    pub exec: Exec,
    pub max_cells: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let o = OptimizeOptions::default();
        SolveOptions { epsilon: o.eps_opt, direction: Direction::Max, bnb: true, exec: o.exec, max_cells: o.max_cells }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub lp_calls: usize,
    pub hypercubes_examined: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CptSolveResult {
    pub value: f64,
    pub error_bound: f64,
    pub best_point: Vec<f64>,
    pub best_prospect: Prospect,
    pub strategy: Strategy,
    pub frontier: ParetoApprox,
    pub outcomes: Vec<f64>,
    pub lipschitz: f64,
    pub stats: SolveStats,
}

impl CptSolveResult {
    /// Everything except wall time, so repeated runs serialize identically.
    pub fn to_json(&self) -> Value {
        json!({
            "value": self.value,
            "error_bound": self.error_bound,
            "best_point": self.best_point,
            "best_prospect": {
                "outcomes": self.best_prospect.outcomes(),
                "probs": self.best_prospect.probs(),
            },
            "strategy": self.strategy.to_json(),
            "frontier": self.frontier.to_json(&self.outcomes),
            "stats": {
                "lp_calls": self.stats.lp_calls,
                "hypercubes_examined": self.stats.hypercubes_examined,
            },
        })
    }
}

/// Optimal CPT value over all strategies, within `eps · (1 + L)`.
pub fn mdp_cpt_value(
    m: &Model,
    obj: &WeightedReachObjective,
    params: &CptParams,
    eps: f64,
    direction: Direction,
) -> Result<CptSolveResult, Error> {
    solve_weighted_reach(m, obj, params, &SolveOptions { epsilon: eps, direction, ..Default::default() })
}

pub fn solve_weighted_reach(
    m: &Model,
    obj: &WeightedReachObjective,
    params: &CptParams,
    opts: &SolveOptions,
) -> Result<CptSolveResult, Error> {
    let start = Instant::now();
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    m.validate()?;
    let q = make_stopping(m, obj);
    let query = build_mo_query(&q);
    let outcomes = outcome_vector(&q.objective);
    let frontier = pareto_frontier(&q, &query, opts.epsilon)?;
    let oopts = OptimizeOptions {
        eps_opt: opts.epsilon,
        direction: opts.direction,
        bnb: opts.bnb,
        exec: opts.exec,
        max_cells: opts.max_cells,
        ..Default::default()
    };
    let best = optimize_with(&frontier, &outcomes, params, &oopts)?;
    let (strategy, extract_calls) = strategy::extract_strategy_counted(&q, &query, &best.point)?;
    let lipschitz = lipschitz_constant(params, &outcomes);
    let probs: Vec<f64> = best.point.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    let best_prospect = Prospect::new(outcomes.clone(), probs).or_else(|_| {
        let s: f64 = best.point.iter().map(|p| p.max(0.0)).sum();
        Prospect::new(outcomes.clone(), best.point.iter().map(|p| p.max(0.0) / s).collect())
    })?;
    Ok(CptSolveResult {
        value: best.value,
        error_bound: opts.epsilon * (1.0 + lipschitz),
        best_point: best.point,
        best_prospect,
        strategy,
        outcomes,
        lipschitz,
        stats: SolveStats {
            lp_calls: frontier.lp_calls + best.lp_calls + extract_calls,
            hypercubes_examined: best.cells,
            wall_time: start.elapsed(),
        },
        frontier,
    })
}
