//! Extreme points of the polytope of achievable reachability vectors.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::error::Error;
use crate::numeric::{solve_lp, LinearProgram, LpOutcome, Relation};

use super::hull::{AffineFrame, Hull};
use super::occupation::{quotient_absorbing, Occupation, ReachLp};
use super::quotient::QuotientResult;

const SPAN_TOL: f64 = 1e-9;
const HULL_TOL: f64 = 1e-10;
const CONFIRM_TOL: f64 = 1e-9;
const MAX_FRONTIER_LPS: usize = 200_000;

/// The polytope in local coordinates of its affine hull.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub frame: AffineFrame,
    pub vertices: Vec<Vec<f64>>,
    /// Outward unit normals and offsets; empty below dimension 1.
    pub facets: Vec<(Vec<f64>, f64)>,
}

impl Geometry {
    fn new(points: &[Vec<f64>]) -> Geometry {
        let frame = AffineFrame::from_points(points, SPAN_TOL);
        let vertices: Vec<Vec<f64>> = points.iter().map(|p| frame.to_local(p)).collect();
        let facets = match Hull::new(&vertices, frame.dim(), HULL_TOL) {
            Some(h) => h.planes(),
            None => Vec::new(),
        };
        Geometry { frame, vertices, facets }
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoApprox {
    pub extreme_points: Vec<Vec<f64>>,
    /// Occupation measure realizing each extreme point; empty when built from bare points.
    pub witnesses: Vec<Occupation>,
    pub epsilon_pareto: f64,
    pub geometry: Geometry,
    pub lp_calls: usize,
}

// Is `points[i]` a convex combination of the other points?
fn in_hull_of_others(points: &[Vec<f64>], i: usize) -> Result<bool, Error> {
    let others: Vec<&Vec<f64>> = points.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p).collect();
    if others.is_empty() {
        return Ok(false);
    }
    let mut lp = LinearProgram::new(vec![0.0; others.len()]);
    lp.push(vec![1.0; others.len()], Relation::Eq, 1.0);
    for c in 0..points[i].len() {
        lp.push(others.iter().map(|p| p[c]).collect(), Relation::Eq, points[i][c]);
    }
    Ok(matches!(solve_lp(&lp)?, LpOutcome::Optimal { .. }))
}

// Is `points[i]` strictly dominated by a point of the hull?
fn dominated(points: &[Vec<f64>], i: usize) -> Result<bool, Error> {
    let k = points[i].len();
    let obj = points.iter().map(|p| p.iter().sum()).collect();
    let mut lp = LinearProgram::new(obj);
    lp.push(vec![1.0; points.len()], Relation::Eq, 1.0);
    for c in 0..k {
        lp.push(points.iter().map(|p| p[c]).collect(), Relation::Ge, points[i][c]);
    }
    Ok(match solve_lp(&lp)? {
        LpOutcome::Optimal { value, .. } => value > points[i].iter().sum::<f64>() + CONFIRM_TOL,
        _ => false,
    })
}

// Drops duplicates, non-extreme points and, when not every point sums to one, dominated points.
fn reduce(points: Vec<Vec<f64>>, witnesses: Vec<Occupation>) -> Result<(Vec<Vec<f64>>, Vec<Occupation>), Error> {
    let has_w = !witnesses.is_empty();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut ws = Vec::new();
    for (i, p) in points.into_iter().enumerate() {
        if pts.iter().all(|q: &Vec<f64>| q.iter().zip(&p).any(|(a, b)| (a - b).abs() > 1e-12)) {
            pts.push(p);
            if has_w {
                ws.push(witnesses[i].clone());
            }
        }
    }
    let geo = Geometry::new(&pts);
    let local: Vec<Vec<f64>> = pts.iter().map(|p| geo.frame.to_local(p)).collect();
    let mut keep: Vec<bool> = vec![true; pts.len()];
    for i in 0..pts.len() {
        let rest: Vec<Vec<f64>> = (0..pts.len()).filter(|&j| keep[j] || j == i).map(|j| local[j].clone()).collect();
        let pos = (0..i).filter(|&j| keep[j]).count();
        if in_hull_of_others(&rest, pos)? {
            keep[i] = false;
        }
    }
    let partition = pts.iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    if !partition {
        let live: Vec<Vec<f64>> = (0..pts.len()).filter(|&j| keep[j]).map(|j| pts[j].clone()).collect();
        let mut pos = 0;
        for i in 0..pts.len() {
            if keep[i] {
                if dominated(&live, pos)? {
                    keep[i] = false;
                }
                pos += 1;
            }
        }
    }
    let out_p = (0..pts.len()).filter(|&i| keep[i]).map(|i| pts[i].clone()).collect();
    let out_w = if has_w { (0..pts.len()).filter(|&i| keep[i]).map(|i| ws[i].clone()).collect() } else { Vec::new() };
    Ok((out_p, out_w))
}

impl ParetoApprox {
    /// Polytope spanned by externally supplied points.
    pub fn from_points(points: Vec<Vec<f64>>, epsilon_pareto: f64) -> Result<ParetoApprox, Error> {
        if points.is_empty() {
            return Err(Error::InvalidInput("no points".into()));
        }
        let k = points[0].len();
        if points.iter().any(|p| p.len() != k) {
            return Err(Error::InvalidInput("points differ in length".into()));
        }
        let (extreme_points, _) = reduce(points, Vec::new())?;
        let geometry = Geometry::new(&extreme_points);
        Ok(ParetoApprox { extreme_points, witnesses: Vec::new(), epsilon_pareto, geometry, lp_calls: 0 })
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    /// Whether `p` lies in the polytope up to `tol`.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        let g = &self.geometry;
        if g.frame.distance(p) > tol {
            return false;
        }
        let y = g.frame.to_local(p);
        g.facets.iter().all(|(n, b)| n.iter().zip(&y).map(|(a, c)| a * c).sum::<f64>() <= b + tol)
    }

    pub fn to_json(&self, outcomes: &[f64]) -> Value {
        json!({
            "outcomes": outcomes,
            "extreme_points": self.extreme_points,
            "epsilon": self.epsilon_pareto,
        })
    }
}

/// Exact vertex enumeration of the achievable set, by alternating hull updates and
/// facet-normal linear programs until every facet is confirmed.
pub fn pareto_frontier(q: &QuotientResult, query: &[Vec<usize>], eps: f64) -> Result<ParetoApprox, Error> {
    let k = query.len();
    if k == 0 {
        return Err(Error::InvalidInput("empty query".into()));
    }
    let absorbing = quotient_absorbing(q);
    let lp = ReachLp::new(&q.quotient, &absorbing, query);
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut witnesses: Vec<Occupation> = Vec::new();
    let mut add = |p: Vec<f64>, w: Occupation, points: &mut Vec<Vec<f64>>| {
        if points.iter().all(|q| q.iter().zip(&p).any(|(a, b)| (a - b).abs() > 1e-12)) {
            points.push(p);
            witnesses.push(w);
        }
    };
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        let (p, w) = lp.maximize(&e)?;
        add(p, w, &mut points);
    }
    let mut frame = AffineFrame::from_points(&points, SPAN_TOL);

    // grow the affine hull along complement directions
    'grow: loop {
        for u in frame.complement() {
            for sign in [1.0, -1.0] {
                let dir: Vec<f64> = u.iter().map(|x| sign * x).collect();
                let (p, w) = lp.maximize(&dir)?;
                if frame.distance(&p) > SPAN_TOL {
                    frame.extend(&p, 0.0);
                    add(p, w, &mut points);
                    continue 'grow;
                }
            }
        }
        break;
    }

    let d = frame.dim();
    if d > 0 {
        let local: Vec<Vec<f64>> = points.iter().map(|p| frame.to_local(p)).collect();
        let mut hull = Hull::new(&local, d, HULL_TOL)
            .ok_or_else(|| Error::InvalidInput("degenerate achievable set".into()))?;
        let mut confirmed: BTreeSet<Vec<usize>> = BTreeSet::new();
        while let Some(f) = hull.facets.iter().find(|f| !confirmed.contains(&f.verts)).cloned() {
            if lp.lp_calls() > MAX_FRONTIER_LPS {
                return Err(Error::Budget("frontier enumeration did not converge".into()));
            }
            let (p, w) = lp.maximize(&frame.direction(&f.normal))?;
            let y = frame.to_local(&p);
            if f.height(&y) > CONFIRM_TOL && hull.insert(y) {
                add(p, w, &mut points);
            } else {
                confirmed.insert(f.verts);
            }
        }
    }
    let lp_calls = lp.lp_calls();
    let (extreme_points, witnesses) = reduce(points, witnesses)?;
    let geometry = Geometry::new(&extreme_points);
    Ok(ParetoApprox { extreme_points, witnesses, epsilon_pareto: eps, geometry, lp_calls })
}
