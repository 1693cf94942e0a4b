//! Maximizing (or minimizing) the CPT function over the achievable polytope.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use crate::error::Error;
use crate::numeric::{solve_lp, LinearProgram, LpOutcome, Relation};
use crate::par::{self, Exec};
use crate::prospect::{cpt_raw, lipschitz_constant, secant_gap, ChoquetForm, CptParams, Shape};

use super::pareto::{Geometry, ParetoApprox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    #[default]
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub eps_opt: f64,
    pub direction: Direction,
    /// Branch and bound; otherwise every cell of the uniform grid is visited.
    pub bnb: bool,
    pub exec: Exec,
    pub max_cells: usize,
    /// Boxes split per round.
    pub batch: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            eps_opt: 0.01,
            direction: Direction::Max,
            bnb: true,
            exec: Exec::default(),
            max_cells: 5_000_000,
            batch: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub point: Vec<f64>,
    /// CPT at `point` (not negated when minimizing).
    pub value: f64,
    pub cells: usize,
    pub lp_calls: usize,
}

const BOX_TOL: f64 = 1e-12;

struct Term {
    coef: f64,
    gain: bool,
    base: f64,
    grad: Vec<f64>,
    shape: Shape,
}

struct Problem<'a> {
    geo: &'a Geometry,
    params: &'a CptParams,
    outcomes: &'a [f64],
    sign: f64,
    terms: Vec<Term>,
    lip: f64,
    lp_calls: AtomicUsize,
}

struct BoxEval {
    ub: f64,
    value: f64,
    point: Vec<f64>,
}

struct Node {
    ub: f64,
    id: u64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        self.ub.total_cmp(&o.ub).then(o.id.cmp(&self.id))
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    false
}

struct Incumbent {
    value: f64,
    point: Vec<f64>,
}

impl Incumbent {
    fn offer(&mut self, value: f64, point: &[f64]) {
        if value > self.value || (value == self.value && lex_less(point, &self.point)) {
            self.value = value;
            self.point = point.to_vec();
        }
    }
}

impl<'a> Problem<'a> {
    fn new(geo: &'a Geometry, params: &'a CptParams, outcomes: &'a [f64], direction: Direction) -> Self {
        let sign = if direction == Direction::Max { 1.0 } else { -1.0 };
        let d = geo.dim();
        let terms = ChoquetForm::new(params, outcomes)
            .terms
            .into_iter()
            .map(|t| {
                let base = t.members.iter().map(|&i| geo.frame.origin[i]).sum();
                let grad = (0..d).map(|j| t.members.iter().map(|&i| geo.frame.basis[j][i]).sum()).collect();
                let w = if t.gain { &params.weight_gain } else { &params.weight_loss };
                Term { coef: sign * t.coef, gain: t.gain, base, grad, shape: w.shape() }
            })
            .collect();
        let lip = lipschitz_constant(params, outcomes) * (outcomes.len() as f64).sqrt();
        Problem { geo, params, outcomes, sign, terms, lip, lp_calls: AtomicUsize::new(0) }
    }

    fn global(&self, y: &[f64]) -> Vec<f64> {
        self.geo.frame.to_global(y).into_iter().map(|p| p.clamp(0.0, 1.0)).collect()
    }

    fn objective(&self, p: &[f64]) -> f64 {
        self.sign * cpt_raw(self.params, self.outcomes, p)
    }

    // Facets that cut the box; None if the box misses the polytope.
    fn cutting(&self, lo: &[f64], hi: &[f64]) -> Option<Vec<usize>> {
        let mut cut = Vec::new();
        for (i, (n, b)) in self.geo.facets.iter().enumerate() {
            let (mut mn, mut mx) = (0.0, 0.0);
            for j in 0..n.len() {
                let (a, c) = (n[j] * lo[j], n[j] * hi[j]);
                mn += a.min(c);
                mx += a.max(c);
            }
            if mn > b + BOX_TOL {
                return None;
            }
            if mx > b + BOX_TOL {
                cut.push(i);
            }
        }
        Some(cut)
    }

    // Maximizes `lin · y` over the box intersected with the cutting facets.
    fn box_lp(&self, lin: &[f64], lo: &[f64], hi: &[f64], cut: &[usize]) -> Result<Option<(Vec<f64>, f64)>, Error> {
        let mut lp = LinearProgram::new(lin.to_vec());
        lp.bounds = lo.iter().zip(hi).map(|(&a, &b)| (a, b)).collect();
        for &i in cut {
            let (n, b) = &self.geo.facets[i];
            lp.push(n.clone(), Relation::Le, *b);
        }
        self.lp_calls.fetch_add(1, AtomicOrdering::Relaxed);
        Ok(match solve_lp(&lp)? {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        })
    }

    fn eval_box(&self, lo: &[f64], hi: &[f64]) -> Result<Option<BoxEval>, Error> {
        let Some(cut) = self.cutting(lo, hi) else { return Ok(None) };
        let d = lo.len();
        let mut ub_mono = 0.0;
        let mut konst = 0.0;
        let mut lin = vec![0.0; d];
        for t in &self.terms {
            let w = if t.gain { &self.params.weight_gain } else { &self.params.weight_loss };
            let (mut mn, mut mx) = (t.base, t.base);
            for j in 0..d {
                let (a, c) = (t.grad[j] * lo[j], t.grad[j] * hi[j]);
                mn += a.min(c);
                mx += a.max(c);
            }
            let (mn, mx) = (mn.clamp(0.0, 1.0), mx.clamp(0.0, 1.0));
            let (wl, wh) = (w.eval(mn), w.eval(mx));
            let mono = if t.coef > 0.0 { t.coef * wh } else { t.coef * wl };
            ub_mono += mono;
            if mx - mn < 1e-15 {
                konst += mono;
                continue;
            }
            let s = (wh - wl) / (mx - mn);
            let gap = secant_gap(w, t.shape, mn, mx, t.coef > 0.0);
            konst += t.coef * (wl + s * (t.base - mn)) + t.coef.abs() * gap;
            for j in 0..d {
                lin[j] += t.coef * s * t.grad[j];
            }
        }
        let (rep, ub_sec) = if cut.is_empty() {
            let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let best: f64 = (0..d).map(|j| (lin[j] * lo[j]).max(lin[j] * hi[j])).sum();
            (center, konst + best)
        } else {
            match self.box_lp(&lin, lo, hi, &cut)? {
                Some((x, v)) => (x, konst + v),
                None => return Ok(None),
            }
        };
        let point = self.global(&rep);
        let value = self.objective(&point);
        let diam = lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        let ub_lip = value + self.lip * diam;
        let ub = ub_lip.min(ub_mono).min(ub_sec).max(value);
        Ok(Some(BoxEval { ub, value, point }))
    }

    fn root(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.geo.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for v in &self.geo.vertices {
            for j in 0..d {
                lo[j] = lo[j].min(v[j]);
                hi[j] = hi[j].max(v[j]);
            }
        }
        (lo, hi)
    }

    fn incumbent_from_vertices(&self) -> Incumbent {
        let mut inc = Incumbent { value: f64::NEG_INFINITY, point: Vec::new() };
        for v in &self.geo.vertices {
            let p = self.global(v);
            inc.offer(self.objective(&p), &p);
        }
        inc
    }
}

fn split(lo: &[f64], hi: &[f64]) -> [(Vec<f64>, Vec<f64>); 2] {
    let j = (0..lo.len())
        .fold((0, -1.0), |acc, j| if hi[j] - lo[j] > acc.1 { (j, hi[j] - lo[j]) } else { acc })
        .0;
    let mid = 0.5 * (lo[j] + hi[j]);
    let (mut hi_a, mut lo_b) = (hi.to_vec(), lo.to_vec());
    hi_a[j] = mid;
    lo_b[j] = mid;
    [(lo.to_vec(), hi_a), (lo_b, hi.to_vec())]
}

fn branch_and_bound(pb: &Problem, opts: &OptimizeOptions) -> Result<(Incumbent, usize), Error> {
    let mut inc = pb.incumbent_from_vertices();
    let (lo, hi) = pb.root();
    let mut cells = 1;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    if let Some(e) = pb.eval_box(&lo, &hi)? {
        inc.offer(e.value, &e.point);
        heap.push(Node { ub: e.ub, id: next_id, lo, hi });
        next_id += 1;
    }
    while heap.peek().is_some_and(|n| n.ub > inc.value + opts.eps_opt) {
        let mut children = Vec::new();
        while children.len() < 2 * opts.batch.max(1) {
            match heap.peek() {
                Some(n) if n.ub > inc.value + opts.eps_opt => {
                    let n = heap.pop().unwrap();
                    children.extend(split(&n.lo, &n.hi));
                }
                _ => break,
            }
        }
        cells += children.len();
        if cells > opts.max_cells {
            return Err(Error::Budget(format!("more than {} boxes examined", opts.max_cells)));
        }
        let evals = par::map(opts.exec, &children, |(lo, hi)| pb.eval_box(lo, hi));
        for ((lo, hi), e) in children.into_iter().zip(evals) {
            if let Some(e) = e? {
                inc.offer(e.value, &e.point);
                if e.ub > inc.value + opts.eps_opt {
                    heap.push(Node { ub: e.ub, id: next_id, lo, hi });
                    next_id += 1;
                }
            }
        }
    }
    Ok((inc, cells))
}

// Every cell of side eps / (L √k), each represented by its center or a feasible point.
fn literal_grid(pb: &Problem, opts: &OptimizeOptions) -> Result<(Incumbent, usize), Error> {
    let mut inc = pb.incumbent_from_vertices();
    let (lo, hi) = pb.root();
    let k = pb.outcomes.len() as f64;
    let h = opts.eps_opt / (lipschitz_constant(pb.params, pb.outcomes) * k.sqrt());
    let counts: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (((b - a) / h).ceil() as usize).max(1)).collect();
    let total = counts.iter().map(|&c| c as f64).product::<f64>();
    if !total.is_finite() || total > opts.max_cells as f64 {
        return Err(Error::Budget(format!("grid needs {total:.3e} cells, budget is {}", opts.max_cells)));
    }
    let total = total as usize;
    let sum_dir: Vec<f64> = pb.geo.frame.basis.iter().map(|b| b.iter().sum()).collect();
    let cell = |idx: usize| -> Result<Option<(f64, Vec<f64>)>, Error> {
        let mut rest = idx;
        let mut clo = vec![0.0; counts.len()];
        let mut chi = vec![0.0; counts.len()];
        for j in (0..counts.len()).rev() {
            let i = rest % counts[j];
            rest /= counts[j];
            clo[j] = lo[j] + i as f64 * h;
            chi[j] = (clo[j] + h).min(hi[j]);
        }
        let Some(cut) = pb.cutting(&clo, &chi) else { return Ok(None) };
        let rep = if cut.is_empty() {
            clo.iter().zip(&chi).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            match pb.box_lp(&sum_dir, &clo, &chi, &cut)? {
                Some((x, _)) => x,
                None => return Ok(None),
            }
        };
        let p = pb.global(&rep);
        Ok(Some((pb.objective(&p), p)))
    };
    const CHUNK: usize = 1 << 14;
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        for r in par::map_range(opts.exec, end - start, |i| cell(start + i)) {
            if let Some((v, p)) = r? {
                inc.offer(v, &p);
            }
        }
        start = end;
    }
    Ok((inc, total))
}

/// Best point of the frontier polytope with its CPT value.
pub fn optimize_cpt_on_frontier(
    frontier: &ParetoApprox,
    outcomes: &[f64],
    params: &CptParams,
    eps_opt: f64,
) -> Result<(Vec<f64>, f64), Error> {
    let r = optimize_with(frontier, outcomes, params, &OptimizeOptions { eps_opt, ..Default::default() })?;
    Ok((r.point, r.value))
}

pub fn optimize_with(
    frontier: &ParetoApprox,
    outcomes: &[f64],
    params: &CptParams,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult, Error> {
    if !(opts.eps_opt > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let geo = &frontier.geometry;
    if geo.frame.ambient() != outcomes.len() {
        return Err(Error::InvalidInput("frontier and outcomes differ in dimension".into()));
    }
    let pb = Problem::new(geo, params, outcomes, opts.direction);
    let (inc, cells) = if geo.dim() == 0 {
        (pb.incumbent_from_vertices(), 1)
    } else if opts.bnb {
        branch_and_bound(&pb, opts)?
    } else {
        literal_grid(&pb, opts)?
    };
    Ok(OptimizeResult {
        value: pb.sign * inc.value,
        point: inc.point,
        cells,
        lp_calls: pb.lp_calls.load(AtomicOrdering::Relaxed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running_frontier() -> ParetoApprox {
        // outcomes -5, 0, 20; a1 and a2 of the running example
        ParetoApprox::from_points(vec![vec![0.0, 0.05, 0.95], vec![0.44, 0.05, 0.51]], 0.0).unwrap()
    }

    fn brute(f: &ParetoApprox, outcomes: &[f64], params: &CptParams) -> f64 {
        let (a, b) = (&f.extreme_points[0], &f.extreme_points[1]);
        (0..=100_000)
            .map(|i| {
                let t = i as f64 / 100_000.0;
                let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
                cpt_raw(params, outcomes, &p)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn segment_matches_fine_grid() {
        let f = running_frontier();
        let o = [-5.0, 0.0, 20.0];
        let p = CptParams::standard();
        let (pt, v) = optimize_cpt_on_frontier(&f, &o, &p, 1e-4).unwrap();
        let b = brute(&f, &o, &p);
        assert!(v >= b - 1e-4, "{v} vs {b}");
        assert!(f.contains(&pt, 1e-9));
        assert!((cpt_raw(&p, &o, &pt) - v).abs() < 1e-12);
    }

    #[test]
    fn minimizing_and_literal_grid() {
        let f = running_frontier();
        let o = [-5.0, 0.0, 20.0];
        let p = CptParams::standard();
        let min = optimize_with(&f, &o, &p, &OptimizeOptions { direction: Direction::Min, eps_opt: 1e-4, ..Default::default() })
            .unwrap();
        let ends: Vec<f64> = f.extreme_points.iter().map(|e| cpt_raw(&p, &o, e)).collect();
        assert!(min.value <= ends[0].min(ends[1]) + 1e-12);
        let grid = optimize_with(&f, &o, &p, &OptimizeOptions { bnb: false, eps_opt: 0.5, ..Default::default() }).unwrap();
        let bnb = optimize_with(&f, &o, &p, &OptimizeOptions { eps_opt: 0.5, ..Default::default() }).unwrap();
        assert!((grid.value - bnb.value).abs() <= 0.5);
    }

    #[test]
    fn sequential_equals_parallel() {
        let f = running_frontier();
        let o = [-5.0, 0.0, 20.0];
        let p = CptParams::standard();
        let a = optimize_with(&f, &o, &p, &OptimizeOptions { exec: Exec::Sequential, ..Default::default() }).unwrap();
        let b = optimize_with(&f, &o, &p, &OptimizeOptions { exec: Exec::Parallel, ..Default::default() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_is_reported() {
        let f = running_frontier();
        let o = [-5.0, 0.0, 20.0];
        let p = CptParams::standard();
        let r = optimize_with(&f, &o, &p, &OptimizeOptions { bnb: false, eps_opt: 1e-6, max_cells: 10, ..Default::default() });
        assert!(matches!(r, Err(Error::Budget(_))));
    }
}
