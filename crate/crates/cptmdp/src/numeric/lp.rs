use super::NumericError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Maximize `objective · x` subject to the constraints and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// (lower, upper); infinite values allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// All variables in [0, ∞).
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { objective, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, *value)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpTolerances {
    pub feasibility: f64,
    pub pivot: f64,
    pub max_pivots: usize,
}

impl Default for LpTolerances {
    fn default() -> Self {
        LpTolerances { feasibility: 1e-8, pivot: 1e-12, max_pivots: 1_000_000 }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, NumericError> {
    solve_lp_with(lp, &LpTolerances::default())
}

// How an original variable is expressed through nonnegative columns.
enum VarMap {
    Shift(usize, f64),
    Flip(usize, f64),
    Split(usize, usize),
}

const COST_TOL: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;

/// Two-phase dense tableau simplex. Dantzig pricing, switching to Bland's rule
/// during long runs of degenerate pivots.
pub fn solve_lp_with(lp: &LinearProgram, tol: &LpTolerances) -> Result<LpOutcome, NumericError> {
    let n = lp.num_vars();
    if lp.bounds.len() != n || lp.constraints.iter().any(|c| c.coeffs.len() != n) {
        return Err(NumericError::Dimension("LP dimensions are inconsistent".into()));
    }
    for &(l, u) in &lp.bounds {
        if l > u + tol.feasibility || l == f64::INFINITY || u == f64::NEG_INFINITY {
            return Ok(LpOutcome::Infeasible);
        }
    }

    // column layout for structural variables
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    for &(l, u) in &lp.bounds {
        if l.is_finite() {
            maps.push(VarMap::Shift(ncols, l));
            if u.is_finite() {
                extra_rows.push((ncols, u - l));
            }
            ncols += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Flip(ncols, u));
            ncols += 1;
        } else {
            maps.push(VarMap::Split(ncols, ncols + 1));
            ncols += 2;
        }
    }
    let nstruct = ncols;

    // rows in terms of the structural columns
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(lp.constraints.len() + extra_rows.len());
    for c in &lp.constraints {
        let mut a = vec![0.0; nstruct];
        let mut b = c.rhs;
        for (j, &v) in c.coeffs.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift(col, l) => {
                    a[col] += v;
                    b -= v * l;
                }
                VarMap::Flip(col, u) => {
                    a[col] -= v;
                    b -= v * u;
                }
                VarMap::Split(p, q) => {
                    a[p] += v;
                    a[q] -= v;
                }
            }
        }
        rows.push((a, c.relation, b));
    }
    for &(col, ub) in &extra_rows {
        let mut a = vec![0.0; nstruct];
        a[col] = 1.0;
        rows.push((a, Relation::Le, ub));
    }
    let mut cost = vec![0.0; nstruct];
    for (j, &c) in lp.objective.iter().enumerate() {
        match maps[j] {
            VarMap::Shift(col, _) => cost[col] += c,
            VarMap::Flip(col, _) => cost[col] -= c,
            VarMap::Split(p, q) => {
                cost[p] += c;
                cost[q] -= c;
            }
        }
    }

    // normalize to nonnegative right-hand sides
    for r in rows.iter_mut() {
        if r.2 < 0.0 {
            for v in r.0.iter_mut() {
                *v = -*v;
            }
            r.2 = -r.2;
            r.1 = match r.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let nart = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let total = nstruct + nslack + nart;
    let mut t = Tableau::new(m, total);
    let mut slack = nstruct;
    let mut art = nstruct + nslack;
    for (i, (a, rel, b)) in rows.iter().enumerate() {
        t.row_mut(i)[..nstruct].copy_from_slice(a);
        t.set(i, total, *b);
        match rel {
            Relation::Le => {
                t.set(i, slack, 1.0);
                t.basis[i] = slack;
                slack += 1;
            }
            Relation::Ge => {
                t.set(i, slack, -1.0);
                slack += 1;
                t.set(i, art, 1.0);
                t.basis[i] = art;
                art += 1;
            }
            Relation::Eq => {
                t.set(i, art, 1.0);
                t.basis[i] = art;
                art += 1;
            }
        }
    }
    let art_start = nstruct + nslack;
    let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);

    if nart > 0 {
        let mut c1 = vec![0.0; total];
        for c in c1.iter_mut().skip(art_start) {
            *c = -1.0;
        }
        t.set_objective(&c1);
        match t.run(tol, total)? {
            Run::Optimal => {}
            Run::Unbounded => unreachable!("phase one is bounded"),
        }
        if -t.value() > tol.feasibility * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining artificials out of the basis
        let mut i = 0;
        while i < t.m {
            if t.basis[i] >= art_start {
                let mut entered = false;
                for j in 0..art_start {
                    if t.get(i, j).abs() > 1e-9 {
                        t.pivot(i, j);
                        entered = true;
                        break;
                    }
                }
                if !entered {
                    t.remove_row(i);
                    continue;
                }
            }
            i += 1;
        }
    }

    let mut c2 = vec![0.0; total];
    c2[..nstruct].copy_from_slice(&cost);
    t.set_objective(&c2);
    match t.run(tol, art_start)? {
        Run::Unbounded => return Ok(LpOutcome::Unbounded),
        Run::Optimal => {}
    }
    let mut xs = vec![0.0; total];
    for i in 0..t.m {
        xs[t.basis[i]] = t.get(i, total);
    }
    let mut x = vec![0.0; n];
    for (j, map) in maps.iter().enumerate() {
        x[j] = match *map {
            VarMap::Shift(col, l) => l + xs[col],
            VarMap::Flip(col, u) => u - xs[col],
            VarMap::Split(p, q) => xs[p] - xs[q],
        };
        let (l, u) = lp.bounds[j];
        x[j] = x[j].clamp(l, u);
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    Ok(LpOutcome::Optimal { x, value })
}

enum Run {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    n: usize,
    w: usize,
    data: Vec<f64>,
    // reduced costs, last entry holds minus the objective value
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(m: usize, n: usize) -> Self {
        let w = n + 1;
        Tableau { m, n, w, data: vec![0.0; m * w], obj: vec![0.0; w], basis: vec![0; m] }
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.w..(i + 1) * self.w]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.w + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.w + j] = v;
    }

    fn value(&self) -> f64 {
        -self.obj[self.n]
    }

    fn set_objective(&mut self, c: &[f64]) {
        self.obj[..self.n].copy_from_slice(c);
        self.obj[self.n] = 0.0;
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.w {
                    self.obj[j] -= cb * self.data[i * self.w + j];
                }
            }
        }
    }

    fn remove_row(&mut self, i: usize) {
        self.data.drain(i * self.w..(i + 1) * self.w);
        self.basis.remove(i);
        self.m -= 1;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.w;
        let p = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for j in 0..w {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for j in 0..w {
                self.obj[j] -= f * prow[j];
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    // Columns at or beyond `limit` never enter.
    fn run(&mut self, tol: &LpTolerances, limit: usize) -> Result<Run, NumericError> {
        let mut pivots = 0usize;
        let mut streak = 0usize;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = COST_TOL;
            for j in 0..limit {
                let d = self.obj[j];
                if d > COST_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d > best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else { return Ok(Run::Optimal) };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.get(i, c);
                if a > tol.pivot {
                    let q = self.get(i, self.n) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => q < ratio - 1e-12 || (q <= ratio + 1e-12 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        ratio = q;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else { return Ok(Run::Unbounded) };
            if ratio.abs() <= 1e-12 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, c);
            pivots += 1;
            if pivots >= tol.max_pivots {
                return Err(NumericError::IterationLimit(pivots));
            }
        }
    }
}
