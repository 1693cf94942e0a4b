//! Affine frames and an incremental convex hull (beneath-beyond).

use std::collections::BTreeMap;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// Removes the components of `v` along the orthonormal `basis`, twice for stability.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

/// An origin plus an orthonormal basis of directions.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFrame {
    pub origin: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl AffineFrame {
    pub fn new(origin: Vec<f64>) -> Self {
        AffineFrame { origin, basis: Vec::new() }
    }

    /// Frame of the affine hull of `points`, adding the farthest point first.
    pub fn from_points(points: &[Vec<f64>], tol: f64) -> Self {
        let mut frame = AffineFrame::new(points[0].clone());
        loop {
            let best = points
                .iter()
                .map(|p| frame.distance(p))
                .enumerate()
                .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
            if best.1 <= tol || !frame.extend(&points[best.0], tol) {
                return frame;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient(&self) -> usize {
        self.origin.len()
    }

    fn residual(&self, p: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = p.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        orthogonalize(&mut r, &self.basis);
        r
    }

    /// Euclidean distance from `p` to the affine hull.
    pub fn distance(&self, p: &[f64]) -> f64 {
        norm(&self.residual(p))
    }

    /// Adds the direction of `p` if it lies off the hull by more than `tol`.
    pub fn extend(&mut self, p: &[f64], tol: f64) -> bool {
        let mut r = self.residual(p);
        let n = norm(&r);
        if n <= tol {
            return false;
        }
        r.iter_mut().for_each(|x| *x /= n);
        self.basis.push(r);
        true
    }

    pub fn to_local(&self, p: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = p.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        self.basis.iter().map(|b| dot(&d, b)).collect()
    }

    pub fn to_global(&self, y: &[f64]) -> Vec<f64> {
        let mut p = self.origin.clone();
        for (c, b) in y.iter().zip(&self.basis) {
            for (x, v) in p.iter_mut().zip(b) {
                *x += c * v;
            }
        }
        p
    }

    /// Global direction of a local vector.
    pub fn direction(&self, y: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.ambient()];
        for (c, b) in y.iter().zip(&self.basis) {
            for (x, v) in p.iter_mut().zip(b) {
                *x += c * v;
            }
        }
        p
    }

    /// Orthonormal basis of the orthogonal complement of the directions.
    pub fn complement(&self) -> Vec<Vec<f64>> {
        let k = self.ambient();
        let mut all = self.basis.clone();
        let mut out = Vec::new();
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            orthogonalize(&mut e, &all);
            let n = norm(&e);
            if n > 1e-8 {
                e.iter_mut().for_each(|x| *x /= n);
                all.push(e.clone());
                out.push(e);
            }
            if all.len() == k {
                break;
            }
        }
        out
    }
}

/// Simplicial facet: outward unit normal, offset and vertex indices (sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub verts: Vec<usize>,
}

impl Facet {
    pub fn height(&self, p: &[f64]) -> f64 {
        dot(&self.normal, p) - self.offset
    }
}

/// Convex hull of full-dimensional points in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub facets: Vec<Facet>,
    interior: Vec<f64>,
    tol: f64,
}

impl Hull {
    /// None when the points do not span R^d.
    pub fn new(points: &[Vec<f64>], dim: usize, tol: f64) -> Option<Hull> {
        if points.is_empty() {
            return None;
        }
        let mut hull = Hull { dim, points: points.to_vec(), facets: Vec::new(), interior: vec![0.0; dim], tol };
        if dim == 0 {
            return Some(hull);
        }
        let mut frame = AffineFrame::new(points[0].clone());
        let mut simplex = vec![0];
        while simplex.len() <= dim {
            let (i, d) = points
                .iter()
                .map(|p| frame.distance(p))
                .enumerate()
                .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
            if d <= tol {
                return None;
            }
            frame.extend(&points[i], 0.0);
            simplex.push(i);
        }
        for &i in &simplex {
            for (c, x) in hull.interior.iter_mut().zip(&points[i]) {
                *c += x / (dim + 1) as f64;
            }
        }
        for skip in 0..simplex.len() {
            let mut verts: Vec<usize> = simplex.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, &v)| v).collect();
            verts.sort_unstable();
            let f = hull.make_facet(verts);
            hull.facets.push(f);
        }
        for i in 0..points.len() {
            if !simplex.contains(&i) {
                hull.insert_index(i);
            }
        }
        Some(hull)
    }

    fn make_facet(&self, verts: Vec<usize>) -> Facet {
        let d = self.dim;
        let v0 = &self.points[verts[0]];
        let mut q: Vec<Vec<f64>> = Vec::new();
        for &v in &verts[1..] {
            let mut e: Vec<f64> = self.points[v].iter().zip(v0).map(|(a, b)| a - b).collect();
            orthogonalize(&mut e, &q);
            let n = norm(&e);
            if n > 0.0 {
                e.iter_mut().for_each(|x| *x /= n);
                q.push(e);
            }
        }
        let mut best = vec![0.0; d];
        let mut best_norm = -1.0;
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            orthogonalize(&mut e, &q);
            let n = norm(&e);
            if n > best_norm {
                best_norm = n;
                best = e;
            }
        }
        let mut normal: Vec<f64> = best.iter().map(|x| x / best_norm).collect();
        let mean = |n: &[f64]| verts.iter().map(|&v| dot(n, &self.points[v])).sum::<f64>() / verts.len() as f64;
        let mut offset = mean(&normal);
        if dot(&normal, &self.interior) > offset {
            normal.iter_mut().for_each(|x| *x = -*x);
            offset = -offset;
        }
        Facet { normal, offset, verts }
    }

    fn insert_index(&mut self, pi: usize) -> bool {
        let p = self.points[pi].clone();
        let visible: Vec<bool> = self.facets.iter().map(|f| f.height(&p) > self.tol).collect();
        if !visible.iter().any(|&v| v) {
            return false;
        }
        let mut ridges: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for (f, _) in self.facets.iter().zip(&visible).filter(|(_, &v)| v) {
            for skip in 0..f.verts.len() {
                let r: Vec<usize> = f.verts.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, &v)| v).collect();
                *ridges.entry(r).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<Facet> = self.facets.drain(..).zip(visible).filter(|(_, v)| !v).map(|(f, _)| f).collect();
        for (r, count) in ridges {
            if count == 1 {
                let mut verts = r;
                verts.push(pi);
                verts.sort_unstable();
                kept.push(self.make_facet(verts));
            }
        }
        self.facets = kept;
        true
    }

    /// Adds a point; false if it was already inside.
    pub fn insert(&mut self, p: Vec<f64>) -> bool {
        self.points.push(p);
        let i = self.points.len() - 1;
        let changed = self.insert_index(i);
        if !changed {
            self.points.pop();
        }
        changed
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.facets.iter().all(|f| f.height(p) <= tol)
    }

    /// Indices of points on some facet.
    pub fn vertices(&self) -> Vec<usize> {
        if self.dim == 0 {
            return vec![0];
        }
        let mut v: Vec<usize> = self.facets.iter().flat_map(|f| f.verts.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Facet hyperplanes with near-duplicates merged.
    pub fn planes(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        for f in &self.facets {
            let dup = out.iter().any(|(n, b)| {
                (b - f.offset).abs() < 1e-9 && n.iter().zip(&f.normal).all(|(x, y)| (x - y).abs() < 1e-9)
            });
            if !dup {
                out.push((f.normal.clone(), f.offset));
            }
        }
        out
    }
}
