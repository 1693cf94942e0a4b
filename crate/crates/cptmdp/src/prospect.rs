//! CPT and expected-utility arithmetic on finite prospects.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for probability comparisons.
pub const PROB_TOL: f64 = 1e-9;
/// Probabilities within this of 0 or 1 are snapped to 0 or 1 before weighting.
pub const CLAMP_EPS: f64 = 1e-12;
/// Grid size used for estimated weight Lipschitz constants.
pub const LIP_GRID_POINTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProspectError {
    #[error("invalid prospect: {0}")]
    InvalidProspect(String),
    #[error("invalid CPT parameters: {0}")]
    InvalidParams(String),
    #[error("probability {0} outside [0,1]")]
    Domain(f64),
}

/// A finite lottery: strictly increasing outcomes with their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prospect {
    outcomes: Vec<f64>,
    probs: Vec<f64>,
    #[serde(skip)]
    partial: bool,
}

impl Prospect {
    /// Builds a full distribution. Outcomes are sorted and equal outcomes merged.
    pub fn new(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self, ProspectError> {
        let p = Self::normalize(outcomes, probs)?;
        let total: f64 = p.probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(ProspectError::InvalidProspect(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(p)
    }

    /// Builds a sub-distribution (total mass need not be 1).
    pub fn partial(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self, ProspectError> {
        let mut p = Self::normalize(outcomes, probs)?;
        p.partial = true;
        Ok(p)
    }

    fn normalize(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self, ProspectError> {
        if outcomes.is_empty() {
            return Err(ProspectError::InvalidProspect("no outcomes".into()));
        }
        if outcomes.len() != probs.len() {
            return Err(ProspectError::InvalidProspect(format!(
                "{} outcomes but {} probabilities",
                outcomes.len(),
                probs.len()
            )));
        }
        let mut pairs = Vec::with_capacity(outcomes.len());
        for (&o, &p) in outcomes.iter().zip(&probs) {
            if !o.is_finite() {
                return Err(ProspectError::InvalidProspect(format!("outcome {o}")));
            }
            if !(p >= -PROB_TOL && p <= 1.0 + PROB_TOL) {
                return Err(ProspectError::InvalidProspect(format!("probability {p}")));
            }
            pairs.push((o, p.clamp(0.0, 1.0)));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut outs: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut ps: Vec<f64> = Vec::with_capacity(pairs.len());
        for (o, p) in pairs {
            if outs.last() == Some(&o) {
                *ps.last_mut().unwrap() += p;
            } else {
                outs.push(o);
                ps.push(p);
            }
        }
        Ok(Prospect { outcomes: outs, probs: ps, partial: false })
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// True for sub-distributions built with [`Prospect::partial`].
    pub fn is_partial(&self) -> bool {
        self.partial
    }
}

/// Utility function u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Utility {
    TkPower { alpha: f64, beta: f64, lambda: f64 },
    Identity,
    Piecewise { points: Vec<[f64; 2]> },
}

impl Utility {
    pub fn eval(&self, o: f64) -> f64 {
        match self {
            Utility::TkPower { alpha, beta, lambda } => {
                if o >= 0.0 {
                    o.powf(*alpha)
                } else {
                    -lambda * (-o).powf(*beta)
                }
            }
            Utility::Identity => o,
            Utility::Piecewise { points } => interpolate(points, o),
        }
    }

    pub fn validate(&self) -> Result<(), ProspectError> {
        match self {
            Utility::TkPower { alpha, beta, lambda } => {
                let ok = *alpha > 0.0 && *alpha <= 1.0 && *beta > 0.0 && *beta <= 1.0 && *lambda >= 1.0;
                if !ok {
                    return Err(ProspectError::InvalidParams(format!(
                        "tk-power utility needs 0<alpha<=1, 0<beta<=1, lambda>=1 (got {alpha}, {beta}, {lambda})"
                    )));
                }
                Ok(())
            }
            Utility::Identity => Ok(()),
            Utility::Piecewise { points } => {
                check_breakpoints(points, "utility")?;
                if !points.iter().any(|p| p[0] == 0.0 && p[1] == 0.0) {
                    return Err(ProspectError::InvalidParams(
                        "piecewise utility must pass through (0,0)".into(),
                    ));
                }
                if points.windows(2).any(|w| w[1][1] <= w[0][1]) {
                    return Err(ProspectError::InvalidParams(
                        "piecewise utility must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Probability weighting function w.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Weight {
    Tk { exponent: f64 },
    Identity,
    Piecewise { points: Vec<[f64; 2]> },
}

/// Curvature profile of a weighting function, used by the optimizer's bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Linear,
    /// Concave on [0, x], convex on [x, 1].
    ConcaveConvex(f64),
    /// Convex on [0, x], concave on [x, 1].
    ConvexConcave(f64),
    Piecewise,
}

impl Weight {
    /// Evaluates w at p, clamping p into [0,1]. Callers that need the domain check use [`weight`].
    pub fn eval(&self, p: f64) -> f64 {
        let p = clamp_prob(p);
        match self {
            Weight::Tk { exponent } => tk_weight(*exponent, p),
            Weight::Identity => p,
            Weight::Piecewise { points } => interpolate(points, p).clamp(0.0, 1.0),
        }
    }

    /// Derivative of w; infinite where the TK form is singular.
    pub fn derivative(&self, p: f64) -> f64 {
        match self {
            Weight::Tk { exponent } => tk_derivative(*exponent, p),
            Weight::Identity => 1.0,
            Weight::Piecewise { points } => {
                let i = segment_index(points, p);
                let (a, b) = (points[i], points[i + 1]);
                (b[1] - a[1]) / (b[0] - a[0])
            }
        }
    }

    pub fn validate(&self) -> Result<(), ProspectError> {
        match self {
            Weight::Tk { exponent } => {
                if !(*exponent > 0.279) || !exponent.is_finite() {
                    return Err(ProspectError::InvalidParams(format!(
                        "tk weight exponent must exceed 0.279 (got {exponent})"
                    )));
                }
            }
            Weight::Identity => {}
            Weight::Piecewise { points } => {
                check_breakpoints(points, "weight")?;
                let first = points[0];
                let last = points[points.len() - 1];
                if first != [0.0, 0.0] || last != [1.0, 1.0] {
                    return Err(ProspectError::InvalidParams(
                        "piecewise weight must start at (0,0) and end at (1,1)".into(),
                    ));
                }
                if points.iter().any(|p| !(0.0..=1.0).contains(&p[1])) {
                    return Err(ProspectError::InvalidParams(
                        "piecewise weight leaves the unit square".into(),
                    ));
                }
            }
        }
        // increasing on a sampled grid
        let n = 1000;
        let mut prev = self.eval(0.0);
        if prev.abs() > 1e-12 || (self.eval(1.0) - 1.0).abs() > 1e-12 {
            return Err(ProspectError::InvalidParams("weight must fix 0 and 1".into()));
        }
        for i in 1..=n {
            let v = self.eval(i as f64 / n as f64);
            if v < prev - 1e-12 {
                return Err(ProspectError::InvalidParams("weight is not increasing".into()));
            }
            prev = v;
        }
        Ok(())
    }

    /// Exact Lipschitz constant when one exists in closed form.
    pub fn exact_lipschitz(&self) -> Option<f64> {
        match self {
            Weight::Tk { exponent } if *exponent == 1.0 => Some(1.0),
            Weight::Tk { .. } => None,
            Weight::Identity => Some(1.0),
            Weight::Piecewise { points } => Some(
                points
                    .windows(2)
                    .map(|w| ((w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).abs())
                    .fold(0.0, f64::max),
            ),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Weight::Identity => Shape::Linear,
            Weight::Tk { exponent } if *exponent == 1.0 => Shape::Linear,
            Weight::Tk { exponent } => {
                // w' is unimodal: a minimum for exponent < 1, a maximum above 1
                let g = *exponent;
                let sgn = if g < 1.0 { 1.0 } else { -1.0 };
                let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
                let phi = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..200 {
                    let m1 = hi - phi * (hi - lo);
                    let m2 = lo + phi * (hi - lo);
                    if sgn * tk_derivative(g, m1) < sgn * tk_derivative(g, m2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let x = 0.5 * (lo + hi);
                if g < 1.0 {
                    Shape::ConcaveConvex(x)
                } else {
                    Shape::ConvexConcave(x)
                }
            }
            Weight::Piecewise { .. } => Shape::Piecewise,
        }
    }
}

fn tk_weight(g: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let a = p.powf(g);
    let b = (1.0 - p).powf(g);
    a / (a + b).powf(1.0 / g)
}

fn tk_derivative(g: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if g < 1.0 {
            f64::INFINITY
        } else if g == 1.0 {
            1.0
        } else {
            0.0
        };
    }
    if x >= 1.0 {
        return if g < 1.0 {
            f64::INFINITY
        } else if g == 1.0 {
            1.0
        } else {
            g - 1.0
        };
    }
    let xa = x.powf(g - 1.0);
    let xb = (1.0 - x).powf(g - 1.0);
    let s = x.powf(g) + (1.0 - x).powf(g);
    s.powf(-1.0 / g) * (g * xa - x.powf(g) * (xa - xb) / s)
}

fn check_breakpoints(points: &[[f64; 2]], what: &str) -> Result<(), ProspectError> {
    if points.len() < 2 {
        return Err(ProspectError::InvalidParams(format!(
            "piecewise {what} needs at least two points"
        )));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(ProspectError::InvalidParams(format!("piecewise {what} has non-finite points")));
    }
    if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(ProspectError::InvalidParams(format!(
            "piecewise {what} breakpoints must be strictly increasing in x"
        )));
    }
    Ok(())
}

fn segment_index(points: &[[f64; 2]], x: f64) -> usize {
    let n = points.len();
    let mut i = points.partition_point(|p| p[0] <= x);
    i = i.saturating_sub(1);
    i.min(n - 2)
}

fn interpolate(points: &[[f64; 2]], x: f64) -> f64 {
    let i = segment_index(points, x);
    let (a, b) = (points[i], points[i + 1]);
    a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
}

/// How cumulative probability is ranked for non-positive outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossRanking {
    /// Cumulate from the best non-positive outcome downwards, zero outcomes included.
    #[default]
    BestFirst,
    /// Cumulate from the worst outcome upwards (probability of strictly worse outcomes).
    WorstFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipSource {
    UserSupplied,
    GridEstimated,
    Exact,
}

/// Utility, weighting functions and their Lipschitz constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CptParams {
    pub utility: Utility,
    pub weight_gain: Weight,
    pub weight_loss: Weight,
    pub lip_gain: f64,
    pub lip_loss: f64,
    pub lip_source: LipSource,
    pub loss_ranking: LossRanking,
}

impl CptParams {
    /// Validates the specs and derives weight Lipschitz constants.
    pub fn new(utility: Utility, weight_gain: Weight, weight_loss: Weight) -> Result<Self, ProspectError> {
        utility.validate()?;
        weight_gain.validate()?;
        weight_loss.validate()?;
        let (lg, eg) = derive_lipschitz(&weight_gain);
        let (ll, el) = derive_lipschitz(&weight_loss);
        Ok(CptParams {
            utility,
            weight_gain,
            weight_loss,
            lip_gain: lg,
            lip_loss: ll,
            lip_source: if eg && el { LipSource::Exact } else { LipSource::GridEstimated },
            loss_ranking: LossRanking::default(),
        })
    }

    /// alpha = beta = 0.88, lambda = 2.25, gamma = 0.61, delta = 0.69.
    pub fn standard() -> Self {
        static STANDARD: OnceLock<CptParams> = OnceLock::new();
        STANDARD
            .get_or_init(|| {
                Self::new(
                    Utility::TkPower { alpha: 0.88, beta: 0.88, lambda: 2.25 },
                    Weight::Tk { exponent: 0.61 },
                    Weight::Tk { exponent: 0.69 },
                )
                .expect("standard parameters are valid")
            })
            .clone()
    }

    /// Identity utility and weights; CPT collapses to the expectation.
    pub fn identity() -> Self {
        Self::new(Utility::Identity, Weight::Identity, Weight::Identity).expect("valid")
    }

    /// Same utility with identity weights.
    pub fn expected_utility(&self) -> Self {
        CptParams {
            utility: self.utility.clone(),
            weight_gain: Weight::Identity,
            weight_loss: Weight::Identity,
            lip_gain: 1.0,
            lip_loss: 1.0,
            lip_source: LipSource::Exact,
            loss_ranking: self.loss_ranking,
        }
    }

    pub fn with_lipschitz(mut self, gain: f64, loss: f64) -> Result<Self, ProspectError> {
        if !(gain >= 0.0 && loss >= 0.0 && gain.is_finite() && loss.is_finite()) {
            return Err(ProspectError::InvalidParams("Lipschitz constants must be finite and >= 0".into()));
        }
        self.lip_gain = gain;
        self.lip_loss = loss;
        self.lip_source = LipSource::UserSupplied;
        Ok(self)
    }

    pub fn with_loss_ranking(mut self, r: LossRanking) -> Self {
        self.loss_ranking = r;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ProspectError> {
        let raw: ParamsJson = serde_json::from_str(text)
            .map_err(|e| ProspectError::InvalidParams(format!("params JSON: {e}")))?;
        let mut p = CptParams::new(raw.utility, raw.weight_gain, raw.weight_loss)?;
        match (raw.lip_gain, raw.lip_loss) {
            (None, None) => {}
            (g, l) => {
                let g = g.unwrap_or(p.lip_gain);
                let l = l.unwrap_or(p.lip_loss);
                p = p.with_lipschitz(g, l)?;
            }
        }
        if let Some(r) = raw.loss_ranking {
            p.loss_ranking = r;
        }
        Ok(p)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let user = self.lip_source == LipSource::UserSupplied;
        let raw = ParamsJson {
            utility: self.utility.clone(),
            weight_gain: self.weight_gain.clone(),
            weight_loss: self.weight_loss.clone(),
            lip_gain: user.then_some(self.lip_gain),
            lip_loss: user.then_some(self.lip_loss),
            loss_ranking: Some(self.loss_ranking),
        };
        serde_json::to_value(raw).expect("params serialize")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsJson {
    utility: Utility,
    weight_gain: Weight,
    weight_loss: Weight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lip_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lip_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss_ranking: Option<LossRanking>,
}

fn derive_lipschitz(w: &Weight) -> (f64, bool) {
    match w.exact_lipschitz() {
        Some(l) => (l, true),
        None => (grid_estimate_weight_lipschitz(w, LIP_GRID_POINTS), false),
    }
}

pub fn utility(params: &CptParams, o: f64) -> f64 {
    params.utility.eval(o)
}

/// w(p) with a domain check.
pub fn weight(spec: &Weight, p: f64) -> Result<f64, ProspectError> {
    if !(p >= -1e-12 && p <= 1.0 + 1e-12) {
        return Err(ProspectError::Domain(p));
    }
    Ok(spec.eval(p))
}

fn clamp_prob(p: f64) -> f64 {
    if p <= CLAMP_EPS {
        0.0
    } else if p >= 1.0 - CLAMP_EPS {
        1.0
    } else {
        p
    }
}

/// Rank-dependent decision weights, one per outcome.
pub fn decision_weights(params: &CptParams, x: &Prospect) -> Vec<f64> {
    decision_weights_raw(params, x.outcomes(), x.probs())
}

pub(crate) fn decision_weights_raw(params: &CptParams, outcomes: &[f64], probs: &[f64]) -> Vec<f64> {
    let k = outcomes.len();
    let p: Vec<f64> = probs.iter().map(|&q| clamp_prob(q)).collect();
    let mut pi = vec![0.0; k];
    // gains: cumulate from the top
    let mut acc = 0.0;
    for i in (0..k).rev() {
        if outcomes[i] > 0.0 {
            let hi = (acc + p[i]).min(1.0);
            pi[i] = params.weight_gain.eval(hi) - params.weight_gain.eval(acc);
            acc = hi;
        }
    }
    match params.loss_ranking {
        LossRanking::BestFirst => {
            let mut acc = 0.0;
            for i in (0..k).rev() {
                if outcomes[i] <= 0.0 {
                    let hi = (acc + p[i]).min(1.0);
                    if outcomes[i] < 0.0 {
                        pi[i] = params.weight_loss.eval(hi) - params.weight_loss.eval(acc);
                    }
                    acc = hi;
                }
            }
        }
        LossRanking::WorstFirst => {
            let mut acc = 0.0;
            for i in 0..k {
                if outcomes[i] < 0.0 {
                    let hi = (acc + p[i]).min(1.0);
                    pi[i] = params.weight_loss.eval(hi) - params.weight_loss.eval(acc);
                    acc = hi;
                }
            }
        }
    }
    pi
}

/// The CPT value of a prospect.
pub fn cpt(params: &CptParams, x: &Prospect) -> f64 {
    cpt_raw(params, x.outcomes(), x.probs())
}

/// CPT on raw slices; outcomes must be strictly increasing.
pub fn cpt_raw(params: &CptParams, outcomes: &[f64], probs: &[f64]) -> f64 {
    let pi = decision_weights_raw(params, outcomes, probs);
    outcomes
        .iter()
        .zip(&pi)
        .map(|(&o, &w)| if w == 0.0 { 0.0 } else { params.utility.eval(o) * w })
        .sum()
}

/// Expected utility.
pub fn eu(params: &CptParams, x: &Prospect) -> f64 {
    x.outcomes()
        .iter()
        .zip(x.probs())
        .map(|(&o, &p)| params.utility.eval(o) * p)
        .sum()
}

/// L = u* · max(L_w+, L_w-) · (2k² + k).
pub fn lipschitz_constant(params: &CptParams, outcomes: &[f64]) -> f64 {
    let k = outcomes.len() as f64;
    let ustar = outcomes
        .iter()
        .map(|&o| params.utility.eval(o).abs())
        .fold(0.0, f64::max);
    ustar * params.lip_gain.max(params.lip_loss) * (2.0 * k * k + k)
}

/// Largest slope between adjacent points of a uniform grid on [0,1].
pub fn grid_estimate_weight_lipschitz(spec: &Weight, n_points: usize) -> f64 {
    let n = n_points.max(2);
    let h = 1.0 / (n - 1) as f64;
    let mut prev = spec.eval(0.0);
    let mut best: f64 = 0.0;
    for i in 1..n {
        let x = if i == n - 1 { 1.0 } else { i as f64 * h };
        let v = spec.eval(x);
        best = best.max(((v - prev) / h).abs());
        prev = v;
    }
    best
}

/// One term `coef · w(Σ_{i ∈ members} p_i)` of the rank-dependent sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoquetTerm {
    pub coef: f64,
    pub gain: bool,
    pub members: Vec<usize>,
}

/// cpt written as a signed sum of weighted cumulative probabilities (Abel summation).
#[derive(Debug, Clone)]
pub struct ChoquetForm {
    pub terms: Vec<ChoquetTerm>,
}

impl ChoquetForm {
    pub fn new(params: &CptParams, outcomes: &[f64]) -> Self {
        let k = outcomes.len();
        let u: Vec<f64> = outcomes.iter().map(|&o| params.utility.eval(o)).collect();
        let mut terms = Vec::new();
        let gains: Vec<usize> = (0..k).rev().filter(|&i| outcomes[i] > 0.0).collect();
        for (j, &i) in gains.iter().enumerate() {
            let next = gains.get(j + 1).map_or(0.0, |&n| u[n]);
            terms.push(ChoquetTerm { coef: u[i] - next, gain: true, members: gains[..=j].to_vec() });
        }
        let order: Vec<usize> = match params.loss_ranking {
            LossRanking::BestFirst => (0..k).rev().filter(|&i| outcomes[i] <= 0.0).collect(),
            LossRanking::WorstFirst => (0..k).filter(|&i| outcomes[i] < 0.0).collect(),
        };
        for (j, &i) in order.iter().enumerate() {
            let next = order.get(j + 1).map_or(0.0, |&n| u[n]);
            let coef = u[i] - next;
            if coef != 0.0 {
                terms.push(ChoquetTerm { coef, gain: false, members: order[..=j].to_vec() });
            }
        }
        ChoquetForm { terms }
    }

    pub fn eval(&self, params: &CptParams, p: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let l: f64 = t.members.iter().map(|&i| clamp_prob(p[i])).sum();
                let w = if t.gain { &params.weight_gain } else { &params.weight_loss };
                t.coef * w.eval(l)
            })
            .sum()
    }
}

/// Bound on how far `w` rises above (`above = true`) or falls below its secant on [lo, hi].
pub fn secant_gap(w: &Weight, shape: Shape, lo: f64, hi: f64, above: bool) -> f64 {
    if hi - lo <= 0.0 {
        return 0.0;
    }
    let (wl, wh) = (w.eval(lo), w.eval(hi));
    let s = (wh - wl) / (hi - lo);
    let sign = if above { 1.0 } else { -1.0 };
    let gap = |x: f64| sign * (w.eval(x) - wl - s * (x - lo));
    let dgap = |x: f64| sign * (w.derivative(x) - s);
    let raw = match shape {
        Shape::Linear => 0.0,
        Shape::Piecewise => match w {
            Weight::Piecewise { points } => points
                .iter()
                .filter(|p| p[0] > lo && p[0] < hi)
                .map(|p| gap(p[0]))
                .fold(0.0, f64::max),
            _ => 0.0,
        },
        Shape::ConcaveConvex(c) | Shape::ConvexConcave(c) => {
            // the gap is concave on the region where `sign·w` is concave; elsewhere its max is at an end
            let concave_first = matches!(shape, Shape::ConcaveConvex(_)) == above;
            let (a, b) = if concave_first { (lo, hi.min(c)) } else { (lo.max(c), hi) };
            if a < b {
                tangent_bound(gap(a), gap(b), dgap(a), dgap(b), a, b).max(0.0)
            } else {
                0.0
            }
        }
    };
    raw * (1.0 + 1e-9) + 1e-12
}

// Upper bound for a concave function on [a, b] from end values and slopes.
fn tangent_bound(fa: f64, fb: f64, da: f64, db: f64, a: f64, b: f64) -> f64 {
    if da <= 0.0 {
        return fa;
    }
    if db >= 0.0 {
        return fb;
    }
    if da.is_infinite() {
        return fb - db * (b - a);
    }
    if db.is_infinite() {
        return fa + da * (b - a);
    }
    let x = (fb - fa + da * a - db * b) / (da - db);
    let x = x.clamp(a, b);
    (fa + da * (x - a)).max(fa).max(fb)
}
