//! Randomized oracle suites; each panics on the first disagreement.

use std::collections::{BTreeMap, BTreeSet};

use cptmdp::graph::{bsccs, mecs, Mec};
use cptmdp::mc::{absorption_probabilities, classical_cpt_value, induced_prospect, mc_cpt_value};
use cptmdp::mdp::{induced_chain, mdp_cpt_value, Direction};
use cptmdp::mean_payoff::{bscc_mean_payoff, mp_cpt_value};
use cptmdp::model::{
    outcome_vector, validate_objective, Action, MeanPayoffObjective, Model, ModelKind, WeightedReachObjective,
};
use cptmdp::prospect::{cpt, cpt_raw, decision_weights, lipschitz_constant, CptParams, LossRanking, Prospect, Utility, Weight};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

use super::{
    mixed_successors, outcome_probs_by_iteration, random_decision_mdp, random_dist, random_mc, random_mdp, random_strategy,
    rng, FastChain,
};

// Textbook CPT value from outcome-tail probabilities, losses ranked from the worst.
fn tail_formula(params: &CptParams, dist: &BTreeMap<u64, f64>) -> f64 {
    let pts: Vec<(f64, f64)> = dist.iter().map(|(&o, &p)| (f64::from_bits(o), p)).collect();
    let prob = |keep: &dyn Fn(f64) -> bool| pts.iter().filter(|(o, _)| keep(*o)).map(|(_, p)| p).sum::<f64>();
    let mut v = 0.0;
    for &(o, _) in &pts {
        let u = params.utility.eval(o);
        if o > 0.0 {
            let w = &params.weight_gain;
            v += u * (w.eval(prob(&|x| x >= o)) - w.eval(prob(&|x| x > o)));
        } else if o < 0.0 {
            let w = &params.weight_loss;
            v += u * (w.eval(prob(&|x| x <= o)) - w.eval(prob(&|x| x < o)));
        }
    }
    v
}

/// Tail-probability CPT value of random memoryless strategies against the prospect value of the induced chain.
pub fn definition_equivalence(cases: usize) {
    let mut r = rng(11);
    let worst = CptParams::standard().with_loss_ranking(LossRanking::WorstFirst);
    let best = CptParams::standard();
    for case in 0..cases {
        let n = r.gen_range(2..=8);
        let (m, obj) = random_mdp(&mut r, n, 3);
        let sigma = random_strategy(&mut r, &m);
        let chain = induced_chain(&m, &obj, &sigma).unwrap();
        let (_, vobj) = validate_objective(&m, &obj);

        let dist = outcome_probs_by_iteration(&mixed_successors(&m, &sigma), m.initial, &obj);
        let by_tails = tail_formula(&worst, &dist);
        let by_prospect = mc_cpt_value(&chain, &vobj, &worst).unwrap();
        assert!((by_tails - by_prospect).abs() < 1e-9, "case {case}: {by_tails} vs {by_prospect}");
        let classical = classical_cpt_value(&chain, &vobj, &worst).unwrap();
        assert!((classical - by_prospect).abs() < 1e-9, "case {case}");
        let classical = classical_cpt_value(&chain, &vobj, &best).unwrap();
        let by_prospect = mc_cpt_value(&chain, &vobj, &best).unwrap();
        assert!((classical - by_prospect).abs() < 1e-9, "case {case}, best-first");
    }
}

pub struct Sampler {
    pub cum: Vec<Vec<(f64, usize)>>,
    stop: Vec<Option<f64>>,
}

impl Sampler {
    pub fn new(m: &Model, obj: &WeightedReachObjective) -> Sampler {
        let n = m.num_states();
        let mut live: Vec<bool> = (0..n).map(|s| obj.targets.contains_key(&s)).collect();
        loop {
            let before = live.clone();
            for s in 0..n {
                if m.actions[s][0].dist().any(|(t, _)| live[t]) {
                    live[s] = true;
                }
            }
            if live == before {
                break;
            }
        }
        let stop = (0..n)
            .map(|s| match obj.targets.get(&s) {
                Some(&o) => Some(o),
                None if !live[s] => Some(obj.penalty),
                None => None,
            })
            .collect();
        let cum = m
            .actions
            .iter()
            .map(|a| {
                let mut acc = 0.0;
                a[0].dist()
                    .map(|(t, p)| {
                        acc += p;
                        (acc, t)
                    })
                    .collect()
            })
            .collect();
        Sampler { cum, stop }
    }

    pub fn step(&self, r: &mut impl Rng, s: usize) -> usize {
        let u: f64 = r.gen();
        let row = &self.cum[s];
        row.iter().find(|(c, _)| u < *c).unwrap_or(row.last().unwrap()).1
    }

    pub fn run(&self, r: &mut impl Rng, mut s: usize) -> f64 {
        loop {
            if let Some(o) = self.stop[s] {
                return o;
            }
            s = self.step(r, s);
        }
    }
}

/// Simulated outcome frequencies against the induced prospect, 3 standard errors per outcome.
pub fn simulated_prospects(chains: usize, paths: usize) {
    let mut r = rng(14);
    for case in 0..chains {
        let n = r.gen_range(2..=20);
        let (m, obj) = random_mc(&mut r, n);
        let x = induced_prospect(&m, &obj).unwrap().prospect;
        let sampler = Sampler::new(&m, &obj);
        let mut counts = vec![0usize; x.len()];
        for _ in 0..paths {
            let o = sampler.run(&mut r, m.initial);
            let i = x.outcomes().iter().position(|&y| y == o).unwrap();
            counts[i] += 1;
        }
        for (i, &p) in x.probs().iter().enumerate() {
            let freq = counts[i] as f64 / paths as f64;
            let se = (p * (1.0 - p) / paths as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * se + 1e-12, "case {case}, outcome {}: {freq} vs {p}", x.outcomes()[i]);
        }
    }
}

/// Best and worst CPT value over memoryless strategies on a uniform mixing grid.
pub struct Grid {
    pub max: f64,
    pub min: f64,
}

pub fn strategy_grid(m: &Model, obj: &WeightedReachObjective, params: &CptParams, steps: usize) -> Grid {
    let (m, obj) = validate_objective(m, obj);
    let outcomes = outcome_vector(&obj);
    let index = |o: f64| outcomes.iter().position(|&x| x == o).unwrap();
    let chain = FastChain {
        n: m.num_states(),
        target_outcome: (0..m.num_states()).map(|s| obj.targets.get(&s).map(|&o| index(o))).collect(),
        k: outcomes.len(),
    };
    let pen = index(obj.penalty);
    let decisions: Vec<usize> = (0..m.num_states()).filter(|&s| m.actions[s].len() == 2).collect();
    assert!(m.actions.iter().all(|a| a.len() <= 2));
    let mut succ: Vec<Vec<(usize, f64)>> = m.actions.iter().map(|a| a[0].dist().collect()).collect();
    let mut grid = Grid { max: f64::NEG_INFINITY, min: f64::INFINITY };
    let total = (steps + 1).pow(decisions.len() as u32);
    for code in 0..total {
        let mut c = code;
        for &s in &decisions {
            let q = (c % (steps + 1)) as f64 / steps as f64;
            c /= steps + 1;
            let mut row: Vec<(usize, f64)> = m.actions[s][0].dist().map(|(t, p)| (t, q * p)).collect();
            row.extend(m.actions[s][1].dist().map(|(t, p)| (t, (1.0 - q) * p)));
            succ[s] = row;
        }
        let v = cpt_raw(params, &outcomes, &chain.solve(&succ, m.initial, pen));
        grid.max = grid.max.max(v);
        grid.min = grid.min.min(v);
    }
    grid
}

/// Solver values against a 0.01 mixing grid over all memoryless strategies.
pub fn strategy_grid_envelope(mdps: usize) {
    let mut r = rng(22);
    let params = CptParams::standard();
    for case in 0..mdps {
        let n = r.gen_range(3..=6);
        let d = 1 + case % 3;
        let (m, obj) = random_decision_mdp(&mut r, n, d);
        let grid = strategy_grid(&m, &obj, &params, 100);
        let mut values = Vec::new();
        for eps in [0.02, 0.01, 0.005] {
            let res = mdp_cpt_value(&m, &obj, &params, eps, Direction::Max).unwrap();
            assert!(res.value >= grid.max - res.error_bound, "case {case}");
            assert!(res.value <= grid.max + res.error_bound + 0.02, "case {case}");
            // the optimizer itself is accurate to eps on the exact polytope
            assert!(res.value >= grid.max - eps - 1e-9, "case {case}: {} < {}", res.value, grid.max);
            values.push(res.value);
        }
        // halving eps never moves the value away from the best known optimum
        let oracle = values.iter().copied().fold(grid.max, f64::max);
        let gaps: Vec<f64> = values.iter().map(|v| (v - oracle).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12), "case {case}: {gaps:?}");

        let low = mdp_cpt_value(&m, &obj, &params, 0.01, Direction::Min).unwrap();
        assert!(low.value <= grid.min + 0.01 + 1e-9, "case {case}");
        assert!(low.value >= grid.min - low.error_bound - 0.02, "case {case}");
    }
}

type EndComponent = (Vec<usize>, Vec<(usize, usize)>);

// Every maximal end component, by checking each subset of (state, action) pairs.
fn brute_force_mecs(m: &Model) -> BTreeSet<EndComponent> {
    let pairs: Vec<(usize, usize)> =
        (0..m.num_states()).flat_map(|s| (0..m.actions[s].len()).map(move |a| (s, a))).collect();
    assert!(pairs.len() <= 20);
    let mut ecs: Vec<Vec<(usize, usize)>> = Vec::new();
    for mask in 1u32..(1 << pairs.len()) {
        let chosen: Vec<(usize, usize)> = (0..pairs.len()).filter(|i| mask >> i & 1 == 1).map(|i| pairs[i]).collect();
        let states: BTreeSet<usize> = chosen.iter().map(|p| p.0).collect();
        let closed = chosen.iter().all(|&(s, a)| m.actions[s][a].dist().all(|(t, _)| states.contains(&t)));
        if !closed {
            continue;
        }
        let connected = states.iter().all(|&from| {
            let mut seen = BTreeSet::from([from]);
            let mut stack = vec![from];
            while let Some(s) = stack.pop() {
                for &(u, a) in chosen.iter().filter(|p| p.0 == s) {
                    for (t, _) in m.actions[u][a].dist() {
                        if seen.insert(t) {
                            stack.push(t);
                        }
                    }
                }
            }
            seen == states
        });
        if connected {
            ecs.push(chosen);
        }
    }
    ecs.iter()
        .filter(|e| !ecs.iter().any(|f| f.len() > e.len() && e.iter().all(|p| f.contains(p))))
        .map(|e| {
            let states: BTreeSet<usize> = e.iter().map(|p| p.0).collect();
            (states.into_iter().collect(), e.clone())
        })
        .collect()
}

pub fn end_components_by_enumeration(mdps: usize) {
    let mut r = rng(28);
    for case in 0..mdps {
        let n = r.gen_range(1..=5);
        let m = if n == 1 {
            Model { kind: ModelKind::Mdp, states: vec!["s0".into()], initial: 0, actions: vec![vec![Action::self_loop("a", 0)]] }
        } else {
            random_mdp(&mut r, n, 3).0
        };
        let got: BTreeSet<EndComponent> =
            mecs(&m, None).into_iter().map(|Mec { states, actions }| (states, actions)).collect();
        assert_eq!(got, brute_force_mecs(&m), "case {case}");
    }
}

pub fn chain(edges: Vec<Vec<(usize, f64)>>) -> Model {
    Model {
        kind: ModelKind::Mc,
        states: (0..edges.len()).map(|i| format!("s{i}")).collect(),
        initial: 0,
        actions: edges.into_iter().map(|e| vec![Action::new("a", e)]).collect(),
    }
}

// Prospect over bottom components grouped by gain, weighted by their reach probabilities.
fn direct_mean_payoff_value(m: &Model, rewards: &MeanPayoffObjective, params: &CptParams) -> f64 {
    let comps = bsccs(m);
    let gains: Vec<f64> = comps.iter().map(|c| bscc_mean_payoff(m, rewards, c).unwrap()).collect();
    let reach = absorption_probabilities(m, &comps.iter().map(|c| c.states.clone()).collect::<Vec<_>>()).unwrap();
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for (g, p) in gains.into_iter().zip(reach) {
        match groups.iter_mut().find(|(h, _)| (h - g).abs() <= 1e-9) {
            Some(e) => e.1 += p,
            None => groups.push((g, p)),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (o, p): (Vec<f64>, Vec<f64>) = groups.into_iter().unzip();
    cpt(params, &Prospect::new(o, p).unwrap())
}

/// Mean-payoff reduction against the chain-side computation over bottom components.
pub fn mean_payoff_two_paths(chains: usize) {
    let mut r = rng(16);
    let params = CptParams::standard();
    for case in 0..chains {
        let n = r.gen_range(2..=8);
        let edges = (0..n).map(|_| random_dist(&mut r, n, 3)).collect();
        let m = chain(edges);
        let rewards = MeanPayoffObjective { rewards: (0..n).map(|_| r.gen_range(-3..=5) as f64).collect() };
        let direct = direct_mean_payoff_value(&m, &rewards, &params);
        let reduced = mp_cpt_value(&m, &rewards, &params, 0.01, Direction::Max).unwrap();
        assert!((direct - reduced.value).abs() < 1e-8, "case {case}: {direct} vs {}", reduced.value);
    }
}

/// Strictly increasing outcomes drawn from a sign-restricted range.
pub fn outcomes(lo: i32, hi: i32, max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::btree_set(lo..=hi, 1..=max_len).prop_map(|s| s.into_iter().map(|x| x as f64 / 4.0).collect())
}

pub fn distribution(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.001f64..1.0, k).prop_map(|w| {
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect()
    })
}

pub fn sub_distribution(k: usize) -> impl Strategy<Value = Vec<f64>> {
    (distribution(k), 0.0f64..=1.0).prop_map(|(p, s)| p.into_iter().map(|x| x * s).collect())
}

pub fn prospect_with(o: impl Strategy<Value = Vec<f64>>) -> impl Strategy<Value = Prospect> {
    o.prop_flat_map(|o| {
        let k = o.len();
        (Just(o), distribution(k))
    })
    .prop_map(|(o, p)| Prospect::new(o, p).unwrap())
}

/// Increasing piecewise-linear weighting function through (0,0) and (1,1).
pub fn piecewise_weight() -> impl Strategy<Value = Weight> {
    (proptest::collection::btree_set(1u32..100, 0..5), proptest::collection::vec(1u32..100, 6)).prop_map(|(xs, ys)| {
        let xs: Vec<f64> = xs.into_iter().map(|x| x as f64 / 100.0).collect();
        let mut ys: Vec<f64> = ys[..xs.len()].iter().map(|&y| y as f64 / 100.0).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let mut points = vec![[0.0, 0.0]];
        for (x, y) in xs.iter().zip(&ys) {
            points.push([*x, *y]);
        }
        points.push([1.0, 1.0]);
        Weight::Piecewise { points }
    })
}

pub fn piecewise_utility() -> impl Strategy<Value = Utility> {
    (1u32..=20, 1u32..=40).prop_map(|(g, l)| Utility::Piecewise {
        points: vec![[-100.0, -(l as f64) * 10.0], [0.0, 0.0], [100.0, g as f64 * 10.0]],
    })
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn check<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) {
    if let Err(e) = runner(cases).run(&s, f) {
        panic!("{e}");
    }
}

/// Decision weights of all-gain and all-loss prospects sum to one.
pub fn telescoping(cases: u32) {
    let standard = CptParams::standard();
    let worst = standard.clone().with_loss_ranking(LossRanking::WorstFirst);
    check(cases, prospect_with(outcomes(1, 400, 8)), |x| {
        let s: f64 = decision_weights(&standard, &x).iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9);
        Ok(())
    });
    check(cases, prospect_with(outcomes(-400, -1, 8)), |x| {
        for p in [&standard, &worst] {
            let s: f64 = decision_weights(p, &x).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        Ok(())
    });
}

/// More mass on gains never lowers the value; more mass on losses never raises it.
pub fn monotonicity(cases: u32) {
    let standard = CptParams::standard();
    let worst = standard.clone().with_loss_ranking(LossRanking::WorstFirst);
    let grow = |lo, hi| {
        outcomes(lo, hi, 6).prop_flat_map(|o| {
            let k = o.len();
            (Just(o), sub_distribution(k), proptest::collection::vec(0.0f64..=1.0, k))
        })
    };
    check(cases, grow(1, 400), |(o, p, q)| {
        let hi: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a.max(*b)).collect();
        for params in [&standard, &worst] {
            prop_assert!(cpt_raw(params, &o, &hi) >= cpt_raw(params, &o, &p) - 1e-12);
        }
        Ok(())
    });
    check(cases, grow(-400, -1), |(o, p, q)| {
        let hi: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a.max(*b)).collect();
        prop_assert!(cpt_raw(&worst, &o, &hi) <= cpt_raw(&worst, &o, &p) + 1e-12);
        Ok(())
    });
}

/// |cpt(p) - cpt(q)| <= L |p - q| for piecewise-linear specs.
pub fn lipschitz(cases: u32) {
    let inputs = (
        piecewise_utility(),
        piecewise_weight(),
        piecewise_weight(),
        any::<bool>(),
        outcomes(-400, 400, 6).prop_flat_map(|o| {
            let k = o.len();
            (Just(o), distribution(k), proptest::collection::vec(-1.0f64..=1.0, k))
        }),
        1e-6f64..0.2,
    );
    check(cases, inputs, |(u, wg, wl, worst, (o, p, d), eps)| {
        let mut params = CptParams::new(u, wg, wl).unwrap();
        if worst {
            params = params.with_loss_ranking(LossRanking::WorstFirst);
        }
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let q: Vec<f64> = p.iter().zip(&d).map(|(a, b)| (a + eps * b / norm).clamp(0.0, 1.0)).collect();
        let dist = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let l = lipschitz_constant(&params, &o);
        let gap = (cpt_raw(&params, &o, &p) - cpt_raw(&params, &o, &q)).abs();
        prop_assert!(gap <= dist * l + 1e-9, "gap {} > {} * {}", gap, dist, l);
        Ok(())
    });
}
