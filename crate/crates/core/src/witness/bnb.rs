//! Best-first branch-and-bound for the minimal-witness MILP
//! `min Σσ s.t. x ∈ P, x <= K·σ, σ ∈ {0,1}`.
//!
//! The relaxation of a node with coordinates fixed to zero (`F0`) or one
//! (`F1`) is `|F1| + min Σ_{i free} x_i/K` over `P ∩ {x_i = 0, i ∈ F0}`.
//! Relaxations run in `f64`; every candidate witness is verified exactly.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::time::{Duration, Instant};

use num_traits::Zero;

use super::{dimension, k_bound, polytope_lp, qs_heuristic, subsystem_of_support, Flavor, Method, PolytopeSpec, WitnessResult};
use crate::certificates::{frequencies_from_scheduler, scheduler_from_y};
use crate::error::WitnessError;
use crate::linsys::{build_farkas_system, optimal_policy, reach_probability, solve_lp, FarkasSystem, LpStatus};
use crate::model::{MrScheduler, ReachMdp, Subsystem};
use crate::scalar::Rational;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BnbOptions {
    /// Wall-clock budget; `None` runs to completion.
    pub budget: Option<Duration>,
    /// Cap on evaluated nodes, a deterministic alternative to `budget`.
    pub node_limit: Option<usize>,
}

const SUPPORT_EPS: f64 = 1e-9;
const BOUND_EPS: f64 = 1e-6;

struct Node {
    fixed: Vec<Option<bool>>,
    depth: usize,
    seq: usize,
    relaxation: f64,
    lower: usize,
    x: Vec<f64>,
}

// Smallest bound first, then deepest, then oldest.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .cmp(&self.lower)
            .then(other.relaxation.partial_cmp(&self.relaxation).unwrap_or(Ordering::Equal))
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

struct Incumbent {
    support: Vec<usize>,
    subsystem: Subsystem,
    point: Vec<f64>,
}

struct Search<'a> {
    m: &'a ReachMdp,
    sys: FarkasSystem<f64>,
    spec: &'a PolytopeSpec,
    k: f64,
    incumbent: Incumbent,
    seq: usize,
    evaluated: usize,
}

impl Search<'_> {
    fn cost(&self) -> usize {
        self.incumbent.support.len()
    }

    fn evaluate(&mut self, fixed: Vec<Option<bool>>, depth: usize) -> Option<Node> {
        self.evaluated += 1;
        let n = fixed.len();
        let objective: Vec<f64> = fixed.iter().map(|f| if f.is_none() { 1.0 / self.k } else { 0.0 }).collect();
        let mut lp = polytope_lp(&self.sys, self.spec, objective);
        for (i, f) in fixed.iter().enumerate() {
            if *f == Some(false) {
                lp.set_bounds(i, Some(0.0), Some(0.0));
            }
        }
        let sol = solve_lp(&lp).ok()?;
        if sol.status != LpStatus::Optimal {
            return None;
        }
        let committed = fixed.iter().filter(|f| **f == Some(true)).count();
        let relaxation = committed as f64 + sol.objective_value;
        let lower = (relaxation - BOUND_EPS).ceil().max(0.0) as usize;
        self.offer(&sol.x);
        self.seq += 1;
        debug_assert_eq!(sol.x.len(), n);
        Some(Node { fixed, depth, seq: self.seq, relaxation, lower, x: sol.x })
    }

    /// Tries the support of an LP point as a new incumbent.
    fn offer(&mut self, x: &[f64]) {
        for eps in [SUPPORT_EPS, 0.0] {
            let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > eps).collect();
            if (support.len(), &support) >= (self.cost(), &self.incumbent.support) {
                return;
            }
            let sub = subsystem_of_support(self.m, &self.sys, self.spec.flavor, &support);
            if reach_probability(&sub.mdp, self.spec.flavor.direction()).is_ok_and(|p| p >= self.spec.lambda) {
                self.incumbent = Incumbent { support, subsystem: sub, point: x.to_vec() };
                return;
            }
        }
    }

    fn branch_variable(&self, node: &Node) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, f) in node.fixed.iter().enumerate() {
            if f.is_some() {
                continue;
            }
            let sigma = node.x[i] / self.k;
            let frac = sigma.min(1.0 - sigma);
            if frac > SUPPORT_EPS && best.is_none_or(|(b, _)| frac > b) {
                best = Some((frac, i));
            }
        }
        best.map(|(_, i)| i)
    }
}

/// State-minimal witness for the polytope `spec`. With a budget or node
/// limit the search may stop early; the result then carries the best
/// witness found and bounds on the minimum.
pub fn exact_minimal_witness(m: &ReachMdp, spec: &PolytopeSpec, options: &BnbOptions) -> Result<WitnessResult, WitnessError> {
    let start = Instant::now();
    let direction = spec.flavor.direction();
    if reach_probability(m, direction)? < spec.lambda {
        return Err(WitnessError::Infeasible);
    }
    let sys = build_farkas_system::<f64>(m);
    let n = dimension(&sys, spec.flavor);
    let k = match spec.flavor {
        Flavor::MinNonneg => 1.0,
        // a slightly larger K only weakens the relaxation
        Flavor::Max => k_bound::<f64>(m, spec)? * (1.0 + 1e-6) + 1e-9,
    };
    // the full model is always a witness
    let all: Vec<usize> = (0..n).collect();
    let full = Incumbent { support: all.clone(), subsystem: subsystem_of_support(m, &sys, spec.flavor, &all), point: vec![0.0; n] };
    let mut search = Search { m, sys, spec, k, incumbent: full, seq: 0, evaluated: 0 };
    if let Ok(qs) = qs_heuristic::<f64>(m, spec, 2) {
        let x: Vec<f64> = qs.point.iter().map(crate::scalar::rational_to_f64).collect();
        search.offer(&x);
    }

    let mut heap = BinaryHeap::new();
    if let Some(root) = search.evaluate(vec![None; n], 0) {
        heap.push(root);
    }
    let mut lower = 0usize;
    let mut finished = true;
    while let Some(node) = heap.pop() {
        lower = node.lower;
        if node.lower >= search.cost() {
            break;
        }
        let out_of_time = options.budget.is_some_and(|b| start.elapsed() >= b);
        let out_of_nodes = options.node_limit.is_some_and(|l| search.evaluated >= l);
        if out_of_time || out_of_nodes {
            finished = false;
            break;
        }
        let Some(i) = search.branch_variable(&node) else {
            continue;
        };
        for value in [false, true] {
            let mut fixed = node.fixed.clone();
            fixed[i] = Some(value);
            if let Some(child) = search.evaluate(fixed, node.depth + 1) {
                if child.lower < search.cost() {
                    heap.push(child);
                }
            }
        }
    }
    if finished && heap.is_empty() {
        lower = search.cost();
    }
    let cost = search.cost();
    let optimal = finished && lower >= cost;
    let lower = lower.min(cost);
    finish(m, spec, search.incumbent, optimal, lower)
}

fn finish(m: &ReachMdp, spec: &PolytopeSpec, inc: Incumbent, optimal: bool, lower: usize) -> Result<WitnessResult, WitnessError> {
    let sub = inc.subsystem;
    let direction = spec.flavor.direction();
    let (choice, values) = optimal_policy(&sub.mdp, direction)?;
    let parent_sys = build_farkas_system::<Rational>(m);
    let point: Vec<Rational> = match spec.flavor {
        Flavor::MinNonneg => {
            let mut z = vec![Rational::zero(); parent_sys.cols()];
            for (i, &p) in sub.parent_state_map.iter().enumerate() {
                if let Some(c) = parent_sys.col_of[p] {
                    z[c] = values[i].clone();
                }
            }
            z
        }
        Flavor::Max => {
            let freq = frequencies_from_scheduler(&sub.mdp, &MrScheduler::deterministic(&sub.mdp, &choice))
                .map_err(|e| WitnessError::Internal(e.to_string()))?;
            let mut y = vec![Rational::zero(); parent_sys.rows()];
            for ((si, a), f) in sub.mdp.pairs().into_iter().zip(freq) {
                let pair = (sub.parent_state_map[si], a);
                if sub.kept_pairs.contains(&pair) {
                    let r = parent_sys.row_index.iter().position(|q| *q == pair).expect("kept pairs are parent pairs");
                    y[r] = f;
                }
            }
            y
        }
    };
    let renormalized = match spec.flavor {
        Flavor::Max => {
            let mut seen = BTreeSet::new();
            if inc.support.iter().any(|&r| !seen.insert(parent_sys.row_index[r].0)) {
                let y: Vec<Rational> = inc.point.iter().map(|&v| if v > SUPPORT_EPS { crate::scalar::rationalize(v, crate::scalar::DEFAULT_DENOMINATOR_CAP) } else { Rational::zero() }).collect();
                Some(scheduler_from_y(m, &y).map_err(|e| WitnessError::Internal(e.to_string()))?)
            } else {
                None
            }
        }
        Flavor::MinNonneg => None,
    };
    let probability = values[sub.mdp.initial()].clone();
    let state_count = sub.state_count();
    let bounds = if optimal { (state_count, state_count) } else { (lower.max(1).min(state_count), state_count) };
    Ok(WitnessResult {
        subsystem: sub,
        state_count,
        point,
        method: Method::Exact,
        optimal,
        bounds,
        probability,
        support_sizes: vec![inc.support.len()],
        renormalized,
    })
}
