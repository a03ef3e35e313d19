//! The clique reduction for the witness problem, brute-force oracles used
//! as ground truth by the tests, and seeded random model generators.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{OracleError, ParseError};
use crate::linsys::reach_probability;
use crate::model::{restrict, restrict_transitions, Direction, ModelBuilder, ModelKind, ReachMdp, Selection, Subsystem};
use crate::scalar::{rat, rational_to_f64, Rational};

pub const MAX_ORACLE_STATES: usize = 22;
pub const MAX_ORACLE_TRANSITIONS: usize = 20;
pub const MAX_CLIQUE_VERTICES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    vertex_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl UndirectedGraph {
    /// Edges are normalized to `(min, max)`; self-loops, duplicates and
    /// out-of-range endpoints are errors.
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, OracleError> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(OracleError::Parameters(format!("self-loop at {u}")));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(OracleError::Parameters(format!("edge {u} {v} outside 0..{vertex_count}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(OracleError::Parameters(format!("duplicate edge {u} {v}")));
            }
        }
        Ok(UndirectedGraph { vertex_count, edges: set })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        UndirectedGraph::new(n, edges).expect("complete graph is simple")
    }

    /// `graph <n>` followed by one `u v` line per edge.
    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or_else(|| ParseError::syntax(1, "empty graph file"))?;
        let n = header
            .strip_prefix("graph")
            .and_then(|r| r.trim().parse::<usize>().ok())
            .ok_or_else(|| ParseError::syntax(ln, "expected `graph <n>`"))?;
        let mut edges = Vec::new();
        for (ln, line) in lines {
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| ParseError::syntax(ln, format!("bad vertex `{x}`"))))
                .collect::<Result<_, _>>()?;
            if nums.len() != 2 {
                return Err(ParseError::syntax(ln, "expected `u v`").into());
            }
            edges.push((nums[0], nums[1]));
        }
        UndirectedGraph::new(n, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("graph {}\n", self.vertex_count);
        for (u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

/// The witness-problem instance of a clique question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueInstance {
    pub model: ReachMdp,
    pub lambda: Rational,
    /// Bound on the witness state count, goal, fail and the initial state
    /// included.
    pub k_prime: usize,
}

/// Builds the acyclic DTMC `s0 -> v -> {v,w} -> goal`. States are numbered
/// `s0 = 0`, vertices `1..=n`, edges in ascending order, then goal and fail.
/// `g` has a `k`-clique iff the chain has a witness for `Pr >= k(k-1)/n²`
/// with at most `k + k(k-1)/2 + 3` states.
pub fn clique_to_witness_instance(g: &UndirectedGraph, k: usize) -> Result<CliqueInstance, OracleError> {
    let n = g.vertex_count();
    if k < 3 {
        return Err(OracleError::Parameters(format!("k = {k} must be at least 3")));
    }
    if n < k {
        return Err(OracleError::Parameters(format!("graph has {n} < k = {k} vertices")));
    }
    let edges: Vec<(usize, usize)> = g.edges().iter().copied().collect();
    let goal = n + edges.len() + 1;
    let fail = goal + 1;
    let mut b = ModelBuilder::new(ModelKind::Dtmc, fail + 1, 0, goal, fail);
    b.set_label(0, "s0").set_label(goal, "goal").set_label(fail, "fail");
    let inv_n = rat(1, n as i64);
    for v in 0..n {
        b.set_label(1 + v, format!("v{v}"));
        b.accumulate(0, "-", 1 + v, inv_n.clone());
    }
    let mut degree = vec![0i64; n];
    for (e, &(u, v)) in edges.iter().enumerate() {
        let state = n + 1 + e;
        b.set_label(state, format!("e{u}_{v}"));
        b.accumulate(1 + u, "-", state, inv_n.clone());
        b.accumulate(1 + v, "-", state, inv_n.clone());
        b.accumulate(state, "-", goal, Rational::one());
        degree[u] += 1;
        degree[v] += 1;
    }
    for (v, d) in degree.iter().enumerate() {
        let rest = Rational::one() - rat(*d, n as i64);
        if !rest.is_zero() {
            b.accumulate(1 + v, "-", fail, rest);
        }
    }
    let model = b.build().map_err(|e| OracleError::Parameters(e.to_string()))?;
    let kk = k as i64 * (k as i64 - 1);
    Ok(CliqueInstance { model, lambda: rat(kk, (n * n) as i64), k_prime: k + k * (k - 1) / 2 + 3 })
}

/// Largest clique by subset enumeration.
pub fn brute_force_max_clique(g: &UndirectedGraph) -> Result<usize, OracleError> {
    let n = g.vertex_count();
    if n > MAX_CLIQUE_VERTICES {
        return Err(OracleError::TooLarge { size: n, limit: MAX_CLIQUE_VERTICES });
    }
    let mut best = 0;
    for mask in 0u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let vs: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        if vs.iter().enumerate().all(|(i, &u)| vs[i + 1..].iter().all(|&v| g.has_edge(u, v))) {
            best = size;
        }
    }
    Ok(best)
}

/// Bellman iteration (Gauss-Seidel) until the update falls below
/// `residual`. Values are indexed by model state.
pub fn value_iteration(m: &ReachMdp, direction: Direction, residual: f64) -> Vec<f64> {
    let probs: Vec<Vec<Vec<(usize, f64)>>> = (0..m.state_count())
        .map(|s| m.actions(s).iter().map(|a| a.successors.iter().map(|(t, p)| (*t, rational_to_f64(p))).collect()).collect())
        .collect();
    let mut v = vec![0.0; m.state_count()];
    v[m.goal()] = 1.0;
    let states = m.nonterminal_states();
    for _ in 0..10_000_000 {
        let mut delta: f64 = 0.0;
        for &s in &states {
            let values = probs[s].iter().map(|succ| succ.iter().map(|(t, p)| p * v[*t]).sum::<f64>());
            let new = match direction {
                Direction::Min => values.fold(f64::INFINITY, f64::min),
                Direction::Max => values.fold(f64::NEG_INFINITY, f64::max),
            };
            delta = delta.max((new - v[s]).abs());
            v[s] = new;
        }
        if delta < residual {
            break;
        }
    }
    v
}

/// Band around the threshold inside which float values are re-checked
/// exactly.
const EXACT_BAND: f64 = 1e-7;

fn meets_threshold(sub: &Subsystem, lambda: &Rational, lambda_f: f64, direction: Direction) -> bool {
    let m = &sub.mdp;
    let p = value_iteration(m, direction, 1e-13)[m.initial()];
    if (p - lambda_f).abs() > EXACT_BAND {
        return p > lambda_f;
    }
    reach_probability(m, direction).map(|q| q >= *lambda).unwrap_or(false)
}

/// Calls `visit` with every `size`-subset of `items`, stopping early when it
/// returns `true`.
fn any_subset<T: Copy>(items: &[T], size: usize, mut visit: impl FnMut(&[T]) -> bool) -> bool {
    fn rec<T: Copy>(items: &[T], size: usize, start: usize, cur: &mut Vec<T>, visit: &mut dyn FnMut(&[T]) -> bool) -> bool {
        if cur.len() == size {
            return visit(cur);
        }
        for i in start..items.len() {
            if items.len() - i < size - cur.len() {
                break;
            }
            cur.push(items[i]);
            if rec(items, size, i + 1, cur, visit) {
                return true;
            }
            cur.pop();
        }
        false
    }
    rec(items, size, 0, &mut Vec::with_capacity(size), &mut visit)
}

/// Least number of states `|R|` (the initial state always in `R`) whose
/// subsystem reaches `lambda`; `None` when even the full model does not.
pub fn brute_force_min_witness(m: &ReachMdp, lambda: &Rational, direction: Direction) -> Result<Option<usize>, OracleError> {
    let states = m.nonterminal_states();
    if states.len() > MAX_ORACLE_STATES {
        return Err(OracleError::TooLarge { size: states.len(), limit: MAX_ORACLE_STATES });
    }
    let others: Vec<usize> = states.iter().copied().filter(|&s| s != m.initial()).collect();
    let lambda_f = rational_to_f64(lambda);
    for size in 0..=others.len() {
        let found = any_subset(&others, size, |extra| {
            let mut r: BTreeSet<usize> = extra.iter().copied().collect();
            r.insert(m.initial());
            let sub = restrict(m, &Selection::States(r)).expect("states come from the model");
            meets_threshold(&sub, lambda, lambda_f, direction)
        });
        if found {
            return Ok(Some(size + 1));
        }
    }
    Ok(None)
}

/// Transitions that can matter for a witness: those not entering fail.
fn useful_transitions(m: &ReachMdp) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (s, a) in m.pairs() {
        for (t, _) in &m.actions(s)[a].successors {
            if *t != m.fail() {
                out.push((s, a, *t));
            }
        }
    }
    out
}

/// Number of kept states plus kept transitions of a transition set: the
/// sources and the initial state count as states, transitions into fail
/// are never needed and do not count.
pub fn subsystem_size(m: &ReachMdp, transitions: &BTreeSet<(usize, usize, usize)>) -> usize {
    let mut states: BTreeSet<usize> = transitions.iter().map(|&(s, _, _)| s).collect();
    states.insert(m.initial());
    states.len() + transitions.iter().filter(|&&(_, _, t)| t != m.fail()).count()
}

fn transition_oracle(
    m: &ReachMdp,
    lambda: &Rational,
    direction: Direction,
    cost: impl Fn(&BTreeSet<(usize, usize, usize)>) -> usize,
) -> Result<Option<usize>, OracleError> {
    let ts = useful_transitions(m);
    if ts.len() > MAX_ORACLE_TRANSITIONS {
        return Err(OracleError::TooLarge { size: ts.len(), limit: MAX_ORACLE_TRANSITIONS });
    }
    let lambda_f = rational_to_f64(lambda);
    let mut best: Option<usize> = None;
    for mask in 0u32..(1u32 << ts.len()) {
        let set: BTreeSet<(usize, usize, usize)> = (0..ts.len()).filter(|i| mask & (1 << i) != 0).map(|i| ts[i]).collect();
        let c = cost(&set);
        if best.is_some_and(|b| c >= b) {
            continue;
        }
        let sub = restrict_transitions(m, &set).expect("transitions come from the model");
        if meets_threshold(&sub, lambda, lambda_f, direction) {
            best = Some(c);
        }
    }
    Ok(best)
}

/// Least number of transitions of a witness.
pub fn brute_force_min_transitions(m: &ReachMdp, lambda: &Rational, direction: Direction) -> Result<Option<usize>, OracleError> {
    transition_oracle(m, lambda, direction, |set| set.len())
}

/// Least states-plus-transitions size of a witness, see [`subsystem_size`].
pub fn brute_force_min_size(m: &ReachMdp, lambda: &Rational, direction: Direction) -> Result<Option<usize>, OracleError> {
    transition_oracle(m, lambda, direction, |set| subsystem_size(m, set))
}

fn random_distribution(rng: &mut ChaCha8Rng, targets: &[usize]) -> Vec<(usize, Rational)> {
    // weights capped so the common denominator stays <= 100
    let cap = (100 / targets.len().max(1)).clamp(1, 20) as i64;
    let weights: Vec<i64> = targets.iter().map(|_| rng.gen_range(1..=cap)).collect();
    let total: i64 = weights.iter().sum();
    targets.iter().zip(weights).map(|(&t, w)| (t, rat(w, total))).collect()
}

/// Seeded random model with `states` non-terminal states `0..states`
/// (initial 0), goal `states` and fail `states + 1`. Every action has a
/// successor of higher index or a terminal one, and the first action of
/// state `i` moves to `i + 1`, so all states are reachable and no
/// scheduler can avoid goal and fail forever. Other successors, back edges
/// included, are uniform. Each state gets `1..=actions` actions with
/// `1..=branching` successors each.
pub fn random_model(seed: u64, states: usize, actions: usize, branching: usize) -> ReachMdp {
    random_impl(seed, states, actions.max(1), branching.max(1), ModelKind::Mdp)
}

/// [`random_model`] with a single action per state.
pub fn random_dtmc(seed: u64, states: usize, branching: usize) -> ReachMdp {
    random_impl(seed, states, 1, branching.max(1), ModelKind::Dtmc)
}

fn random_impl(seed: u64, states: usize, actions: usize, branching: usize, kind: ModelKind) -> ReachMdp {
    let n = states.max(1);
    let (goal, fail) = (n, n + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ModelBuilder::new(kind, n + 2, 0, goal, fail);
    for s in 0..n {
        let count = rng.gen_range(1..=actions);
        for a in 0..count {
            let label = match kind {
                ModelKind::Dtmc => "-".to_string(),
                ModelKind::Mdp => ((b'a' + a as u8) as char).to_string(),
            };
            let forward: Vec<usize> = (s + 1..n + 2).collect();
            let first = if a == 0 && s + 1 < n { s + 1 } else { *forward.choose(&mut rng).expect("terminals are always ahead") };
            let mut targets = vec![first];
            let extra = rng.gen_range(1..=branching) - 1;
            for _ in 0..extra {
                let t = rng.gen_range(0..n + 2);
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            for (t, p) in random_distribution(&mut rng, &targets) {
                b.accumulate(s, &label, t, p);
            }
        }
    }
    b.build().expect("generator produces stochastic rows")
}

/// Seeded random tree-shaped DTMC: state `i > 0` hangs below a uniformly
/// chosen parent `< i`; every state may additionally move to goal or fail,
/// and leaves always do.
pub fn random_tree(seed: u64, states: usize) -> ReachMdp {
    let n = states.max(1);
    let (goal, fail) = (n, n + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut children = vec![Vec::new(); n];
    for i in 1..n {
        let p = rng.gen_range(0..i);
        children[p].push(i);
    }
    let mut b = ModelBuilder::new(ModelKind::Dtmc, n + 2, 0, goal, fail);
    for s in 0..n {
        let mut targets = children[s].clone();
        let leaf = targets.is_empty();
        if leaf || rng.gen_bool(0.6) {
            targets.push(goal);
        }
        if leaf || rng.gen_bool(0.5) {
            targets.push(fail);
        }
        for (t, p) in random_distribution(&mut rng, &targets) {
            b.accumulate(s, "-", t, p);
        }
    }
    b.build().expect("generator produces stochastic rows")
}

/// Seeded random simple graph with edge probability `density`.
pub fn random_graph(seed: u64, n: usize, density: f64) -> UndirectedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(density) {
                edges.push((u, v));
            }
        }
    }
    UndirectedGraph::new(n, edges).expect("generated edges are simple")
}
