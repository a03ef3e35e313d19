//! State-minimal witnesses of tree-shaped DTMCs in polynomial time.
//!
//! The chain is first binarized: a state with successors `s_0 < ... < s_n`
//! (goal first) becomes a chain of fresh states `u_j` with
//! `P(u_j, s_j) = μ_j / (1 - Σ_{i<j} μ_i)`. Then `l_q(i)`, the largest
//! probability of reaching goal from `q` with `i` original states kept in
//! the subtree of `q`, is computed bottom-up. Goal and fail act as leaves
//! with `l = 1` and `l = 0` that cost no states.

use std::collections::{BTreeSet, VecDeque};

use num_traits::{One, Zero};

use crate::error::{ModelError, WitnessError};
use crate::linsys::evaluate_policy;
use crate::model::{restrict, ModelBuilder, ModelKind, ReachMdp, Selection};
use crate::scalar::Rational;
use crate::witness::{Method, WitnessResult};

fn require_dtmc(m: &ReachMdp) -> Result<(), ModelError> {
    if m.nonterminal_states().into_iter().all(|s| m.actions(s).len() == 1) {
        Ok(())
    } else {
        Err(ModelError::NotDtmc)
    }
}

/// Whether the graph on the non-terminal states is a tree rooted at the
/// initial state.
pub fn is_tree_shaped(m: &ReachMdp) -> Result<bool, ModelError> {
    require_dtmc(m)?;
    let mut indegree = vec![0usize; m.state_count()];
    for s in m.nonterminal_states() {
        for t in m.successors(s) {
            if !m.is_terminal(t) {
                indegree[t] += 1;
            }
        }
    }
    let seen = crate::model::reachable_from(m, m.initial());
    Ok(m.nonterminal_states()
        .into_iter()
        .all(|s| seen[s] && indegree[s] == usize::from(s != m.initial())))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarizationMap {
    /// Number of states of the original chain; binarized indices below it
    /// are original states, the rest are fresh.
    pub original_count: usize,
    /// For each fresh state `u_j` (in index order): the expanded state and
    /// `j`.
    pub origin: Vec<(usize, usize)>,
    /// The total order used on original states: goal, then the others by
    /// index.
    pub order: Vec<usize>,
}

impl BinarizationMap {
    pub fn is_fresh(&self, state: usize) -> bool {
        state >= self.original_count
    }

    pub fn fresh_states(&self) -> BTreeSet<usize> {
        (self.original_count..self.original_count + self.origin.len()).collect()
    }
}

/// Expands every state with more than two successors into a chain.
/// Original states keep their indices; fresh states are appended.
pub fn binarize(m: &ReachMdp) -> Result<(ReachMdp, BinarizationMap), WitnessError> {
    if !is_tree_shaped(m)? {
        return Err(WitnessError::NotTree);
    }
    let mut order: Vec<usize> = vec![m.goal()];
    order.extend((0..m.state_count()).filter(|&s| s != m.goal()));
    let rank = {
        let mut r = vec![0; m.state_count()];
        for (i, &s) in order.iter().enumerate() {
            r[s] = i;
        }
        r
    };
    let n = m.state_count();
    let mut edges: Vec<(usize, usize, Rational)> = Vec::new();
    let mut origin = Vec::new();
    for q in m.nonterminal_states() {
        let mut succ = m.actions(q)[0].successors.clone();
        if succ.len() <= 2 {
            edges.extend(succ.into_iter().map(|(t, p)| (q, t, p)));
            continue;
        }
        succ.sort_by_key(|(t, _)| rank[*t]);
        let last = succ.len() - 1;
        let mut from = q;
        let mut used = Rational::zero();
        for (j, (t, mu)) in succ.iter().enumerate() {
            let rest = Rational::one() - &used;
            if rest.is_zero() {
                return Err(WitnessError::Internal("zero remaining mass during binarization".into()));
            }
            if j == last {
                edges.push((from, *t, Rational::one() - edges_out(&edges, from)));
                break;
            }
            edges.push((from, *t, mu / &rest));
            used += mu;
            if j + 1 < last {
                let u = n + origin.len();
                origin.push((q, j + 1));
                edges.push((from, u, Rational::one() - mu / &rest));
                from = u;
            }
        }
    }
    let total = n + origin.len();
    let mut b = ModelBuilder::new(ModelKind::Dtmc, total, m.initial(), m.goal(), m.fail());
    for s in 0..n {
        b.set_label(s, m.label(s));
    }
    for (i, (q, j)) in origin.iter().enumerate() {
        b.set_label(n + i, format!("{}~u{j}", m.label(*q)));
    }
    for (s, t, p) in edges {
        b.accumulate(s, "-", t, p);
    }
    let model = b.build().map_err(|e| WitnessError::Internal(e.to_string()))?;
    Ok((model, BinarizationMap { original_count: n, origin, order }))
}

fn edges_out(edges: &[(usize, usize, Rational)], from: usize) -> Rational {
    edges.iter().filter(|(s, _, _)| *s == from).map(|(_, _, p)| p.clone()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DpTable {
    /// `l[q][i]` for `i = 0..=|q|_S`; goal has `[1]`, fail `[0]`.
    pub l: Vec<Vec<Rational>>,
    /// Successors of `q` that are not goal or fail, at most two.
    pub children: Vec<Vec<usize>>,
    /// `split[q][i]`: how many counted states each child receives in the
    /// entry realizing `l[q][i]`.
    pub split: Vec<Vec<Vec<usize>>>,
    /// Which states are counted (the original non-terminal ones).
    pub counted: Vec<bool>,
}

impl DpTable {
    /// Counted states in the subtree of `q`.
    pub fn capacity(&self, q: usize) -> usize {
        self.l[q].len() - 1
    }
}

/// Bottom-up tables for a binary tree DTMC. States at index
/// `>= counted_below` are fresh and do not count towards the budget.
pub fn dp_tables(m: &ReachMdp, counted_below: usize) -> Result<DpTable, WitnessError> {
    if !is_tree_shaped(m)? {
        return Err(WitnessError::NotTree);
    }
    let n = m.state_count();
    let mut children = vec![Vec::new(); n];
    for q in m.nonterminal_states() {
        if m.actions(q)[0].successors.len() > 2 {
            return Err(WitnessError::NotTree);
        }
        children[q] = m.successors(q).filter(|&t| !m.is_terminal(t)).collect();
    }
    let counted: Vec<bool> = (0..n).map(|s| s < counted_below && !m.is_terminal(s)).collect();
    // parents before children
    let mut bfs = Vec::new();
    let mut queue = VecDeque::from([m.initial()]);
    while let Some(q) = queue.pop_front() {
        bfs.push(q);
        queue.extend(children[q].iter().copied());
    }
    let mut l = vec![Vec::new(); n];
    let mut split = vec![Vec::new(); n];
    l[m.goal()] = vec![Rational::one()];
    l[m.fail()] = vec![Rational::zero()];
    for &q in bfs.iter().rev() {
        let to_goal = m.prob(q, 0, m.goal());
        let probs: Vec<Rational> = children[q].iter().map(|&c| m.prob(q, 0, c)).collect();
        let caps: Vec<usize> = children[q].iter().map(|&c| l[c].len() - 1).collect();
        let offset = usize::from(counted[q]);
        let cap = caps.iter().sum::<usize>() + offset;
        let mut row = vec![Rational::zero(); cap + 1];
        let mut back = vec![vec![0; children[q].len()]; cap + 1];
        for i in offset..=cap {
            let budget = i - offset;
            let mut best: Option<(Rational, Vec<usize>)> = None;
            for js in splits(&caps, budget) {
                let mut v = to_goal.clone();
                for (k, &j) in js.iter().enumerate() {
                    v += &probs[k] * &l[children[q][k]][j];
                }
                if best.as_ref().is_none_or(|(b, _)| v > *b) {
                    best = Some((v, js));
                }
            }
            let (v, js) = best.expect("some split always exists");
            row[i] = v;
            back[i] = js;
        }
        l[q] = row;
        split[q] = back;
    }
    Ok(DpTable { l, children, split, counted })
}

/// All ways to give `budget` states to children with capacities `caps`.
fn splits(caps: &[usize], budget: usize) -> Vec<Vec<usize>> {
    match caps {
        [] if budget == 0 => vec![vec![]],
        [] => vec![],
        [c] if budget <= *c => vec![vec![budget]],
        [_] => vec![],
        [c1, c2] => {
            let lo = budget.saturating_sub(*c2);
            let hi = budget.min(*c1);
            (lo..=hi.max(lo)).filter(|&j| j <= hi).map(|j| vec![j, budget - j]).collect()
        }
        _ => unreachable!("binary trees have at most two children"),
    }
}

/// State-minimal witness of a tree-shaped DTMC for `Pr >= lambda`.
pub fn tree_minimal_witness(m: &ReachMdp, lambda: &Rational) -> Result<WitnessResult, WitnessError> {
    let (bin, map) = binarize(m)?;
    let table = dp_tables(&bin, map.original_count)?;
    let root = &table.l[bin.initial()];
    if root.last().is_some_and(|full| full < lambda) {
        return Err(WitnessError::Infeasible);
    }
    let k = root.iter().position(|v| v >= lambda).expect("full entry reaches lambda").max(1);
    let mut kept = BTreeSet::new();
    let mut stack = vec![(bin.initial(), k)];
    while let Some((q, i)) = stack.pop() {
        if i == 0 && table.counted[q] {
            continue;
        }
        if table.counted[q] {
            kept.insert(q);
        }
        for (c, &j) in table.children[q].iter().zip(&table.split[q][i]) {
            stack.push((*c, j));
        }
    }
    let subsystem = restrict(m, &Selection::States(kept))?;
    let values: Vec<Rational> = evaluate_policy(&subsystem.mdp, &vec![0; subsystem.mdp.state_count()])
        .ok_or_else(|| WitnessError::Internal("singular subsystem".into()))?;
    let probability = values[subsystem.mdp.initial()].clone();
    if probability != root[k] {
        return Err(WitnessError::Internal("reconstructed witness disagrees with the table".into()));
    }
    let mut point = vec![Rational::zero(); m.nonterminal_states().len()];
    let cols: Vec<usize> = m.nonterminal_states();
    for (i, &p) in subsystem.parent_state_map.iter().enumerate() {
        if let Some(c) = cols.iter().position(|&s| s == p) {
            point[c] = values[i].clone();
        }
    }
    let state_count = subsystem.state_count();
    Ok(WitnessResult {
        subsystem,
        state_count,
        point,
        method: Method::Tree,
        optimal: true,
        bounds: (state_count, state_count),
        probability,
        support_sizes: vec![],
        renormalized: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::reach_probability;
    use crate::model::fixtures::*;
    use crate::model::{parse_model, Direction};
    use crate::scalar::rat;

    fn chain() -> ReachMdp {
        // s0 -> a, b; a -> goal 4/5; b -> goal 3/5
        parse_model("dtmc\nstates: 5\ninitial: 0\ngoal: 3\nfail: 4\n0 - 1 1/2\n0 - 2 1/2\n1 - 3 4/5\n1 - 4 1/5\n2 - 3 3/5\n2 - 4 2/5\n").unwrap()
    }

    #[test]
    fn tree_shapes() {
        assert!(is_tree_shaped(&d1()).unwrap());
        assert!(is_tree_shaped(&sure_goal()).unwrap());
        let shared = parse_model("dtmc\nstates: 5\ninitial: 0\ngoal: 3\nfail: 4\n0 - 1 1/2\n0 - 2 1/2\n1 - 2 1\n2 - 3 1\n").unwrap();
        assert!(!is_tree_shaped(&shared).unwrap());
        assert!(matches!(is_tree_shaped(&coin_choice()), Err(ModelError::NotDtmc)));
    }

    #[test]
    fn worked_binarization() {
        let m = parse_model(
            "dtmc\nstates: 7\ninitial: 0\ngoal: 5\nfail: 6\n0 - 1 0.4\n0 - 2 0.3\n0 - 3 0.2\n0 - 4 0.1\n1 - 5 1\n2 - 5 1\n3 - 6 1\n4 - 5 1\n",
        )
        .unwrap();
        let (b, map) = binarize(&m).unwrap();
        assert_eq!(map.origin, vec![(0, 1), (0, 2)]);
        let (u1, u2) = (7, 8);
        assert_eq!(b.prob(0, 0, 1), rat(2, 5));
        assert_eq!(b.prob(0, 0, u1), rat(3, 5));
        assert_eq!(b.prob(u1, 0, 2), rat(1, 2));
        assert_eq!(b.prob(u1, 0, u2), rat(1, 2));
        assert_eq!(b.prob(u2, 0, 3), rat(2, 3));
        assert_eq!(b.prob(u2, 0, 4), rat(1, 3));
        assert_eq!(reach_probability(&b, Direction::Min).unwrap(), reach_probability(&m, Direction::Min).unwrap());
    }

    #[test]
    fn goal_comes_first_in_the_chain() {
        let m = parse_model("dtmc\nstates: 5\ninitial: 0\ngoal: 3\nfail: 4\n0 - 1 1/4\n0 - 2 1/4\n0 - 3 1/4\n0 - 4 1/4\n1 - 3 1\n2 - 4 1\n").unwrap();
        let (b, map) = binarize(&m).unwrap();
        assert_eq!(b.prob(0, 0, 3), rat(1, 4));
        for u in map.fresh_states() {
            assert_eq!(b.prob(u, 0, b.goal()), rat(0, 1));
            assert!(b.successors(u).count() <= 2);
        }
    }

    #[test]
    fn two_successors_unchanged() {
        let (b, map) = binarize(&chain()).unwrap();
        assert_eq!(b, chain());
        assert!(map.origin.is_empty());
    }

    #[test]
    fn chain_tables_and_witnesses() {
        let m = chain();
        let (b, map) = binarize(&m).unwrap();
        let t = dp_tables(&b, map.original_count).unwrap();
        assert_eq!(t.l[0], vec![rat(0, 1), rat(0, 1), rat(2, 5), rat(7, 10)]);
        assert_eq!(t.l[1], vec![rat(0, 1), rat(4, 5)]);
        assert_eq!(t.l[3], vec![rat(1, 1)]);
        let w = tree_minimal_witness(&m, &rat(2, 5)).unwrap();
        assert_eq!((w.state_count, w.subsystem.kept_states()), (2, vec![0, 1]));
        let w = tree_minimal_witness(&m, &rat(7, 10)).unwrap();
        assert_eq!(w.state_count, 3);
        assert!(matches!(tree_minimal_witness(&m, &rat(71, 100)), Err(WitnessError::Infeasible)));
    }

    #[test]
    fn d1_tree_witness() {
        let w = tree_minimal_witness(&d1(), &rat(3, 10)).unwrap();
        assert_eq!((w.state_count, w.probability.clone()), (1, rat(3, 10)));
        let w = tree_minimal_witness(&d1(), &rat(0, 1)).unwrap();
        assert_eq!(w.state_count, 1);
    }

    #[test]
    fn leaf_table() {
        let m = parse_model("dtmc\nstates: 3\ninitial: 0\ngoal: 1\nfail: 2\n0 - 1 2/5\n0 - 2 3/5\n").unwrap();
        let t = dp_tables(&m, 3).unwrap();
        assert_eq!(t.l[0], vec![rat(0, 1), rat(2, 5)]);
    }
}
