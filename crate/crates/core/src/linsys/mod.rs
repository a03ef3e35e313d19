//! The Farkas system `(A, b, δ_{s0})` of a reachability MDP, the LP solver
//! contract, and exact min/max reachability probabilities.
//!
//! Rows of `A` are indexed by the enabled pairs `M`, columns by the
//! non-terminal states `S`: `A((s,α),t) = [s=t] - P(s,α,t)` and
//! `b(s,α) = P(s,α,goal)`.

mod dense;
mod lp;

pub use dense::solve_dense;
pub use lp::{solve_lp, Cmp, LinearConstraint, LinearProgram, LpSolution, LpStatus, Sense};

use num_traits::{One, Zero};

use crate::error::ModelError;
use crate::model::{Direction, Pair, ReachMdp};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct FarkasSystem<T> {
    /// The pairs `M`, one per row.
    pub row_index: Vec<Pair>,
    /// The states `S`, one per column.
    pub col_index: Vec<usize>,
    /// Column of each model state (`None` for goal and fail).
    pub col_of: Vec<Option<usize>>,
    /// Sparse rows of `A`, sorted by column.
    pub a: Vec<Vec<(usize, T)>>,
    pub b: Vec<T>,
    pub delta0: Vec<T>,
}

pub fn build_farkas_system<T: Scalar>(m: &ReachMdp) -> FarkasSystem<T> {
    let col_index = m.nonterminal_states();
    let mut col_of = vec![None; m.state_count()];
    for (c, &s) in col_index.iter().enumerate() {
        col_of[s] = Some(c);
    }
    let row_index = m.pairs();
    let mut a = Vec::with_capacity(row_index.len());
    let mut b = Vec::with_capacity(row_index.len());
    for &(s, act) in &row_index {
        let action = &m.actions(s)[act];
        let own = col_of[s].expect("pairs only range over non-terminal states");
        let mut row: Vec<(usize, T)> = Vec::with_capacity(action.successors.len() + 1);
        let mut diagonal = Rational::one();
        let mut to_goal = Rational::zero();
        for (t, p) in &action.successors {
            if *t == s {
                diagonal -= p;
            } else if *t == m.goal() {
                to_goal = p.clone();
            } else if let Some(c) = col_of[*t] {
                row.push((c, T::from_rational(&-p.clone())));
            }
        }
        if !diagonal.is_zero() {
            row.push((own, T::from_rational(&diagonal)));
        }
        row.sort_by_key(|(c, _)| *c);
        a.push(row);
        b.push(T::from_rational(&to_goal));
    }
    let delta0 = col_index.iter().map(|&s| if s == m.initial() { T::one() } else { T::zero() }).collect();
    FarkasSystem { row_index, col_index, col_of, a, b, delta0 }
}

impl<T: Scalar> FarkasSystem<T> {
    pub fn rows(&self) -> usize {
        self.row_index.len()
    }

    pub fn cols(&self) -> usize {
        self.col_index.len()
    }

    pub fn initial_col(&self) -> usize {
        self.delta0.iter().position(|d| !d.is_zero()).expect("initial state is non-terminal")
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        self.a[row].iter().find(|(c, _)| *c == col).map(|(_, v)| v.clone()).unwrap_or_else(T::zero)
    }

    /// `A·z`.
    pub fn a_mul(&self, z: &[T]) -> Vec<T> {
        self.a.iter().map(|row| row.iter().fold(T::zero(), |acc, (c, v)| acc + v.clone() * z[*c].clone())).collect()
    }

    /// `y·A`.
    pub fn mul_a(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols()];
        for (row, yr) in self.a.iter().zip(y) {
            if yr.is_zero() {
                continue;
            }
            for (c, v) in row {
                out[*c] = out[*c].clone() + yr.clone() * v.clone();
            }
        }
        out
    }

    /// `y·b`.
    pub fn b_dot(&self, y: &[T]) -> T {
        self.b.iter().zip(y).fold(T::zero(), |acc, (b, v)| acc + b.clone() * v.clone())
    }

    /// Row sums `A·1`.
    pub fn row_sums(&self) -> Vec<T> {
        self.a.iter().map(|row| row.iter().fold(T::zero(), |acc, (_, v)| acc + v.clone())).collect()
    }
}

/// Errors unless every state reaches goal or fail with positive probability
/// under every scheduler, which makes the Bellman equations uniquely
/// solvable. Reachability from the initial state is not required here:
/// subsystems routinely contain states that became unreachable.
pub(crate) fn require_stopping(m: &ReachMdp) -> Result<(), ModelError> {
    let trapped = crate::model::validate_trapped(m);
    if trapped.is_empty() {
        Ok(())
    } else {
        Err(ModelError::NotValidated(format!("states {trapped:?} can avoid goal and fail forever")))
    }
}

/// Values of the memoryless deterministic policy `choice`, indexed by model
/// state (goal has value one, fail zero).
pub fn evaluate_policy<T: Scalar>(m: &ReachMdp, choice: &[usize]) -> Option<Vec<T>> {
    let n = m.state_count();
    let mut values = vec![T::zero(); n];
    values[m.goal()] = T::one();
    let states = m.nonterminal_states();

    // Acyclic policy graphs are solved by back substitution.
    let mut indegree = vec![0usize; n];
    for &s in &states {
        for (t, _) in &m.actions(s)[choice[s]].successors {
            if !m.is_terminal(*t) {
                indegree[*t] += 1;
            }
        }
    }
    let mut order: Vec<usize> = states.iter().copied().filter(|&s| indegree[s] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let s = order[head];
        head += 1;
        for (t, _) in &m.actions(s)[choice[s]].successors {
            if !m.is_terminal(*t) {
                indegree[*t] -= 1;
                if indegree[*t] == 0 {
                    order.push(*t);
                }
            }
        }
    }
    if order.len() == states.len() {
        for &s in order.iter().rev() {
            values[s] = m.actions(s)[choice[s]]
                .successors
                .iter()
                .fold(T::zero(), |acc, (t, p)| acc + T::from_rational(p) * values[*t].clone());
        }
        return Some(values);
    }

    let mut col_of = vec![usize::MAX; n];
    for (c, &s) in states.iter().enumerate() {
        col_of[s] = c;
    }
    let k = states.len();
    let mut a = vec![vec![T::zero(); k]; k];
    let mut rhs = vec![T::zero(); k];
    for (r, &s) in states.iter().enumerate() {
        a[r][r] = T::one();
        for (t, p) in &m.actions(s)[choice[s]].successors {
            if *t == m.goal() {
                rhs[r] = T::from_rational(p);
            } else if !m.is_terminal(*t) {
                let c = col_of[*t];
                a[r][c] = a[r][c].clone() - T::from_rational(p);
            }
        }
    }
    let x = solve_dense(a, rhs)?;
    for (c, &s) in states.iter().enumerate() {
        values[s] = x[c].clone();
    }
    Some(values)
}

/// One-step value `b(s,α) + Σ_t P(s,α,t)·v(t)` of a pair.
pub(crate) fn pair_value(m: &ReachMdp, (s, a): Pair, values: &[Rational]) -> Rational {
    m.actions(s)[a].successors.iter().fold(Rational::zero(), |acc, (t, p)| acc + p * &values[*t])
}

/// Exact policy iteration starting from `choice`. Switches only on strict
/// improvement (to the smallest best action), so it terminates at an
/// optimal policy whose values are the exact optimum.
pub fn improve_policy(m: &ReachMdp, direction: Direction, mut choice: Vec<usize>) -> Result<(Vec<usize>, Vec<Rational>), ModelError> {
    require_stopping(m)?;
    loop {
        let values: Vec<Rational> = evaluate_policy(m, &choice)
            .ok_or_else(|| ModelError::NotValidated("singular policy system".into()))?;
        let mut changed = false;
        for s in m.nonterminal_states() {
            let mut best = (choice[s], values[s].clone());
            for a in 0..m.actions(s).len() {
                let q = pair_value(m, (s, a), &values);
                let better = match direction {
                    Direction::Min => q < best.1,
                    Direction::Max => q > best.1,
                };
                if better {
                    best = (a, q);
                }
            }
            if best.0 != choice[s] {
                choice[s] = best.0;
                changed = true;
            }
        }
        if !changed {
            return Ok((choice, values));
        }
    }
}

/// Solves the reachability LP in floating point: `max 1·z s.t. Az <= b`
/// for the minimum, `min 1·z s.t. Az >= b` for the maximum, with `z` free.
pub fn reach_lp<T: Scalar>(sys: &FarkasSystem<T>, direction: Direction) -> LinearProgram<T> {
    let (sense, cmp) = match direction {
        Direction::Min => (Sense::Maximize, Cmp::Le),
        Direction::Max => (Sense::Minimize, Cmp::Ge),
    };
    let mut lp = LinearProgram::new(sense, vec![T::one(); sys.cols()]);
    for j in 0..sys.cols() {
        lp.set_free(j);
    }
    for (row, b) in sys.a.iter().zip(&sys.b) {
        lp.add_constraint(row.clone(), cmp, b.clone());
    }
    lp
}

/// Optimal memoryless deterministic policy and its exact values (indexed by
/// model state). The float LP supplies the starting policy (the tight row
/// at each state); exact policy iteration certifies and, if needed,
/// corrects it.
pub fn optimal_policy(m: &ReachMdp, direction: Direction) -> Result<(Vec<usize>, Vec<Rational>), ModelError> {
    require_stopping(m)?;
    let sys = build_farkas_system::<f64>(m);
    let mut choice = vec![0usize; m.state_count()];
    if let Ok(sol) = solve_lp(&reach_lp(&sys, direction)) {
        if sol.is_optimal() {
            let az = sys.a_mul(&sol.x);
            let mut best_slack = vec![f64::INFINITY; m.state_count()];
            for (r, &(s, a)) in sys.row_index.iter().enumerate() {
                let slack = (sys.b[r] - az[r]).abs();
                if slack < best_slack[s] - 1e-12 {
                    best_slack[s] = slack;
                    choice[s] = a;
                }
            }
        }
    }
    improve_policy(m, direction, choice)
}

/// `Pr^dir_s(<>goal)` for every `s ∈ S`, in column order of the Farkas
/// system.
pub fn reach_probabilities(m: &ReachMdp, direction: Direction) -> Result<Vec<Rational>, ModelError> {
    let (_, values) = optimal_policy(m, direction)?;
    Ok(m.nonterminal_states().into_iter().map(|s| values[s].clone()).collect())
}

/// `Pr^dir_{s0}(<>goal)`.
pub fn reach_probability(m: &ReachMdp, direction: Direction) -> Result<Rational, ModelError> {
    let (_, values) = optimal_policy(m, direction)?;
    Ok(values[m.initial()].clone())
}
