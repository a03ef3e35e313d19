//! Reachability MDPs with exact transition probabilities.
//!
//! A [`ReachMdp`] has two distinguished absorbing states, `goal` and `fail`.
//! They carry no actions; every other state has at least one action whose
//! distribution sums to exactly one.

mod format;
mod property;
mod subsystem;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

pub use format::{parse_model, serialize_model};
pub use property::{Direction, PropertySpec, Relation};
pub use subsystem::{induced_dtmc, restrict, restrict_transitions, MrScheduler, Selection, Subsystem};
pub use validate::{prune_unreachable, reachable_from, validate, ValidationReport, Violation};
pub(crate) use validate::trapped_states as validate_trapped;

use crate::error::ModelError;
use crate::scalar::{format_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Mdp,
    Dtmc,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mdp => "mdp",
            ModelKind::Dtmc => "dtmc",
        })
    }
}

/// One enabled action of a state with its successor distribution, sorted by
/// target index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub label: String,
    pub successors: Vec<(usize, Rational)>,
}

impl Action {
    pub fn prob(&self, target: usize) -> Rational {
        self.successors
            .binary_search_by_key(&target, |(t, _)| *t)
            .map(|i| self.successors[i].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }
}

/// A state-action pair `(state, action index)`.
pub type Pair = (usize, usize);

/// Equality is structural: state labels are not compared, since the text
/// format does not carry them.
#[derive(Debug, Clone)]
pub struct ReachMdp {
    kind: ModelKind,
    labels: Vec<String>,
    initial: usize,
    goal: usize,
    fail: usize,
    actions: Vec<Vec<Action>>,
}

impl PartialEq for ReachMdp {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.initial == other.initial
            && self.goal == other.goal
            && self.fail == other.fail
            && self.actions == other.actions
    }
}

impl Eq for ReachMdp {}

impl ReachMdp {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn state_count(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn fail(&self) -> usize {
        self.fail
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        state == self.goal || state == self.fail
    }

    pub fn actions(&self, state: usize) -> &[Action] {
        &self.actions[state]
    }

    pub fn action(&self, (state, action): Pair) -> &Action {
        &self.actions[state][action]
    }

    pub fn prob(&self, state: usize, action: usize, target: usize) -> Rational {
        self.actions[state][action].prob(target)
    }

    /// The non-terminal states `S` in ascending order.
    pub fn nonterminal_states(&self) -> Vec<usize> {
        (0..self.state_count()).filter(|&s| !self.is_terminal(s)).collect()
    }

    /// All enabled pairs `M`, ordered by state and then by action order.
    pub fn pairs(&self) -> Vec<Pair> {
        self.nonterminal_states()
            .into_iter()
            .flat_map(|s| (0..self.actions[s].len()).map(move |a| (s, a)))
            .collect()
    }

    /// Number of triples `(s, a, t)` with positive probability.
    pub fn transition_count(&self) -> usize {
        self.actions.iter().flatten().map(|a| a.successors.len()).sum()
    }

    pub fn is_dtmc(&self) -> bool {
        self.actions.iter().all(|acts| acts.len() <= 1)
    }

    pub fn successors(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.actions[state].iter().flat_map(|a| a.successors.iter().map(|(t, _)| *t))
    }

    /// Copy of this model with goal and fail exchanged. Under the
    /// almost-sure reachability precondition `Pr(<>goal) = 1 - Pr(<>fail)`,
    /// which turns upper-bound properties into lower-bound ones.
    pub fn swap_goal_fail(&self) -> ReachMdp {
        let mut swapped = self.clone();
        swapped.goal = self.fail;
        swapped.fail = self.goal;
        swapped
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<ReachMdp, ModelError> {
        if labels.len() != self.state_count() {
            return Err(ModelError::Dimension { expected: self.state_count(), found: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }
}

/// Incremental construction of a [`ReachMdp`]; `build` checks every model
/// invariant.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    kind: ModelKind,
    initial: usize,
    goal: usize,
    fail: usize,
    labels: Vec<String>,
    actions: Vec<Vec<(String, BTreeMap<usize, Rational>)>>,
}

impl ModelBuilder {
    pub fn new(kind: ModelKind, state_count: usize, initial: usize, goal: usize, fail: usize) -> Self {
        ModelBuilder {
            kind,
            initial,
            goal,
            fail,
            labels: (0..state_count).map(|i| i.to_string()).collect(),
            actions: vec![Vec::new(); state_count],
        }
    }

    pub fn state_count(&self) -> usize {
        self.actions.len()
    }

    pub fn set_label(&mut self, state: usize, label: impl Into<String>) -> &mut Self {
        self.labels[state] = label.into();
        self
    }

    /// Adds a state and returns its index.
    pub fn add_state(&mut self, label: impl Into<String>) -> usize {
        self.labels.push(label.into());
        self.actions.push(Vec::new());
        self.actions.len() - 1
    }

    /// Adds `src --action--> dst` with probability `p`. Actions are ordered
    /// by first appearance. Returns `false` when the triple already exists.
    pub fn add(&mut self, src: usize, action: &str, dst: usize, p: Rational) -> Result<bool, ModelError> {
        let n = self.state_count();
        for idx in [src, dst] {
            if idx >= n {
                return Err(ModelError::StateOutOfRange { index: idx, count: n });
            }
        }
        if self.kind == ModelKind::Dtmc && action != "-" {
            return Err(ModelError::DtmcAction(action.to_string()));
        }
        if p <= Rational::zero() || p > Rational::one() {
            return Err(ModelError::BadProbability(format_rational(&p)));
        }
        let acts = &mut self.actions[src];
        let slot = match acts.iter().position(|(l, _)| l == action) {
            Some(i) => i,
            None => {
                acts.push((action.to_string(), BTreeMap::new()));
                acts.len() - 1
            }
        };
        Ok(acts[slot].1.insert(dst, p).is_none())
    }

    /// Adds probability mass to `src --action--> dst`, creating the edge if
    /// needed.
    pub fn accumulate(&mut self, src: usize, action: &str, dst: usize, p: Rational) {
        let acts = &mut self.actions[src];
        let slot = match acts.iter().position(|(l, _)| l == action) {
            Some(i) => i,
            None => {
                acts.push((action.to_string(), BTreeMap::new()));
                acts.len() - 1
            }
        };
        *acts[slot].1.entry(dst).or_insert_with(Rational::zero) += p;
    }

    pub fn build(self) -> Result<ReachMdp, ModelError> {
        let n = self.state_count();
        for idx in [self.initial, self.goal, self.fail] {
            if idx >= n {
                return Err(ModelError::StateOutOfRange { index: idx, count: n });
            }
        }
        if self.goal == self.fail {
            return Err(ModelError::GoalIsFail);
        }
        if self.initial == self.goal || self.initial == self.fail {
            return Err(ModelError::InitialIsTerminal);
        }
        let mut actions = Vec::with_capacity(n);
        for (state, acts) in self.actions.into_iter().enumerate() {
            let terminal = state == self.goal || state == self.fail;
            let mut built = Vec::with_capacity(acts.len());
            for (label, succ) in acts {
                let sum: Rational = succ.values().fold(Rational::zero(), |acc, p| acc + p);
                if terminal {
                    if let Some(&t) = succ.keys().find(|&&t| t != state) {
                        let which = if state == self.goal { "goal" } else { "fail" };
                        return Err(ModelError::NotAbsorbing { which, target: t });
                    }
                    if !sum.is_one() {
                        return Err(ModelError::NonStochastic { state, action: label, sum: format_rational(&sum) });
                    }
                    // Self-loops of the absorbing states stay implicit.
                    continue;
                }
                if !sum.is_one() {
                    return Err(ModelError::NonStochastic { state, action: label, sum: format_rational(&sum) });
                }
                if self.kind == ModelKind::Dtmc && !built.is_empty() {
                    return Err(ModelError::DtmcAction(label));
                }
                built.push(Action { label, successors: succ.into_iter().collect() });
            }
            if !terminal && built.is_empty() {
                return Err(ModelError::NoAction(state));
            }
            actions.push(built);
        }
        Ok(ReachMdp { kind: self.kind, labels: self.labels, initial: self.initial, goal: self.goal, fail: self.fail, actions })
    }
}
