//! Reductions of transition- and size-minimality to state-minimality: every
//! transition of the model becomes a state of its own.

use std::collections::BTreeSet;

use num_traits::One;

use crate::error::ModelError;
use crate::model::{restrict_transitions, ModelBuilder, ReachMdp, Subsystem};
use crate::scalar::Rational;

/// What a state of a reduced model stands for in the original.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    State(usize),
    Transition(usize, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReductionKind {
    /// States and transitions both become states.
    SizeToState,
    /// Only transitions (and the initial state) become states.
    TransitionToState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub kind: ReductionKind,
    pub model: ReachMdp,
    /// `origin[i]` for every state `i` of `model`.
    pub origin: Vec<Origin>,
}

impl Reduction {
    /// The original transitions kept by a subsystem of the reduced model.
    /// For the size reduction a transition counts only if its source state
    /// is kept too.
    pub fn kept_transitions(&self, sub: &Subsystem) -> BTreeSet<(usize, usize, usize)> {
        let kept: BTreeSet<Origin> = sub.kept_states().into_iter().map(|s| self.origin[s]).collect();
        kept.iter()
            .filter_map(|o| match *o {
                Origin::Transition(s, a, t) if self.kind == ReductionKind::TransitionToState || kept.contains(&Origin::State(s)) => {
                    Some((s, a, t))
                }
                _ => None,
            })
            .collect()
    }

    /// The subsystem of `parent` keeping the transitions of `sub`.
    pub fn pull_back(&self, parent: &ReachMdp, sub: &Subsystem) -> Result<Subsystem, ModelError> {
        restrict_transitions(parent, &self.kept_transitions(sub))
    }
}

fn triples(m: &ReachMdp) -> Vec<(usize, usize, usize, Rational)> {
    let mut out = Vec::new();
    for (s, a) in m.pairs() {
        for (t, p) in &m.actions(s)[a].successors {
            out.push((s, a, *t, p.clone()));
        }
    }
    out
}

/// States `S_all ∪ T`: `s -α-> (s,α,t)` with `P(s,α,t)` and
/// `(s,α,t) -α-> t` with probability one. Original states keep their
/// indices; transition states follow in pair and target order.
pub fn reduce_size_to_state(m: &ReachMdp) -> Result<Reduction, ModelError> {
    let ts = triples(m);
    let base = m.state_count();
    let mut b = ModelBuilder::new(m.kind(), base + ts.len(), m.initial(), m.goal(), m.fail());
    let mut origin: Vec<Origin> = (0..base).map(Origin::State).collect();
    for s in 0..base {
        b.set_label(s, m.label(s));
    }
    for (i, (s, a, t, p)) in ts.iter().enumerate() {
        let idx = base + i;
        let label = &m.actions(*s)[*a].label;
        b.set_label(idx, format!("{}.{}.{}", m.label(*s), label, m.label(*t)));
        b.accumulate(*s, label, idx, p.clone());
        b.accumulate(idx, label, *t, Rational::one());
        origin.push(Origin::Transition(*s, *a, *t));
    }
    Ok(Reduction { kind: ReductionKind::SizeToState, model: b.build()?, origin })
}

/// States `T ∪ {s0, goal, fail}`: `s0 -α-> (s0,α,t)`, `(s,α,t) -β->
/// (t,β,u)` with `P(t,β,u)`, and transitions into goal or fail lead there
/// with probability one. Numbering: `s0`, the transitions, goal, fail.
pub fn reduce_transition_to_state(m: &ReachMdp) -> Result<Reduction, ModelError> {
    let ts = triples(m);
    let index_of = |s: usize, a: usize, t: usize| 1 + ts.iter().position(|(x, y, z, _)| (*x, *y, *z) == (s, a, t)).expect("triple exists");
    let goal = ts.len() + 1;
    let fail = goal + 1;
    let mut b = ModelBuilder::new(m.kind(), fail + 1, 0, goal, fail);
    let mut origin = vec![Origin::State(m.initial())];
    b.set_label(0, m.label(m.initial())).set_label(goal, m.label(m.goal())).set_label(fail, m.label(m.fail()));
    for (a, action) in m.actions(m.initial()).iter().enumerate() {
        for (t, p) in &action.successors {
            b.accumulate(0, &action.label, index_of(m.initial(), a, *t), p.clone());
        }
    }
    for (i, (s, a, t, _)) in ts.iter().enumerate() {
        let idx = i + 1;
        b.set_label(idx, format!("{}.{}.{}", m.label(*s), m.actions(*s)[*a].label, m.label(*t)));
        origin.push(Origin::Transition(*s, *a, *t));
        if *t == m.goal() {
            b.accumulate(idx, &m.actions(*s)[*a].label, goal, Rational::one());
        } else if *t == m.fail() {
            b.accumulate(idx, &m.actions(*s)[*a].label, fail, Rational::one());
        } else {
            for (beta, action) in m.actions(*t).iter().enumerate() {
                for (u, p) in &action.successors {
                    b.accumulate(idx, &action.label, index_of(*t, beta, *u), p.clone());
                }
            }
        }
    }
    origin.push(Origin::State(m.goal()));
    origin.push(Origin::State(m.fail()));
    Ok(Reduction { kind: ReductionKind::TransitionToState, model: b.build()?, origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::reach_probability;
    use crate::model::fixtures::*;
    use crate::model::{restrict, Direction, Selection};

    #[test]
    fn d1_size_reduction() {
        let r = reduce_size_to_state(&d1()).unwrap();
        assert_eq!(r.model.nonterminal_states().len(), 7);
        assert_eq!(reach_probability(&r.model, Direction::Min).unwrap(), reach_probability(&d1(), Direction::Min).unwrap());
    }

    #[test]
    fn d1_transition_reduction() {
        let r = reduce_transition_to_state(&d1()).unwrap();
        assert_eq!(r.model.state_count(), 5 + 3);
        assert_eq!(reach_probability(&r.model, Direction::Max).unwrap(), reach_probability(&d1(), Direction::Max).unwrap());
    }

    #[test]
    fn sure_goal_size_reduction() {
        let r = reduce_size_to_state(&sure_goal()).unwrap();
        assert_eq!(r.model.nonterminal_states().len(), 2);
    }

    #[test]
    fn mdp_reductions_preserve_both_directions() {
        let m = coin_choice();
        for r in [reduce_size_to_state(&m).unwrap(), reduce_transition_to_state(&m).unwrap()] {
            assert_eq!(reach_probability(&r.model, Direction::Min).unwrap(), Rational::from_integer(0.into()));
            assert_eq!(reach_probability(&r.model, Direction::Max).unwrap(), Rational::one());
        }
    }

    #[test]
    fn pull_back_of_transition_witness() {
        let m = d1();
        let r = reduce_transition_to_state(&m).unwrap();
        // keep s0 and the triple (s0,-,goal)
        let goal_triple = r.origin.iter().position(|o| *o == Origin::Transition(0, 0, 2)).unwrap();
        let sub = restrict(&r.model, &Selection::States(BTreeSet::from([0, goal_triple]))).unwrap();
        assert_eq!(r.kept_transitions(&sub), BTreeSet::from([(0, 0, 2)]));
        let back = r.pull_back(&m, &sub).unwrap();
        assert_eq!(reach_probability(&back.mdp, Direction::Min).unwrap(), crate::scalar::rat(3, 10));
    }
}
