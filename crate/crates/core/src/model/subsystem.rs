//! Subsystems (deleted transitions redirected to fail) and scheduler-induced
//! chains.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_traits::{One, Zero};

use super::{parse_model, serialize_model, ModelBuilder, ModelKind, Pair, ReachMdp};
use crate::error::{ModelError, ParseError};
use crate::scalar::{format_rational, Rational};

/// What a subsystem keeps: whole states (all their actions) or individual
/// state-action pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    States(BTreeSet<usize>),
    Pairs(BTreeSet<Pair>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsystem {
    pub mdp: ReachMdp,
    /// The kept pairs, in parent indices.
    pub kept_pairs: BTreeSet<Pair>,
    /// `parent_state_map[i]` is the parent index of subsystem state `i`.
    pub parent_state_map: Vec<usize>,
}

impl Subsystem {
    /// Number of non-terminal states of the subsystem.
    pub fn state_count(&self) -> usize {
        self.mdp.state_count() - 2
    }

    /// Parent indices of the kept non-terminal states.
    pub fn kept_states(&self) -> Vec<usize> {
        self.parent_state_map.iter().copied().filter(|&s| s != usize::MAX).enumerate()
            .filter(|&(i, _)| !self.mdp.is_terminal(i))
            .map(|(_, s)| s)
            .collect()
    }

    /// Model format followed by `# kept-pair` and `# parent-state` lines.
    pub fn to_text(&self, parent: &ReachMdp) -> String {
        let mut out = serialize_model(&self.mdp);
        for &(s, a) in &self.kept_pairs {
            let _ = writeln!(out, "# kept-pair {s} {}", parent.actions(s)[a].label);
        }
        for (i, p) in self.parent_state_map.iter().enumerate() {
            let _ = writeln!(out, "# parent-state {i} {p}");
        }
        out
    }

    /// Reads the output of [`Subsystem::to_text`] back, resolving action
    /// labels against `parent`.
    pub fn from_text(text: &str, parent: &ReachMdp) -> Result<Subsystem, ModelError> {
        let mdp = parse_model(text)?;
        let mut kept_pairs = BTreeSet::new();
        let mut parent_state_map = vec![usize::MAX; mdp.state_count()];
        for (idx, line) in text.lines().enumerate() {
            let bad = || ParseError::syntax(idx + 1, "malformed subsystem annotation");
            let Some(rest) = line.trim().strip_prefix('#') else { continue };
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            match tokens.first().copied() {
                Some("kept-pair") if tokens.len() == 3 => {
                    let s: usize = tokens[1].parse().map_err(|_| bad())?;
                    let a = parent
                        .actions(s.min(parent.state_count().saturating_sub(1)))
                        .iter()
                        .position(|act| act.label == tokens[2])
                        .ok_or_else(bad)?;
                    kept_pairs.insert((s, a));
                }
                Some("parent-state") if tokens.len() == 3 => {
                    let i: usize = tokens[1].parse().map_err(|_| bad())?;
                    let p: usize = tokens[2].parse().map_err(|_| bad())?;
                    *parent_state_map.get_mut(i).ok_or_else(bad)? = p;
                }
                _ => {}
            }
        }
        Ok(Subsystem { mdp, kept_pairs, parent_state_map })
    }
}

fn expand(m: &ReachMdp, selection: &Selection) -> Result<BTreeSet<Pair>, ModelError> {
    let n = m.state_count();
    let mut pairs = BTreeSet::new();
    match selection {
        Selection::States(states) => {
            for &s in states {
                if s >= n {
                    return Err(ModelError::StateOutOfRange { index: s, count: n });
                }
                pairs.extend((0..m.actions(s).len()).map(|a| (s, a)));
            }
        }
        Selection::Pairs(ps) => {
            for &(s, a) in ps {
                if s >= n {
                    return Err(ModelError::StateOutOfRange { index: s, count: n });
                }
                if a >= m.actions(s).len() {
                    return Err(ModelError::Dimension { expected: m.actions(s).len(), found: a + 1 });
                }
                pairs.insert((s, a));
            }
        }
    }
    Ok(pairs)
}

/// Builds the subsystem keeping the selected pairs. Kept pairs keep their
/// mass to kept states and to goal/fail, the rest of their mass and every
/// non-kept pair of a kept state go to fail. The initial state is always
/// retained.
pub fn restrict(m: &ReachMdp, selection: &Selection) -> Result<Subsystem, ModelError> {
    let kept_pairs = expand(m, selection)?;
    let mut keep_state = vec![false; m.state_count()];
    keep_state[m.initial()] = true;
    keep_state[m.goal()] = true;
    keep_state[m.fail()] = true;
    for &(s, _) in &kept_pairs {
        keep_state[s] = true;
    }
    let keeps = |s: usize, a: usize, _t: usize| kept_pairs.contains(&(s, a));
    let mdp_and_map = build_sub(m, &keep_state, keeps);
    Ok(Subsystem { mdp: mdp_and_map.0, kept_pairs, parent_state_map: mdp_and_map.1 })
}

/// General subsystem keeping exactly the given transitions `(s, a, t)`.
/// Kept states are the initial state and the sources of kept transitions.
pub fn restrict_transitions(m: &ReachMdp, transitions: &BTreeSet<(usize, usize, usize)>) -> Result<Subsystem, ModelError> {
    let n = m.state_count();
    let mut keep_state = vec![false; n];
    keep_state[m.initial()] = true;
    keep_state[m.goal()] = true;
    keep_state[m.fail()] = true;
    let mut kept_pairs = BTreeSet::new();
    for &(s, a, t) in transitions {
        if s >= n || t >= n {
            return Err(ModelError::StateOutOfRange { index: s.max(t), count: n });
        }
        if a >= m.actions(s).len() {
            return Err(ModelError::Dimension { expected: m.actions(s).len(), found: a + 1 });
        }
        keep_state[s] = true;
        kept_pairs.insert((s, a));
    }
    let keeps = |s: usize, a: usize, t: usize| transitions.contains(&(s, a, t));
    let (mdp, map) = build_sub(m, &keep_state, keeps);
    Ok(Subsystem { mdp, kept_pairs, parent_state_map: map })
}

fn build_sub(m: &ReachMdp, keep_state: &[bool], keeps: impl Fn(usize, usize, usize) -> bool) -> (ReachMdp, Vec<usize>) {
    let kept: Vec<usize> = (0..m.state_count()).filter(|&s| keep_state[s]).collect();
    let mut new_index = vec![usize::MAX; m.state_count()];
    for (i, &s) in kept.iter().enumerate() {
        new_index[s] = i;
    }
    let fail = new_index[m.fail()];
    let mut b = ModelBuilder::new(m.kind(), kept.len(), new_index[m.initial()], new_index[m.goal()], fail);
    for (i, &s) in kept.iter().enumerate() {
        b.set_label(i, m.label(s));
        if m.is_terminal(s) {
            continue;
        }
        for (a, action) in m.actions(s).iter().enumerate() {
            let mut lost = Rational::zero();
            for (t, p) in &action.successors {
                if keep_state[*t] && keeps(s, a, *t) {
                    b.accumulate(i, &action.label, new_index[*t], p.clone());
                } else {
                    lost += p;
                }
            }
            if !lost.is_zero() {
                b.accumulate(i, &action.label, fail, lost);
            }
        }
    }
    let mdp = b.build().expect("redirected rows remain stochastic");
    (mdp, kept)
}

/// Memoryless randomized scheduler: per state, one weight per enabled
/// action (empty for goal and fail).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrScheduler {
    pub weights: Vec<Vec<Rational>>,
}

impl MrScheduler {
    /// Deterministic scheduler picking `choice[s]` in every non-terminal
    /// state.
    pub fn deterministic(m: &ReachMdp, choice: &[usize]) -> MrScheduler {
        let weights = (0..m.state_count())
            .map(|s| {
                let k = m.actions(s).len();
                (0..k).map(|a| if a == choice[s] { Rational::one() } else { Rational::zero() }).collect()
            })
            .collect();
        MrScheduler { weights }
    }

    pub fn first_action(m: &ReachMdp) -> MrScheduler {
        MrScheduler::deterministic(m, &vec![0; m.state_count()])
    }

    /// Chosen action when the scheduler is deterministic at `state`.
    pub fn choice(&self, state: usize) -> Option<usize> {
        let w = &self.weights[state];
        let mut support = w.iter().enumerate().filter(|(_, x)| !x.is_zero());
        match (support.next(), support.next()) {
            (Some((a, _)), None) => Some(a),
            _ => None,
        }
    }

    pub fn check(&self, m: &ReachMdp) -> Result<(), ModelError> {
        if self.weights.len() != m.state_count() {
            return Err(ModelError::Dimension { expected: m.state_count(), found: self.weights.len() });
        }
        for s in m.nonterminal_states() {
            let w = &self.weights[s];
            let err = |reason: String| ModelError::Scheduler { state: s, reason };
            if w.len() > m.actions(s).len() {
                return Err(err(format!("{} weights for {} enabled actions", w.len(), m.actions(s).len())));
            }
            if w.iter().any(|x| x < &Rational::zero()) {
                return Err(err("negative weight".into()));
            }
            let sum: Rational = w.iter().fold(Rational::zero(), |acc, x| acc + x);
            if !sum.is_one() {
                return Err(err(format!("weights sum to {}", format_rational(&sum))));
            }
        }
        Ok(())
    }
}

/// The DTMC induced by a memoryless randomized scheduler.
pub fn induced_dtmc(m: &ReachMdp, sched: &MrScheduler) -> Result<ReachMdp, ModelError> {
    sched.check(m)?;
    let mut b = ModelBuilder::new(ModelKind::Dtmc, m.state_count(), m.initial(), m.goal(), m.fail());
    for s in 0..m.state_count() {
        b.set_label(s, m.label(s));
        if m.is_terminal(s) {
            continue;
        }
        for (a, w) in sched.weights[s].iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for (t, p) in &m.actions(s)[a].successors {
                b.accumulate(s, "-", *t, p * w);
            }
        }
    }
    b.build()
}
