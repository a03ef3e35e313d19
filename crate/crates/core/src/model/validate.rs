use std::collections::VecDeque;

use super::{ModelBuilder, ReachMdp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub check: &'static str,
    pub states: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport { ok: violations.is_empty(), violations }
    }

    pub fn render(&self) -> String {
        if self.ok {
            return "ok\n".to_string();
        }
        let mut out = String::new();
        for v in &self.violations {
            let states: Vec<String> = v.states.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!("violation {}: {}\n", v.check, states.join(" ")));
        }
        out
    }
}

pub const CHECK_UNREACHABLE: &str = "unreachable";
pub const CHECK_TRAPPED: &str = "avoids-goal-and-fail";

/// States reachable from `from` in the underlying graph.
pub fn reachable_from(m: &ReachMdp, from: usize) -> Vec<bool> {
    let mut seen = vec![false; m.state_count()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(s) = queue.pop_front() {
        for t in m.successors(s) {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}

/// States from which some scheduler avoids goal and fail forever: the
/// greatest `Z` such that every state of `Z` has an action staying in `Z`.
pub(crate) fn trapped_states(m: &ReachMdp) -> Vec<usize> {
    let mut in_z: Vec<bool> = (0..m.state_count()).map(|s| !m.is_terminal(s)).collect();
    loop {
        let mut changed = false;
        for s in 0..m.state_count() {
            if !in_z[s] {
                continue;
            }
            let stays = m.actions(s).iter().any(|a| a.successors.iter().all(|(t, _)| in_z[*t]));
            if !stays {
                in_z[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..m.state_count()).filter(|&s| in_z[s]).collect()
}

/// Checks that every non-terminal state is reachable from the initial state
/// and that goal or fail is reached with positive probability under every
/// scheduler.
pub fn validate(m: &ReachMdp) -> ValidationReport {
    let mut violations = Vec::new();
    let reach = reachable_from(m, m.initial());
    let unreachable: Vec<usize> = m.nonterminal_states().into_iter().filter(|&s| !reach[s]).collect();
    if !unreachable.is_empty() {
        violations.push(Violation { check: CHECK_UNREACHABLE, states: unreachable });
    }
    let trapped = trapped_states(m);
    if !trapped.is_empty() {
        violations.push(Violation { check: CHECK_TRAPPED, states: trapped });
    }
    ValidationReport::from_violations(violations)
}

/// Restriction to the states reachable from the initial state. Goal and
/// fail are always kept; indices are renumbered in ascending order.
pub fn prune_unreachable(m: &ReachMdp) -> ReachMdp {
    let reach = reachable_from(m, m.initial());
    let kept: Vec<usize> = (0..m.state_count()).filter(|&s| reach[s] || m.is_terminal(s)).collect();
    let mut new_index = vec![usize::MAX; m.state_count()];
    for (i, &s) in kept.iter().enumerate() {
        new_index[s] = i;
    }
    let mut b = ModelBuilder::new(m.kind(), kept.len(), new_index[m.initial()], new_index[m.goal()], new_index[m.fail()]);
    for (i, &s) in kept.iter().enumerate() {
        b.set_label(i, m.label(s));
        for action in m.actions(s) {
            for (t, p) in &action.successors {
                b.accumulate(i, &action.label, new_index[*t], p.clone());
            }
        }
    }
    b.build().expect("pruning keeps every row of a well-formed model intact")
}
