//! Line-based model format.
//!
//! ```text
//! dtmc
//! states: 4
//! initial: 0
//! goal: 2
//! fail: 3
//! 0 - 1 1/2
//! ```
//!
//! `#` starts a comment. Transitions are `<src> <action> <dst> <prob>` with
//! the probability given as `p/q` or as a finite decimal.

use std::fmt::Write as _;

use super::{ModelBuilder, ModelKind, ReachMdp};
use crate::error::{ModelError, ParseError};
use crate::scalar::{format_rational, parse_rational};

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

pub fn parse_model(text: &str) -> Result<ReachMdp, ModelError> {
    let mut kind = None;
    let mut states = None;
    let mut initial = None;
    let mut goal = None;
    let mut fail = None;
    let mut builder: Option<ModelBuilder> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if kind.is_none() {
            kind = Some(match line {
                "mdp" => ModelKind::Mdp,
                "dtmc" => ModelKind::Dtmc,
                other => return Err(ParseError::syntax(line_no, format!("expected `mdp` or `dtmc`, found `{other}`")).into()),
            });
            continue;
        }
        if let Some((key, value)) = line.split_once(':') {
            if builder.is_some() {
                return Err(ParseError::syntax(line_no, "header after the first transition").into());
            }
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| ParseError::syntax(line_no, format!("expected a non-negative integer after `{key}:`")))?;
            let slot = match key.trim() {
                "states" => &mut states,
                "initial" => &mut initial,
                "goal" => &mut goal,
                "fail" => &mut fail,
                other => return Err(ParseError::syntax(line_no, format!("unknown header `{other}`")).into()),
            };
            if slot.replace(value).is_some() {
                return Err(ParseError::syntax(line_no, format!("duplicate header `{}`", key.trim())).into());
            }
            continue;
        }

        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(ParseError::syntax(line_no, "expected `<src> <action> <dst> <prob>`").into());
        }
        if builder.is_none() {
            let missing = |name: &str| ParseError::syntax(line_no, format!("missing `{name}:` header"));
            let n = states.ok_or_else(|| missing("states"))?;
            if n == 0 {
                return Err(ParseError::syntax(line_no, "model needs at least one state").into());
            }
            builder = Some(ModelBuilder::new(
                kind.unwrap(),
                n,
                initial.ok_or_else(|| missing("initial"))?,
                goal.ok_or_else(|| missing("goal"))?,
                fail.ok_or_else(|| missing("fail"))?,
            ));
        }
        let b = builder.as_mut().unwrap();
        let src: usize = tokens[0].parse().map_err(|_| ParseError::syntax(line_no, format!("bad source `{}`", tokens[0])))?;
        let dst: usize = tokens[2].parse().map_err(|_| ParseError::syntax(line_no, format!("bad target `{}`", tokens[2])))?;
        let p = parse_rational(tokens[3]).map_err(|_| ParseError::syntax(line_no, format!("bad probability `{}`", tokens[3])))?;
        if !b.add(src, tokens[1], dst, p)? {
            return Err(ModelError::DuplicateTransition { src, action: tokens[1].to_string(), dst, line: line_no });
        }
    }

    let kind = kind.ok_or_else(|| ParseError::syntax(0, "empty model"))?;
    let builder = match builder {
        Some(b) => b,
        None => {
            let missing = |name: &str| ParseError::syntax(0, format!("missing `{name}:` header"));
            ModelBuilder::new(
                kind,
                states.ok_or_else(|| missing("states"))?,
                initial.ok_or_else(|| missing("initial"))?,
                goal.ok_or_else(|| missing("goal"))?,
                fail.ok_or_else(|| missing("fail"))?,
            )
        }
    };
    builder.build()
}

pub fn serialize_model(m: &ReachMdp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", m.kind());
    let _ = writeln!(out, "states: {}", m.state_count());
    let _ = writeln!(out, "initial: {}", m.initial());
    let _ = writeln!(out, "goal: {}", m.goal());
    let _ = writeln!(out, "fail: {}", m.fail());
    for s in 0..m.state_count() {
        for action in m.actions(s) {
            for (t, p) in &action.successors {
                let _ = writeln!(out, "{s} {} {t} {}", action.label, format_rational(p));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::D1;
    use crate::scalar::rat;

    #[test]
    fn parses_d1() {
        let m = parse_model(D1).unwrap();
        assert_eq!(m.kind(), ModelKind::Dtmc);
        assert_eq!(m.state_count(), 4);
        assert_eq!((m.initial(), m.goal(), m.fail()), (0, 2, 3));
        assert_eq!(m.prob(0, 0, 1), rat(1, 2));
        assert_eq!(m.prob(1, 0, 3), rat(3, 5));
    }

    #[test]
    fn decimals_are_exact() {
        let text = "dtmc\nstates: 3\ninitial: 0\ngoal: 1\nfail: 2\n0 - 1 0.3\n0 - 2 0.7\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.prob(0, 0, 1), rat(3, 10));
    }

    #[test]
    fn rejects_substochastic_row() {
        let text = "dtmc\nstates: 3\ninitial: 0\ngoal: 1\nfail: 2\n0 - 1 0.5\n0 - 2 0.4\n";
        let err = parse_model(text).unwrap_err();
        assert!(err.to_string().starts_with("non-stochastic row"), "{err}");
    }

    #[test]
    fn rejects_goal_with_outgoing_edge() {
        let text = "dtmc\nstates: 4\ninitial: 0\ngoal: 2\nfail: 3\n0 - 2 1\n1 - 2 1\n2 - 1 1\n";
        let err = parse_model(text).unwrap_err();
        assert!(err.to_string().starts_with("goal not absorbing"), "{err}");
    }

    #[test]
    fn rejects_duplicate_triple() {
        let text = "mdp\nstates: 3\ninitial: 0\ngoal: 1\nfail: 2\n0 a 1 1/2\n0 a 1 1/2\n";
        assert!(matches!(parse_model(text).unwrap_err(), ModelError::DuplicateTransition { line: 7, .. }));
    }

    #[test]
    fn rejects_terminal_initial_state() {
        let text = "dtmc\nstates: 3\ninitial: 1\ngoal: 1\nfail: 2\n0 - 1 1\n";
        assert_eq!(parse_model(text).unwrap_err(), ModelError::InitialIsTerminal);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "dtmc\n# comment\nstates: 3\ninitial: 0\ngoal: 1\nfail: 2\n0 - 1\n";
        assert_eq!(parse_model(text).unwrap_err(), ModelError::Parse(ParseError::syntax(7, "expected `<src> <action> <dst> <prob>`")));
        let text = "ctmc\n";
        assert!(matches!(parse_model(text).unwrap_err(), ModelError::Parse(ParseError::Syntax { line: 1, .. })));
    }

    #[test]
    fn dtmc_requires_dash_label() {
        let text = "dtmc\nstates: 3\ninitial: 0\ngoal: 1\nfail: 2\n0 a 1 1\n";
        assert_eq!(parse_model(text).unwrap_err(), ModelError::DtmcAction("a".into()));
    }

    #[test]
    fn absorbing_self_loops_are_accepted() {
        let text = format!("{D1}2 - 2 1\n3 - 3 1\n");
        assert_eq!(parse_model(&text).unwrap(), parse_model(D1).unwrap());
    }

    #[test]
    fn serialization_is_stable() {
        let m = parse_model(D1).unwrap();
        let text = serialize_model(&m);
        assert_eq!(text, "dtmc\nstates: 4\ninitial: 0\ngoal: 2\nfail: 3\n0 - 1 1/2\n0 - 2 3/10\n0 - 3 1/5\n1 - 2 2/5\n1 - 3 3/5\n");
        assert_eq!(parse_model(&text).unwrap(), m);
    }
}
