//! The four Farkas certificates for threshold reachability properties,
//! their exact verification, and the translation between certificate
//! vectors, schedulers and expected visiting frequencies.
//!
//! | property        | kind | condition                               |
//! |-----------------|------|-----------------------------------------|
//! | `min >= / >`    | z    | `Az <= b`, `z(s0) rel λ`                 |
//! | `max >= / >`    | y    | `y >= 0`, `yA <= δ`, `y·b rel λ`         |
//! | `min <= / <`    | y    | `y >= 0`, `yA >= δ`, `y·b rel λ`         |
//! | `max <= / <`    | z    | `Az >= b`, `z(s0) rel λ`                 |

use std::fmt;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

use crate::error::{CertificateError, ParseError};
use crate::linsys::{build_farkas_system, optimal_policy, solve_dense, solve_lp, Cmp, FarkasSystem, LinearProgram, Sense};
use crate::model::{Direction, MrScheduler, PropertySpec, ReachMdp};
use crate::scalar::{format_rational, parse_rational, rationalize, Rational, Scalar, DEFAULT_DENOMINATOR_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CertificateKind {
    /// A vector over the states `S`.
    Z,
    /// A non-negative vector over the enabled pairs `M`.
    Y,
}

impl CertificateKind {
    pub fn for_property(prop: &PropertySpec) -> CertificateKind {
        match (prop.direction, prop.relation.is_lower_bound()) {
            (Direction::Min, true) | (Direction::Max, false) => CertificateKind::Z,
            _ => CertificateKind::Y,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CertificateKind::Z => "z",
            CertificateKind::Y => "y",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FarkasCertificate {
    pub prop: PropertySpec,
    pub kind: CertificateKind,
    pub vector: Vec<Rational>,
}

/// Which scalar inequality of a certificate condition failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    /// Row `(s, α)` of `Az <= b` or `Az >= b`.
    Row { state: usize, action: String },
    /// Column `s` of `yA <= δ` or `yA >= δ`.
    Column { state: usize },
    /// `y(s, α) >= 0`.
    NonNegative { state: usize, action: String },
    /// The threshold comparison at the initial state.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateViolation {
    pub constraint: Constraint,
    /// By how much the inequality is violated (zero for a strict
    /// comparison that holds with equality).
    pub excess: Rational,
}

impl fmt::Display for CertificateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.constraint {
            Constraint::Row { state, action } => write!(f, "row ({state},{action})")?,
            Constraint::Column { state } => write!(f, "column {state}")?,
            Constraint::NonNegative { state, action } => write!(f, "sign of ({state},{action})")?,
            Constraint::Threshold => write!(f, "threshold")?,
        }
        write!(f, " violated by {}", format_rational(&self.excess))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub ok: bool,
    pub violations: Vec<CertificateViolation>,
}

impl VerificationReport {
    pub fn render(&self) -> String {
        if self.ok {
            return "verified\n".into();
        }
        self.violations.iter().map(|v| format!("rejected: {v}\n")).collect()
    }
}

fn expected_len(sys: &FarkasSystem<Rational>, kind: CertificateKind) -> usize {
    match kind {
        CertificateKind::Z => sys.cols(),
        CertificateKind::Y => sys.rows(),
    }
}

/// Checks the certificate condition in exact arithmetic, using nothing but
/// the transition function of `m`.
pub fn verify_certificate(m: &ReachMdp, cert: &FarkasCertificate) -> Result<VerificationReport, CertificateError> {
    let expected = CertificateKind::for_property(&cert.prop);
    if cert.kind != expected {
        return Err(CertificateError::KindMismatch { expected: expected.as_str(), found: cert.kind.as_str() });
    }
    let sys = build_farkas_system::<Rational>(m);
    let n = expected_len(&sys, cert.kind);
    if cert.vector.len() != n {
        return Err(CertificateError::Dimension { expected: n, found: cert.vector.len() });
    }
    let prop = &cert.prop;
    let v = &cert.vector;
    let label = |r: usize| {
        let (s, a) = sys.row_index[r];
        (s, m.actions(s)[a].label.clone())
    };
    let mut violations = Vec::new();
    let value = match cert.kind {
        CertificateKind::Z => {
            // min: Az <= b, max: Az >= b
            let upper = prop.direction == Direction::Min;
            for (r, az) in sys.a_mul(v).into_iter().enumerate() {
                let excess = if upper { az - &sys.b[r] } else { &sys.b[r] - az };
                if excess.is_positive() {
                    let (state, action) = label(r);
                    violations.push(CertificateViolation { constraint: Constraint::Row { state, action }, excess });
                }
            }
            v[sys.initial_col()].clone()
        }
        CertificateKind::Y => {
            for (r, y) in v.iter().enumerate() {
                if y.is_negative() {
                    let (state, action) = label(r);
                    violations.push(CertificateViolation { constraint: Constraint::NonNegative { state, action }, excess: -y.clone() });
                }
            }
            // max: yA <= δ, min: yA >= δ
            let upper = prop.direction == Direction::Max;
            for (c, ya) in sys.mul_a(v).into_iter().enumerate() {
                let excess = if upper { ya - &sys.delta0[c] } else { &sys.delta0[c] - ya };
                if excess.is_positive() {
                    violations.push(CertificateViolation { constraint: Constraint::Column { state: sys.col_index[c] }, excess });
                }
            }
            sys.b_dot(v)
        }
    };
    if !prop.holds_for(&value) {
        let excess = (&value - &prop.lambda).abs();
        violations.push(CertificateViolation { constraint: Constraint::Threshold, excess });
    }
    Ok(VerificationReport { ok: violations.is_empty(), violations })
}

/// Produces an exactly verified certificate for `prop`, or explains why
/// none exists.
pub fn generate_certificate(m: &ReachMdp, prop: &PropertySpec) -> Result<FarkasCertificate, CertificateError> {
    let (choice, values) = optimal_policy(m, prop.direction)?;
    let pr = &values[m.initial()];
    if !prop.relation.non_strict().holds(pr, &prop.lambda) {
        return Err(CertificateError::PropertyFalse(format!(
            "Pr^{}(<>goal) = {} but the threshold is {} {}",
            prop.direction,
            format_rational(pr),
            prop.relation.symbol(),
            format_rational(&prop.lambda)
        )));
    }
    if prop.relation.is_strict() && *pr == prop.lambda {
        return Err(CertificateError::StrictInfeasible(format_rational(&prop.lambda)));
    }
    let kind = CertificateKind::for_property(prop);
    let cert = match kind {
        CertificateKind::Z => {
            let vector = m.nonterminal_states().into_iter().map(|s| values[s].clone()).collect();
            FarkasCertificate { prop: prop.clone(), kind, vector }
        }
        CertificateKind::Y => match y_from_lp(m, prop) {
            Some(c) => c,
            None => {
                // The frequencies of an optimal deterministic scheduler meet
                // yA = δ and y·b = Pr exactly.
                let sched = MrScheduler::deterministic(m, &choice);
                let vector = frequencies_from_scheduler(m, &sched)?;
                FarkasCertificate { prop: prop.clone(), kind, vector }
            }
        },
    };
    let report = verify_certificate(m, &cert)?;
    if !report.ok {
        return Err(CertificateError::Internal(format!("generated certificate fails verification: {}", report.render().trim_end())));
    }
    Ok(cert)
}

/// Float LP for a y-certificate, rationalized and, if needed, repaired.
fn y_from_lp(m: &ReachMdp, prop: &PropertySpec) -> Option<FarkasCertificate> {
    let sys = build_farkas_system::<f64>(m);
    let (sense, cmp) = match prop.direction {
        Direction::Max => (Sense::Maximize, Cmp::Le),
        Direction::Min => (Sense::Minimize, Cmp::Ge),
    };
    let lp = y_polytope_lp(&sys, sense, cmp, sys.b.clone());
    let sol = solve_lp(&lp).ok()?;
    if !sol.is_optimal() {
        return None;
    }
    let vector: Vec<Rational> = sol
        .x
        .iter()
        .map(|&x| if x <= 0.0 { Rational::zero() } else { rationalize(x, DEFAULT_DENOMINATOR_CAP) })
        .collect();
    let cert = FarkasCertificate { prop: prop.clone(), kind: CertificateKind::Y, vector };
    if verify_certificate(m, &cert).ok()?.ok {
        return Some(cert);
    }
    for eps in [1e-9, 1e-7, 1e-5] {
        if let Ok(c) = repair_certificate(m, &cert, &rationalize(eps, DEFAULT_DENOMINATOR_CAP)) {
            return Some(c);
        }
    }
    None
}

/// `opt objective·y s.t. y >= 0, yA cmp δ`, one variable per pair.
pub(crate) fn y_polytope_lp<T: Scalar>(sys: &FarkasSystem<T>, sense: Sense, cmp: Cmp, objective: Vec<T>) -> LinearProgram<T> {
    let mut columns: Vec<Vec<(usize, T)>> = vec![Vec::new(); sys.cols()];
    for (r, row) in sys.a.iter().enumerate() {
        for (c, v) in row {
            columns[*c].push((r, v.clone()));
        }
    }
    let mut lp = LinearProgram::new(sense, objective);
    for (c, col) in columns.into_iter().enumerate() {
        lp.add_constraint(col, cmp, sys.delta0[c].clone());
    }
    lp
}

/// Applies the closed-form slack repair with margin `eps` and re-verifies:
/// `z - ε·1` for `min >=`, `z + ε·1` for `max <=`, `(1-ε)·y` for
/// `max >=` and `(1+ε)·y` for `min <=`.
pub fn repair_certificate(m: &ReachMdp, cert: &FarkasCertificate, eps: &Rational) -> Result<FarkasCertificate, CertificateError> {
    let one = Rational::one();
    let vector: Vec<Rational> = match (cert.kind, cert.prop.direction) {
        (CertificateKind::Z, Direction::Min) => cert.vector.iter().map(|z| z - eps).collect(),
        (CertificateKind::Z, Direction::Max) => cert.vector.iter().map(|z| z + eps).collect(),
        (CertificateKind::Y, Direction::Max) => cert.vector.iter().map(|y| y * (&one - eps)).collect(),
        (CertificateKind::Y, Direction::Min) => cert.vector.iter().map(|y| y * (&one + eps)).collect(),
    };
    let repaired = FarkasCertificate { prop: cert.prop.clone(), kind: cert.kind, vector };
    let report = verify_certificate(m, &repaired)?;
    if report.ok {
        Ok(repaired)
    } else {
        Err(CertificateError::RepairFailed(report.render().trim_end().replace('\n', "; ")))
    }
}

/// Normalizes `y` per state; states with zero total weight get their first
/// action.
pub fn scheduler_from_y(m: &ReachMdp, y: &[Rational]) -> Result<MrScheduler, CertificateError> {
    let pairs = m.pairs();
    if y.len() != pairs.len() {
        return Err(CertificateError::Dimension { expected: pairs.len(), found: y.len() });
    }
    if let Some(i) = y.iter().position(|v| v.is_negative()) {
        return Err(CertificateError::NegativeEntry(i));
    }
    let mut weights: Vec<Vec<Rational>> = (0..m.state_count()).map(|s| vec![Rational::zero(); m.actions(s).len()]).collect();
    for (&(s, a), v) in pairs.iter().zip(y) {
        weights[s][a] = v.clone();
    }
    for s in m.nonterminal_states() {
        let total: Rational = weights[s].iter().sum();
        if total.is_zero() {
            weights[s][0] = Rational::one();
        } else {
            for w in &mut weights[s] {
                *w = &*w / &total;
            }
        }
    }
    Ok(MrScheduler { weights })
}

/// Expected number of visits to each pair under `sched`: solves
/// `h(I - Q) = δ` exactly and returns `y(s,α) = h(s)·sched(s)(α)` in the
/// row order of the Farkas system.
pub fn frequencies_from_scheduler(m: &ReachMdp, sched: &MrScheduler) -> Result<Vec<Rational>, CertificateError> {
    sched.check(m)?;
    crate::linsys::require_stopping(m)?;
    let states = m.nonterminal_states();
    let mut col_of = vec![usize::MAX; m.state_count()];
    for (c, &s) in states.iter().enumerate() {
        col_of[s] = c;
    }
    let n = states.len();
    // transposed system (I - Q)^T h = δ
    let mut a = vec![vec![Rational::zero(); n]; n];
    for (c, &s) in states.iter().enumerate() {
        a[c][c] += Rational::one();
        for (act, w) in sched.weights[s].iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for (t, p) in &m.actions(s)[act].successors {
                if col_of[*t] != usize::MAX {
                    a[col_of[*t]][c] -= w * p;
                }
            }
        }
    }
    let rhs = states.iter().map(|&s| if s == m.initial() { Rational::one() } else { Rational::zero() }).collect();
    let h = solve_dense(a, rhs).ok_or_else(|| CertificateError::Internal("singular frequency system".into()))?;
    Ok(m.pairs()
        .into_iter()
        .map(|(s, act)| {
            let w = sched.weights[s].get(act).cloned().unwrap_or_else(Rational::zero);
            &h[col_of[s]] * w
        })
        .collect())
}

/// Text form: header, property, kind, then `<index> <value>` for the
/// non-zero entries.
pub fn write_certificate(cert: &FarkasCertificate) -> String {
    let mut out = String::from("farkas-certificate\n");
    let _ = writeln!(out, "property: {}", cert.prop.to_keyword_form());
    let _ = writeln!(out, "kind: {}", cert.kind.as_str());
    for (i, v) in cert.vector.iter().enumerate() {
        if !v.is_zero() {
            let _ = writeln!(out, "{i} {}", format_rational(v));
        }
    }
    out
}

/// Reads a certificate for model `m`; omitted entries are zero.
pub fn read_certificate(text: &str, m: &ReachMdp) -> Result<FarkasCertificate, CertificateError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "farkas-certificate")) => {}
        Some((n, _)) => return Err(ParseError::syntax(n, "expected `farkas-certificate`").into()),
        None => return Err(ParseError::syntax(1, "empty certificate").into()),
    }
    let mut prop = None;
    let mut kind = None;
    let mut entries = Vec::new();
    for (n, line) in lines {
        if let Some(rest) = line.strip_prefix("property:") {
            prop = Some(PropertySpec::from_keyword_form(rest.trim()).map_err(|e| relocate(e, n))?);
        } else if let Some(rest) = line.strip_prefix("kind:") {
            kind = Some(match rest.trim() {
                "z" => CertificateKind::Z,
                "y" => CertificateKind::Y,
                other => return Err(ParseError::syntax(n, format!("unknown kind `{other}`")).into()),
            });
        } else {
            let mut parts = line.split_whitespace();
            let (Some(i), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ParseError::syntax(n, "expected `<index> <value>`").into());
            };
            let i: usize = i.parse().map_err(|_| ParseError::syntax(n, format!("bad index `{i}`")))?;
            let v = parse_rational(v).map_err(|e| relocate(e, n))?;
            entries.push((n, i, v));
        }
    }
    let prop = prop.ok_or_else(|| ParseError::syntax(0, "missing `property:` line"))?;
    let kind = kind.ok_or_else(|| ParseError::syntax(0, "missing `kind:` line"))?;
    let len = match kind {
        CertificateKind::Z => m.nonterminal_states().len(),
        CertificateKind::Y => m.pairs().len(),
    };
    let mut vector = vec![Rational::zero(); len];
    for (n, i, v) in entries {
        if i >= len {
            return Err(ParseError::syntax(n, format!("index {i} out of range (dimension {len})")).into());
        }
        vector[i] = v;
    }
    Ok(FarkasCertificate { prop, kind, vector })
}

fn relocate(e: ParseError, line: usize) -> ParseError {
    match e {
        ParseError::Syntax { message, .. } => ParseError::Syntax { line, message },
        ParseError::Number(s) => ParseError::syntax(line, format!("invalid number `{s}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{induced_dtmc, Relation};
    use crate::scalar::rat;

    fn prop(s: &str) -> PropertySpec {
        s.parse().unwrap()
    }

    #[test]
    fn d1_min_lower_bound() {
        let c = generate_certificate(&d1(), &prop("min>=2/5")).unwrap();
        assert_eq!(c.kind, CertificateKind::Z);
        assert_eq!(c.vector, vec![rat(1, 2), rat(2, 5)]);
    }

    #[test]
    fn d1_max_lower_bound() {
        let c = generate_certificate(&d1(), &prop("max>=1/2")).unwrap();
        assert_eq!(c.kind, CertificateKind::Y);
        assert_eq!(c.vector, vec![rat(1, 1), rat(1, 2)]);
    }

    #[test]
    fn sure_goal_certificate() {
        let c = generate_certificate(&sure_goal(), &prop("min>=1")).unwrap();
        assert_eq!(c.vector, vec![rat(1, 1)]);
    }

    #[test]
    fn tampered_z_is_rejected_with_excess() {
        let m = d1();
        let c = FarkasCertificate { prop: prop("min>=2/5"), kind: CertificateKind::Z, vector: vec![rat(51, 100), rat(2, 5)] };
        let r = verify_certificate(&m, &c).unwrap();
        assert!(!r.ok);
        assert_eq!(
            r.violations,
            vec![CertificateViolation { constraint: Constraint::Row { state: 0, action: "-".into() }, excess: rat(1, 100) }]
        );
    }

    #[test]
    fn zero_y_certifies_zero_threshold() {
        for m in [d1(), coin_choice(), sure_goal()] {
            let n = m.pairs().len();
            let c = FarkasCertificate { prop: prop("max>=0"), kind: CertificateKind::Y, vector: vec![rat(0, 1); n] };
            assert!(verify_certificate(&m, &c).unwrap().ok);
        }
    }

    #[test]
    fn repair_examples() {
        let m = d1();
        let c = FarkasCertificate { prop: prop("min>=2/5"), kind: CertificateKind::Z, vector: vec![rat(1, 2), rat(2, 5)] };
        let r = repair_certificate(&m, &c, &rat(1, 100)).unwrap();
        assert_eq!(r.vector, vec![rat(49, 100), rat(39, 100)]);
        let tight = FarkasCertificate { prop: prop("min>=1/2"), ..c.clone() };
        assert!(matches!(repair_certificate(&m, &tight, &rat(1, 100)), Err(CertificateError::RepairFailed(_))));
        assert_eq!(repair_certificate(&m, &c, &rat(0, 1)).unwrap(), c);
    }

    #[test]
    fn false_and_strict_properties() {
        let m = d1();
        assert!(matches!(generate_certificate(&m, &prop("min>=3/5")), Err(CertificateError::PropertyFalse(_))));
        assert!(matches!(generate_certificate(&m, &prop("min>1/2")), Err(CertificateError::StrictInfeasible(_))));
        assert!(matches!(generate_certificate(&m, &prop("max<1/2")), Err(CertificateError::StrictInfeasible(_))));
        for p in ["min>2/5", "max<3/5", "min<=1/2", "max<=1/2", "min<3/5"] {
            let c = generate_certificate(&m, &prop(p)).unwrap();
            assert!(verify_certificate(&m, &c).unwrap().ok, "{p}");
        }
    }

    #[test]
    fn kind_and_dimension_errors() {
        let m = d1();
        let c = FarkasCertificate { prop: prop("max>=0"), kind: CertificateKind::Z, vector: vec![rat(0, 1); 2] };
        assert!(matches!(verify_certificate(&m, &c), Err(CertificateError::KindMismatch { .. })));
        let c = FarkasCertificate { prop: prop("max>=0"), kind: CertificateKind::Y, vector: vec![rat(0, 1); 3] };
        assert!(matches!(verify_certificate(&m, &c), Err(CertificateError::Dimension { expected: 2, found: 3 })));
    }

    #[test]
    fn coin_choice_all_kinds() {
        let m = coin_choice();
        // min = 0, max = 1
        for p in ["min>=0", "max>=1", "min<=0", "max<=1", "max>0", "min<1"] {
            let c = generate_certificate(&m, &prop(p)).unwrap();
            assert!(verify_certificate(&m, &c).unwrap().ok, "{p}");
        }
        assert!(generate_certificate(&m, &prop("min>0")).is_err());
    }

    #[test]
    fn scheduler_normalization() {
        let m = coin_choice();
        let s = scheduler_from_y(&m, &[rat(3, 1), rat(1, 1)]).unwrap();
        assert_eq!(s.weights[0], vec![rat(3, 4), rat(1, 4)]);
        let s = scheduler_from_y(&m, &[rat(0, 1), rat(0, 1)]).unwrap();
        assert_eq!(s, MrScheduler::first_action(&m));
        assert!(matches!(scheduler_from_y(&m, &[rat(-1, 1), rat(0, 1)]), Err(CertificateError::NegativeEntry(0))));
        let d = scheduler_from_y(&d1(), &[rat(1, 1), rat(1, 2)]).unwrap();
        assert_eq!(d, MrScheduler::first_action(&d1()));
    }

    #[test]
    fn frequencies_of_d1() {
        let m = d1();
        let y = frequencies_from_scheduler(&m, &MrScheduler::first_action(&m)).unwrap();
        assert_eq!(y, vec![rat(1, 1), rat(1, 2)]);
        assert_eq!(frequencies_from_scheduler(&sure_goal(), &MrScheduler::first_action(&sure_goal())).unwrap(), vec![rat(1, 1)]);
    }

    #[test]
    fn unreachable_state_has_zero_frequency() {
        let text = "mdp\nstates: 4\ninitial: 0\ngoal: 1\nfail: 2\n0 a 1 1\n3 a 1 1\n";
        let m = crate::model::parse_model(text).unwrap();
        let y = frequencies_from_scheduler(&m, &MrScheduler::first_action(&m)).unwrap();
        assert_eq!(y, vec![rat(1, 1), rat(0, 1)]);
    }

    #[test]
    fn frequency_duality_on_mixed_scheduler() {
        let m = coin_choice();
        let sched = MrScheduler { weights: vec![vec![rat(1, 3), rat(2, 3)], vec![], vec![]] };
        let y = frequencies_from_scheduler(&m, &sched).unwrap();
        let sys = build_farkas_system::<Rational>(&m);
        assert_eq!(sys.mul_a(&y), sys.delta0);
        let dtmc = induced_dtmc(&m, &sched).unwrap();
        assert_eq!(sys.b_dot(&y), crate::linsys::reach_probability(&dtmc, Direction::Min).unwrap());
    }

    #[test]
    fn text_round_trip() {
        let m = d1();
        for p in ["min>=2/5", "max>=1/2", "min<=1/2"] {
            let c = generate_certificate(&m, &prop(p)).unwrap();
            let text = write_certificate(&c);
            assert_eq!(read_certificate(&text, &m).unwrap(), c);
        }
        let c = read_certificate("farkas-certificate\nproperty: max ge 0\nkind: y\n", &m).unwrap();
        assert_eq!(c.vector, vec![rat(0, 1); 2]);
        assert_eq!(c.prop.relation, Relation::Ge);
        assert!(read_certificate("farkas-certificate\nproperty: max ge 0\nkind: y\n7 1\n", &m).is_err());
        assert!(read_certificate("certificate\n", &m).is_err());
    }
}
