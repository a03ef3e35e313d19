//! The minimal-witness MILP in CPLEX LP text format, and a reader for the
//! subset of that format we write.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{dimension, k_bound, Flavor, PolytopeSpec};
use crate::error::{ParseError, WitnessError};
use crate::linsys::{build_farkas_system, Cmp};
use crate::model::ReachMdp;
use crate::scalar::Rational;

fn term(out: &mut String, first: &mut bool, coef: f64, var: &str) {
    let sign = if coef < 0.0 { "-" } else { "+" };
    let mag = coef.abs();
    if *first {
        if coef < 0.0 {
            out.push_str(" -");
        }
    } else {
        let _ = write!(out, " {sign}");
    }
    if mag == 1.0 {
        let _ = write!(out, " {var}");
    } else {
        let _ = write!(out, " {mag} {var}");
    }
    *first = false;
}

fn row(out: &mut String, name: &str, coeffs: &[(String, f64)], cmp: &str, rhs: f64) {
    let _ = write!(out, " {name}:");
    let mut first = true;
    for (v, c) in coeffs {
        term(out, &mut first, *c, v);
    }
    if first {
        out.push_str(" 0 x_0");
    }
    let _ = writeln!(out, " {cmp} {rhs}");
}

/// Writes `min Σ s_i s.t. x ∈ P, x_i - K s_i <= 0, s_i binary`. Rationals
/// are written as the nearest `f64`.
pub fn export_milp(m: &ReachMdp, spec: &PolytopeSpec) -> Result<String, WitnessError> {
    let k: Rational = k_bound::<Rational>(m, spec)?;
    let k = crate::scalar::rational_to_f64(&k);
    let sys = build_farkas_system::<f64>(m);
    let n = dimension(&sys, spec.flavor);
    let lambda = crate::scalar::rational_to_f64(&spec.lambda);
    let x = |i: usize| format!("x_{i}");
    let mut out = String::new();
    let what = match spec.flavor {
        Flavor::MinNonneg => "states",
        Flavor::Max => "state-action pairs",
    };
    let _ = writeln!(out, "\\ minimal witness MILP over {n} {what}, threshold {}", crate::scalar::format_rational(&spec.lambda));
    out.push_str("Minimize\n obj:");
    for i in 0..n {
        let _ = write!(out, "{} s_{i}", if i == 0 { "" } else { " +" });
    }
    if n == 0 {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    match spec.flavor {
        Flavor::MinNonneg => {
            for (r, (a, b)) in sys.a.iter().zip(&sys.b).enumerate() {
                let coeffs: Vec<(String, f64)> = a.iter().map(|(c, v)| (x(*c), *v)).collect();
                row(&mut out, &format!("row_{r}"), &coeffs, "<=", *b);
            }
            row(&mut out, "threshold", &[(x(sys.initial_col()), 1.0)], ">=", lambda);
        }
        Flavor::Max => {
            let mut columns: Vec<Vec<(String, f64)>> = vec![Vec::new(); sys.cols()];
            for (r, a) in sys.a.iter().enumerate() {
                for (c, v) in a {
                    columns[*c].push((x(r), *v));
                }
            }
            for (c, coeffs) in columns.iter().enumerate() {
                row(&mut out, &format!("col_{c}"), coeffs, "<=", sys.delta0[c]);
            }
            let coeffs: Vec<(String, f64)> = sys.b.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(r, b)| (x(r), *b)).collect();
            row(&mut out, "threshold", &coeffs, ">=", lambda);
        }
    }
    for i in 0..n {
        row(&mut out, &format!("link_{i}"), &[(x(i), 1.0), (format!("s_{i}"), -k)], "<=", 0.0);
    }
    out.push_str("Bounds\n");
    for i in 0..n {
        let _ = writeln!(out, " x_{i} >= 0");
    }
    out.push_str("Binaries\n");
    for i in 0..n {
        let _ = writeln!(out, " s_{i}");
    }
    out.push_str("End\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpFileConstraint {
    pub name: String,
    pub coeffs: BTreeMap<String, f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpFile {
    pub minimize: bool,
    pub objective: BTreeMap<String, f64>,
    pub constraints: Vec<LpFileConstraint>,
    /// `(variable, lower bound)` pairs.
    pub lower_bounds: Vec<(String, f64)>,
    pub binaries: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
}

/// Parses a linear expression such as `x_0 - 0.5 x_1 + 2 s_3`.
fn parse_expr(text: &str, line: usize) -> Result<BTreeMap<String, f64>, ParseError> {
    let mut out = BTreeMap::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in text.split_whitespace() {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    coef = Some(v);
                } else {
                    *out.entry(tok.to_string()).or_insert(0.0) += sign * coef.unwrap_or(1.0);
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    if coef.is_some() {
        return Err(ParseError::syntax(line, "dangling coefficient"));
    }
    Ok(out)
}

pub fn parse_lp_file(text: &str) -> Result<LpFile, ParseError> {
    let mut lp = LpFile::default();
    let mut section = Section::None;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "minimize" | "maximize" => {
                lp.minimize = line.eq_ignore_ascii_case("minimize");
                section = Section::Objective;
                continue;
            }
            "subject to" => {
                section = Section::Constraints;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "binaries" => {
                section = Section::Binaries;
                continue;
            }
            "end" => break,
            _ => {}
        }
        let (name, body) = match line.split_once(':') {
            Some((n, b)) => (n.trim().to_string(), b.trim()),
            None => (String::new(), line),
        };
        match section {
            Section::None => return Err(ParseError::syntax(ln, "content before `Minimize`")),
            Section::Objective => lp.objective = parse_expr(body, ln)?,
            Section::Constraints => {
                let (cmp, sym) = [(Cmp::Le, "<="), (Cmp::Ge, ">="), (Cmp::Eq, "=")]
                    .into_iter()
                    .find(|(_, s)| body.contains(s))
                    .ok_or_else(|| ParseError::syntax(ln, "constraint without relation"))?;
                let (lhs, rhs) = body.split_once(sym).expect("found above");
                let rhs: f64 = rhs.trim().parse().map_err(|_| ParseError::syntax(ln, format!("bad right-hand side `{}`", rhs.trim())))?;
                let mut coeffs = parse_expr(lhs, ln)?;
                coeffs.retain(|_, v| *v != 0.0);
                lp.constraints.push(LpFileConstraint { name, coeffs, cmp, rhs });
            }
            Section::Bounds => {
                let (var, lo) = body.split_once(">=").ok_or_else(|| ParseError::syntax(ln, "expected `<var> >= <value>`"))?;
                let lo: f64 = lo.trim().parse().map_err(|_| ParseError::syntax(ln, "bad bound"))?;
                lp.lower_bounds.push((var.trim().to_string(), lo));
            }
            Section::Binaries => lp.binaries.extend(body.split_whitespace().map(str::to_string)),
        }
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::scalar::rat;

    #[test]
    fn d1_min_export() {
        let text = export_milp(&d1(), &PolytopeSpec::new(Flavor::MinNonneg, rat(3, 10))).unwrap();
        assert!(text.contains(" obj: s_0 + s_1\n"), "{text}");
        let lp = parse_lp_file(&text).unwrap();
        assert!(lp.minimize);
        assert_eq!(lp.binaries, vec!["s_0", "s_1"]);
        let row0 = &lp.constraints[0];
        assert_eq!(row0.coeffs, BTreeMap::from([("x_0".to_string(), 1.0), ("x_1".to_string(), -0.5)]));
        assert_eq!((row0.cmp, row0.rhs), (Cmp::Le, 0.3));
        assert_eq!(lp.constraints.len(), 2 + 1 + 2);
    }

    #[test]
    fn max_export_has_one_binary_per_pair() {
        let m = coin_choice();
        let text = export_milp(&m, &PolytopeSpec::new(Flavor::Max, rat(0, 1))).unwrap();
        let lp = parse_lp_file(&text).unwrap();
        assert_eq!(lp.binaries.len(), m.pairs().len());
        assert!(text.contains(" x_0 >= 0\n"));
    }

    #[test]
    fn parse_errors() {
        assert!(parse_lp_file("x + y <= 1\n").is_err());
        assert!(parse_lp_file("Minimize\n obj: x\nSubject To\n c: x + y 1\nEnd\n").is_err());
    }
}
