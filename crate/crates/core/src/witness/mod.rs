//! Witnessing subsystems from supports of Farkas-polytope points: support
//! extraction, the quotient-sum heuristic, the big-M bound, exact minimal
//! witnesses by branch-and-bound, LP-file export and the reductions of
//! transition- and size-minimality to state-minimality.

mod bnb;
mod lpfile;
mod reduce;

pub use bnb::{exact_minimal_witness, BnbOptions};
pub use lpfile::{export_milp, parse_lp_file, LpFile, LpFileConstraint};
pub use reduce::{reduce_size_to_state, reduce_transition_to_state, Origin, Reduction, ReductionKind};

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Zero;

use crate::certificates::y_polytope_lp;
use crate::error::WitnessError;
use crate::linsys::{build_farkas_system, reach_probability, solve_lp, Cmp, FarkasSystem, LinearProgram, LpStatus, Sense};
use crate::model::{restrict, Direction, MrScheduler, Pair, PropertySpec, ReachMdp, Relation, Selection, Subsystem};
use crate::scalar::{rat, Rational, Scalar};

/// Which Farkas polytope a point lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// `{z >= 0 | Az <= b, z(s0) >= λ}`, one coordinate per state.
    MinNonneg,
    /// `{y >= 0 | yA <= δ, y·b >= λ}`, one coordinate per enabled pair.
    Max,
}

impl Flavor {
    pub fn direction(self) -> Direction {
        match self {
            Flavor::MinNonneg => Direction::Min,
            Flavor::Max => Direction::Max,
        }
    }

    pub fn from_direction(d: Direction) -> Flavor {
        match d {
            Direction::Min => Flavor::MinNonneg,
            Direction::Max => Flavor::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolytopeSpec {
    pub flavor: Flavor,
    pub lambda: Rational,
}

impl PolytopeSpec {
    pub fn new(flavor: Flavor, lambda: Rational) -> Self {
        PolytopeSpec { flavor, lambda }
    }

    /// The polytope of a `>=` property. Strict thresholds are rejected.
    pub fn from_property(prop: &PropertySpec) -> Result<Self, WitnessError> {
        match prop.relation {
            Relation::Ge => Ok(PolytopeSpec::new(Flavor::from_direction(prop.direction), prop.lambda.clone())),
            _ => Err(WitnessError::StrictThreshold),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Qs,
    Exact,
    Tree,
    Point,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Qs => "qs",
            Method::Exact => "exact",
            Method::Tree => "tree",
            Method::Point => "point",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessResult {
    pub subsystem: Subsystem,
    /// Non-terminal states of the subsystem (the initial state included).
    pub state_count: usize,
    /// The polytope point whose support induced the subsystem.
    pub point: Vec<Rational>,
    pub method: Method,
    pub optimal: bool,
    /// Lower and upper bound on the minimal state count.
    pub bounds: (usize, usize),
    /// Exact reach probability of the subsystem.
    pub probability: Rational,
    /// Support size of every heuristic iterate.
    pub support_sizes: Vec<usize>,
    /// Set when a max-flavor support keeps two actions of one state; the
    /// scheduler then comes from normalizing the point.
    pub renormalized: Option<MrScheduler>,
}

impl WitnessResult {
    /// `# states <n> # optimal <bool> # bounds <lo> <hi>`, plus a line
    /// when the support needed renormalization.
    pub fn trailer(&self) -> String {
        let mut out = format!("# states {} # optimal {} # bounds {} {}\n", self.state_count, self.optimal, self.bounds.0, self.bounds.1);
        if self.renormalized.is_some() {
            out.push_str("# renormalized true\n");
        }
        out
    }

    pub fn to_text(&self, parent: &ReachMdp) -> String {
        self.subsystem.to_text(parent) + &self.trailer()
    }
}

/// `min objective·x` over the polytope, one variable per coordinate.
pub(crate) fn polytope_lp<T: Scalar>(sys: &FarkasSystem<T>, spec: &PolytopeSpec, objective: Vec<T>) -> LinearProgram<T> {
    let lambda = T::from_rational(&spec.lambda);
    match spec.flavor {
        Flavor::MinNonneg => {
            let mut lp = LinearProgram::new(Sense::Minimize, objective);
            for (row, b) in sys.a.iter().zip(&sys.b) {
                lp.add_constraint(row.clone(), Cmp::Le, b.clone());
            }
            lp.add_constraint(vec![(sys.initial_col(), T::one())], Cmp::Ge, lambda);
            lp
        }
        Flavor::Max => {
            let mut lp = y_polytope_lp(sys, Sense::Minimize, Cmp::Le, objective);
            let coeffs = sys.b.iter().enumerate().filter(|(_, b)| !b.is_zero()).map(|(r, b)| (r, b.clone())).collect();
            lp.add_constraint(coeffs, Cmp::Ge, lambda);
            lp
        }
    }
}

pub(crate) fn dimension<T: Scalar>(sys: &FarkasSystem<T>, flavor: Flavor) -> usize {
    match flavor {
        Flavor::MinNonneg => sys.cols(),
        Flavor::Max => sys.rows(),
    }
}

/// Subsystem induced by a set of coordinates.
pub(crate) fn subsystem_of_support<T: Scalar>(m: &ReachMdp, sys: &FarkasSystem<T>, flavor: Flavor, support: &[usize]) -> Subsystem {
    let selection = match flavor {
        Flavor::MinNonneg => Selection::States(support.iter().map(|&c| sys.col_index[c]).collect()),
        Flavor::Max => Selection::Pairs(support.iter().map(|&r| sys.row_index[r]).collect::<BTreeSet<Pair>>()),
    };
    restrict(m, &selection).expect("support indices come from the Farkas system")
}

/// Float points verify against `λ - 1e-9`, exact points against `λ`.
pub(crate) fn witness_threshold<T: Scalar>(lambda: &Rational) -> Rational {
    if T::EXACT {
        lambda.clone()
    } else {
        lambda - rat(1, 1_000_000_000)
    }
}

fn support_of<T: Scalar>(p: &[T], threshold: &T) -> Vec<usize> {
    p.iter().enumerate().filter(|(_, x)| *x > threshold).map(|(i, _)| i).collect()
}

/// The witness induced by `supp(p)`. The point must lie in the polytope
/// (up to the scalar tolerance); the subsystem is re-checked exactly.
pub fn witness_from_point<T: Scalar>(m: &ReachMdp, spec: &PolytopeSpec, p: &[T]) -> Result<WitnessResult, WitnessError> {
    crate::linsys::require_stopping(m)?;
    let sys = build_farkas_system::<T>(m);
    let n = dimension(&sys, spec.flavor);
    if p.len() != n {
        return Err(WitnessError::NotInPolytope(format!("dimension {} instead of {n}", p.len())));
    }
    let lp = polytope_lp(&sys, spec, vec![T::zero(); n]);
    let violation = lp.max_violation(p);
    if violation.is_positive_tol() {
        return Err(WitnessError::NotInPolytope(format!("constraint violated by {violation}")));
    }
    from_support(m, &sys, spec, p, &support_of(p, &T::tolerance()), Method::Point)
}

pub(crate) fn from_support<T: Scalar>(
    m: &ReachMdp,
    sys: &FarkasSystem<T>,
    spec: &PolytopeSpec,
    p: &[T],
    support: &[usize],
    method: Method,
) -> Result<WitnessResult, WitnessError> {
    let subsystem = subsystem_of_support(m, sys, spec.flavor, support);
    let probability = reach_probability(&subsystem.mdp, spec.flavor.direction())?;
    if probability < witness_threshold::<T>(&spec.lambda) {
        return Err(WitnessError::Unverified(format!(
            "subsystem reaches {} < {}",
            crate::scalar::format_rational(&probability),
            crate::scalar::format_rational(&spec.lambda)
        )));
    }
    let point: Vec<Rational> = p
        .iter()
        .enumerate()
        .map(|(i, x)| if support.contains(&i) { x.to_rational() } else { Rational::zero() })
        .collect();
    let renormalized = match spec.flavor {
        Flavor::Max => {
            let mut seen = BTreeSet::new();
            let doubled = support.iter().any(|&r| !seen.insert(sys.row_index[r].0));
            if doubled {
                Some(crate::certificates::scheduler_from_y(m, &point).map_err(|e| WitnessError::Internal(e.to_string()))?)
            } else {
                None
            }
        }
        Flavor::MinNonneg => None,
    };
    let state_count = subsystem.state_count();
    Ok(WitnessResult {
        subsystem,
        state_count,
        point,
        method,
        optimal: false,
        bounds: (1, state_count),
        probability,
        support_sizes: vec![support.len()],
        renormalized,
    })
}

/// Margin of the reweighting constant over the largest reciprocal.
pub const QS_MARGIN: f64 = 10.0;

/// Quotient-sum heuristic: `k` LP solves, each minimizing `o_j·x` over the
/// polytope with `o_1 = 1` and `o_{j+1}(i) = 1/x_j(i)` on the support,
/// `C = 10·max 1/x_j(i)` off it.
pub fn qs_heuristic<T: Scalar>(m: &ReachMdp, spec: &PolytopeSpec, iterations: usize) -> Result<WitnessResult, WitnessError> {
    if iterations == 0 {
        return Err(WitnessError::NoIterations);
    }
    crate::linsys::require_stopping(m)?;
    let sys = build_farkas_system::<T>(m);
    let n = dimension(&sys, spec.flavor);
    let mut weights = vec![T::one(); n];
    let mut sizes = Vec::with_capacity(iterations);
    let mut x = Vec::new();
    for _ in 0..iterations {
        let sol = solve_lp(&polytope_lp(&sys, spec, weights.clone())).map_err(|e| WitnessError::Internal(e.to_string()))?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(WitnessError::Infeasible),
            LpStatus::Unbounded => return Err(WitnessError::Internal("bounded objective reported unbounded".into())),
        }
        x = sol.x;
        sizes.push(support_of(&x, &T::tolerance()).len());
        weights = qs_weights(&x);
    }
    let mut result = match from_support(m, &sys, spec, &x, &support_of(&x, &T::tolerance()), Method::Qs) {
        Ok(r) => r,
        // dropping sub-tolerance mass can cost the threshold; keep it
        Err(WitnessError::Unverified(_)) if !T::EXACT => from_support(m, &sys, spec, &x, &support_of(&x, &T::zero()), Method::Qs)?,
        Err(e) => return Err(e),
    };
    result.support_sizes = sizes;
    Ok(result)
}

fn qs_weights<T: Scalar>(x: &[T]) -> Vec<T> {
    let recips: Vec<Option<T>> = x.iter().map(|v| v.is_positive_tol().then(|| T::one() / v.clone())).collect();
    let max = recips.iter().flatten().fold(None::<T>, |acc, r| match acc {
        Some(a) if a >= *r => Some(a),
        _ => Some(r.clone()),
    });
    let c = match max {
        Some(m) => T::from_f64(QS_MARGIN).expect("small constant") * m,
        None => T::one(),
    };
    recips.into_iter().map(|r| r.unwrap_or_else(|| c.clone())).collect()
}

/// Bound on every coordinate of every polytope point: 1 for the min
/// flavor, `max Σ y` over the polytope for the max flavor.
pub fn k_bound<T: Scalar>(m: &ReachMdp, spec: &PolytopeSpec) -> Result<T, WitnessError> {
    crate::linsys::require_stopping(m)?;
    let sys = build_farkas_system::<T>(m);
    let n = dimension(&sys, spec.flavor);
    let (lp_objective, negate) = match spec.flavor {
        // only feasibility matters here
        Flavor::MinNonneg => (vec![T::zero(); n], false),
        Flavor::Max => (vec![-T::one(); n], true),
    };
    let sol = solve_lp(&polytope_lp(&sys, spec, lp_objective)).map_err(|e| WitnessError::Internal(e.to_string()))?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(WitnessError::Infeasible),
        LpStatus::Unbounded => return Err(WitnessError::Internal("polytope is unbounded".into())),
    }
    Ok(if negate { -sol.objective_value } else { T::one() })
}
