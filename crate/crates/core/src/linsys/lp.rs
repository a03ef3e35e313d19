//! Dense two-phase simplex over any [`Scalar`].
//!
//! Pivoting follows Bland's rule (smallest entering index, smallest basic
//! index among ratio ties), so a given program always produces the same
//! vertex. Over [`Rational`](crate::Rational) the result is exact; over
//! floats every sign test uses [`Scalar::tolerance`].

use crate::error::LpError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub cmp: Cmp,
    pub rhs: T,
}

/// `sense objective·x` subject to the constraint rows and per-variable
/// bounds (`None` means unbounded in that direction).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub constraints: Vec<LinearConstraint<T>>,
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    /// A program over `objective.len()` non-negative variables.
    pub fn new(sense: Sense, objective: Vec<T>) -> Self {
        let n = objective.len();
        LinearProgram { sense, objective, constraints: Vec::new(), lower: vec![Some(T::zero()); n], upper: vec![None; n] }
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.lower[var] = None;
        self.upper[var] = None;
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<T>, upper: Option<T>) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, T)>, cmp: Cmp, rhs: T) -> &mut Self {
        self.constraints.push(LinearConstraint { coeffs, cmp, rhs });
        self
    }

    /// The same program over another scalar type.
    pub fn convert<U: Scalar>(&self) -> LinearProgram<U> {
        let conv = |x: &T| U::from_rational(&x.to_rational());
        LinearProgram {
            sense: self.sense,
            objective: self.objective.iter().map(conv).collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| LinearConstraint {
                    coeffs: c.coeffs.iter().map(|(j, a)| (*j, conv(a))).collect(),
                    cmp: c.cmp,
                    rhs: conv(&c.rhs),
                })
                .collect(),
            lower: self.lower.iter().map(|b| b.as_ref().map(conv)).collect(),
            upper: self.upper.iter().map(|b| b.as_ref().map(conv)).collect(),
        }
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.var_count();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!("{} variables but {} lower / {} upper bounds", n, self.lower.len(), self.upper.len())));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some((j, _)) = c.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(LpError::Dimension(format!("row {i} references variable {j} of {n}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound by `x` (zero when feasible).
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        let mut bump = |v: T| {
            if v > worst {
                worst = v;
            }
        };
        for c in &self.constraints {
            let lhs = c.coeffs.iter().fold(T::zero(), |acc, (j, a)| acc + a.clone() * x[*j].clone());
            match c.cmp {
                Cmp::Le => bump(lhs - c.rhs.clone()),
                Cmp::Ge => bump(c.rhs.clone() - lhs),
                Cmp::Eq => bump((lhs - c.rhs.clone()).abs()),
            }
        }
        for (j, v) in x.iter().enumerate() {
            if let Some(l) = &self.lower[j] {
                bump(l.clone() - v.clone());
            }
            if let Some(u) = &self.upper[j] {
                bump(v.clone() - u.clone());
            }
        }
        worst
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective_value: T,
}

impl<T: Scalar> LpSolution<T> {
    fn without_point(status: LpStatus, n: usize) -> Self {
        LpSolution { status, x: vec![T::zero(); n], objective_value: T::zero() }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// How an original variable is expressed through standard-form columns:
/// `x = offset + Σ sign·col`.
struct VarMap<T> {
    terms: Vec<(usize, T)>,
    offset: T,
}

struct Tableau<T> {
    /// Constraint rows; the last entry of each row is the right-hand side.
    rows: Vec<Vec<T>>,
    /// Reduced costs; the last entry is minus the current objective value.
    cost: Vec<T>,
    basis: Vec<usize>,
    /// Columns that may never enter (artificials during phase two).
    blocked: Vec<bool>,
}

impl<T: Scalar> Tableau<T> {
    fn width(&self) -> usize {
        self.cost.len() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = T::one() / self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v = v.clone() * inv.clone();
            }
        }
        let nz: Vec<usize> = (0..=self.width()).filter(|&j| !self.rows[r][j].is_zero()).collect();
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<T>| {
            let factor = row[c].clone();
            if factor.is_zero() {
                return;
            }
            for &j in &nz {
                row[j] = row[j].clone() - factor.clone() * pivot_row[j].clone();
            }
            // Keep the pivot column exactly zero in float mode.
            row[c] = T::zero();
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.cost);
        self.basis[r] = c;
    }

    /// Runs Bland's rule until optimal. Returns `false` when unbounded.
    fn optimize(&mut self, max_iter: usize) -> Result<bool, LpError> {
        let width = self.width();
        for _ in 0..max_iter {
            let entering = (0..width).find(|&j| !self.blocked[j] && self.cost[j].is_negative_tol());
            let Some(c) = entering else { return Ok(true) };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive_tol() {
                    continue;
                }
                // Float round-off can leave tiny negative right-hand sides.
                let rhs = if row[width].is_negative() { T::zero() } else { row[width].clone() };
                let ratio = rhs / row[c].clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, best)) => {
                        let diff = ratio.clone() - best.clone();
                        if diff.is_negative_tol() || (diff.is_zero_tol() && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, best))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(LpError::IterationLimit(max_iter))
    }
}

/// Solves `lp`; the scalar type selects float or exact arithmetic.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    lp.check()?;
    let n = lp.var_count();

    // Standard-form columns for the structural variables.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, T)> = Vec::new();
    for j in 0..n {
        match (&lp.lower[j], &lp.upper[j]) {
            (Some(l), u) => {
                if let Some(u) = u {
                    if (u.clone() - l.clone()).is_negative_tol() {
                        return Ok(LpSolution::without_point(LpStatus::Infeasible, n));
                    }
                    bound_rows.push((ncols, u.clone() - l.clone()));
                }
                maps.push(VarMap { terms: vec![(ncols, T::one())], offset: l.clone() });
                ncols += 1;
            }
            (None, Some(u)) => {
                maps.push(VarMap { terms: vec![(ncols, -T::one())], offset: u.clone() });
                ncols += 1;
            }
            (None, None) => {
                maps.push(VarMap { terms: vec![(ncols, T::one()), (ncols + 1, -T::one())], offset: T::zero() });
                ncols += 2;
            }
        }
    }
    let structural = ncols;

    // Rows as (dense coefficients over structural columns, cmp, rhs).
    let mut rows: Vec<(Vec<T>, Cmp, T)> = Vec::with_capacity(lp.constraints.len() + bound_rows.len());
    for c in &lp.constraints {
        let mut dense = vec![T::zero(); structural];
        let mut rhs = c.rhs.clone();
        for (j, a) in &c.coeffs {
            rhs = rhs - a.clone() * maps[*j].offset.clone();
            for (col, sign) in &maps[*j].terms {
                dense[*col] = dense[*col].clone() + a.clone() * sign.clone();
            }
        }
        rows.push((dense, c.cmp, rhs));
    }
    for (col, ub) in bound_rows {
        let mut dense = vec![T::zero(); structural];
        dense[col] = T::one();
        rows.push((dense, Cmp::Le, ub));
    }
    for (dense, cmp, rhs) in rows.iter_mut() {
        if rhs.is_negative() {
            for v in dense.iter_mut() {
                *v = -v.clone();
            }
            *rhs = -rhs.clone();
            *cmp = match *cmp {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
    }

    let m = rows.len();
    let slack_count = rows.iter().filter(|(_, cmp, _)| *cmp != Cmp::Eq).count();
    let art_count = rows.iter().filter(|(_, cmp, _)| *cmp != Cmp::Le).count();
    let width = structural + slack_count + art_count;
    let first_art = structural + slack_count;

    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        cost: vec![T::zero(); width + 1],
        basis: vec![0; m],
        blocked: vec![false; width],
    };
    let (mut next_slack, mut next_art) = (structural, first_art);
    for (i, (dense, cmp, rhs)) in rows.into_iter().enumerate() {
        let mut row = dense;
        row.resize(width + 1, T::zero());
        row[width] = rhs;
        match cmp {
            Cmp::Le => {
                row[next_slack] = T::one();
                tab.basis[i] = next_slack;
                next_slack += 1;
            }
            Cmp::Ge => {
                row[next_slack] = -T::one();
                next_slack += 1;
                row[next_art] = T::one();
                tab.basis[i] = next_art;
                next_art += 1;
            }
            Cmp::Eq => {
                row[next_art] = T::one();
                tab.basis[i] = next_art;
                next_art += 1;
            }
        }
        tab.rows.push(row);
    }

    let max_iter = 200 * (m + width + 10);

    // Phase one: minimise the sum of artificials.
    if art_count > 0 {
        for j in first_art..width {
            tab.cost[j] = T::one();
        }
        for i in 0..m {
            if tab.basis[i] >= first_art {
                for j in 0..=width {
                    tab.cost[j] = tab.cost[j].clone() - tab.rows[i][j].clone();
                }
            }
        }
        tab.optimize(max_iter)?;
        let infeasibility = -tab.cost[width].clone();
        let scale = T::one() + tab.rows.iter().fold(T::zero(), |acc, r| acc + r[width].clone().abs());
        if (infeasibility / scale).is_positive_tol() {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, n));
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= first_art {
                match (0..first_art).find(|&j| !tab.rows[i][j].is_zero_tol()) {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for j in first_art..width {
            tab.blocked[j] = true;
        }
    }

    // Phase two objective, always as minimisation over standard columns.
    let mut col_cost = vec![T::zero(); width];
    for j in 0..n {
        let c = match lp.sense {
            Sense::Minimize => lp.objective[j].clone(),
            Sense::Maximize => -lp.objective[j].clone(),
        };
        for (col, sign) in &maps[j].terms {
            col_cost[*col] = col_cost[*col].clone() + c.clone() * sign.clone();
        }
    }
    let mut cost = col_cost.clone();
    cost.push(T::zero());
    for (i, &b) in tab.basis.iter().enumerate() {
        let cb = col_cost[b].clone();
        if cb.is_zero() {
            continue;
        }
        for j in 0..=width {
            cost[j] = cost[j].clone() - cb.clone() * tab.rows[i][j].clone();
        }
    }
    for &b in &tab.basis {
        cost[b] = T::zero();
    }
    tab.cost = cost;
    if !tab.optimize(max_iter)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, n));
    }

    let mut col_val = vec![T::zero(); width];
    for (i, &b) in tab.basis.iter().enumerate() {
        col_val[b] = tab.rows[i][width].clone();
    }
    let x: Vec<T> = maps
        .iter()
        .map(|vm| vm.terms.iter().fold(vm.offset.clone(), |acc, (col, sign)| acc + sign.clone() * col_val[*col].clone()))
        .collect();
    let objective_value = lp.objective_at(&x);
    Ok(LpSolution { status: LpStatus::Optimal, x, objective_value })
}
