//! Exact rational simplex for problems of the form
//! `A x = b, x >= 0`, optionally maximizing `c . x`.
//!
//! The solver is a dense two-phase tableau method with Bland's rule, so it
//! always terminates and identical inputs always produce identical vertices.
//! Every answer carries a certificate that can be checked by substitution:
//! a primal point, a dual vector for optimal problems, or a Farkas vector
//! for infeasible ones.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use log::{log_enabled, trace, Level};
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("row has {got} coefficients but the problem has {expected} variables")]
    RowLength { expected: usize, got: usize },
    #[error("variable index {index} out of range for {num_vars} variables")]
    VariableIndex { index: usize, num_vars: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equality {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

/// `A x = b`, `x >= 0`, optional objective to maximize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpProblem {
    num_vars: usize,
    equalities: Vec<Equality>,
    objective: Option<Vec<Rational>>,
}

impl LpProblem {
    pub fn new(num_vars: usize) -> Self {
        LpProblem { num_vars, equalities: Vec::new(), objective: None }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    pub fn objective(&self) -> Option<&[Rational]> {
        self.objective.as_deref()
    }

    pub fn add_equality(&mut self, coeffs: Vec<Rational>, rhs: Rational) -> Result<(), LpError> {
        if coeffs.len() != self.num_vars {
            return Err(LpError::RowLength { expected: self.num_vars, got: coeffs.len() });
        }
        self.equalities.push(Equality { coeffs, rhs });
        Ok(())
    }

    /// Adds `sum coeff * x[index] = rhs`; repeated indices accumulate.
    pub fn add_sparse_equality<I>(&mut self, terms: I, rhs: Rational) -> Result<(), LpError>
    where
        I: IntoIterator<Item = (usize, Rational)>,
    {
        let mut coeffs = vec![Rational::zero(); self.num_vars];
        for (index, value) in terms {
            let slot = coeffs
                .get_mut(index)
                .ok_or(LpError::VariableIndex { index, num_vars: self.num_vars })?;
            *slot += value;
        }
        self.add_equality(coeffs, rhs)
    }

    pub fn set_objective(&mut self, coeffs: Vec<Rational>) -> Result<(), LpError> {
        if coeffs.len() != self.num_vars {
            return Err(LpError::RowLength { expected: self.num_vars, got: coeffs.len() });
        }
        self.objective = Some(coeffs);
        Ok(())
    }

    pub fn clear_objective(&mut self) {
        self.objective = None;
    }

    /// Exact check of `A x = b` and `x >= 0`.
    pub fn is_satisfied_by(&self, point: &[Rational]) -> bool {
        point.len() == self.num_vars
            && point.iter().all(|x| !x.is_negative())
            && self.equalities.iter().all(|eq| dot(&eq.coeffs, point) == eq.rhs)
    }

    pub fn objective_value(&self, point: &[Rational]) -> Rational {
        self.objective.as_ref().map_or_else(Rational::zero, |c| dot(c, point))
    }
}

impl fmt::Display for LpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = &self.objective {
            writeln!(f, "max {}", format_row(c))?;
        } else {
            writeln!(f, "find")?;
        }
        for eq in &self.equalities {
            writeln!(f, "  {} = {}", format_row(&eq.coeffs), format_rational(&eq.rhs))?;
        }
        write!(f, "  x >= 0 ({} variables)", self.num_vars)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum LpStatus {
    Feasible,
    Infeasible,
    Optimal,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// `y` with `A^T y >= c` and `b . y` equal to the optimum.
    Dual(Vec<Rational>),
    /// `y` with `A^T y >= 0` and `b . y < 0`; no `x >= 0` solves `A x = b`.
    Farkas(Vec<Rational>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Option<Vec<Rational>>,
    pub optimum: Option<Rational>,
    pub certificate: Option<Certificate>,
}

impl LpSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, LpStatus::Feasible | LpStatus::Optimal | LpStatus::Unbounded)
    }

    /// Re-substitutes every certificate into the problem, exactly.
    pub fn verify(&self, lp: &LpProblem) -> Result<(), String> {
        if let Some(point) = &self.point {
            if !lp.is_satisfied_by(point) {
                return Err("primal point violates a constraint".into());
            }
        }
        match self.status {
            LpStatus::Feasible | LpStatus::Unbounded => {
                if self.point.is_none() {
                    return Err("feasible status without a point".into());
                }
            }
            LpStatus::Optimal => {
                let point = self.point.as_ref().ok_or("optimal status without a point")?;
                let optimum = self.optimum.as_ref().ok_or("optimal status without a value")?;
                if &lp.objective_value(point) != optimum {
                    return Err("objective at point differs from reported optimum".into());
                }
                let Some(Certificate::Dual(y)) = &self.certificate else {
                    return Err("optimal status without a dual certificate".into());
                };
                let zero_obj = vec![Rational::zero(); lp.num_vars];
                let c = lp.objective.as_ref().unwrap_or(&zero_obj);
                let aty = transpose_times(lp, y);
                if aty.iter().zip(c).any(|(lhs, cj)| lhs < cj) {
                    return Err("dual certificate is not dual feasible".into());
                }
                let by = lp.equalities.iter().zip(y).fold(Rational::zero(), |acc, (eq, yi)| acc + &eq.rhs * yi);
                if &by != optimum {
                    return Err("dual objective differs from primal optimum".into());
                }
            }
            LpStatus::Infeasible => {
                let Some(Certificate::Farkas(y)) = &self.certificate else {
                    return Err("infeasible status without a Farkas certificate".into());
                };
                if transpose_times(lp, y).iter().any(|v| v.is_negative()) {
                    return Err("Farkas certificate has a negative column product".into());
                }
                let by = lp.equalities.iter().zip(y).fold(Rational::zero(), |acc, (eq, yi)| acc + &eq.rhs * yi);
                if !by.is_negative() {
                    return Err("Farkas certificate does not separate the right-hand side".into());
                }
            }
        }
        Ok(())
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .filter(|(x, _)| !x.is_zero())
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

fn transpose_times(lp: &LpProblem, y: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); lp.num_vars];
    for (eq, yi) in lp.equalities.iter().zip(y) {
        if yi.is_zero() {
            continue;
        }
        for (slot, a) in out.iter_mut().zip(&eq.coeffs) {
            if !a.is_zero() {
                *slot += a * yi;
            }
        }
    }
    out
}

fn format_row(row: &[Rational]) -> String {
    row.iter().map(format_rational).collect::<Vec<_>>().join(" ")
}

/// Dense tableau over the original columns followed by one artificial column
/// per row. The artificial block always holds `B^{-1}` of the sign-normalized
/// system, which is where dual vectors are read from.
#[derive(Clone)]
struct Tableau {
    num_vars: usize,
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// Reduced costs `c_j - c_B B^{-1} A_j` for the current phase.
    reduced: Vec<Rational>,
    value: Rational,
    /// `true` where the original row was multiplied by `-1`.
    negated: Vec<bool>,
    pivots: usize,
}

/// Degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 32;

enum RunResult {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn new(lp: &LpProblem) -> Self {
        let n = lp.num_vars;
        let m = lp.equalities.len();
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut negated = Vec::with_capacity(m);
        for (i, eq) in lp.equalities.iter().enumerate() {
            let flip = eq.rhs.is_negative();
            let mut row: Vec<Rational> = Vec::with_capacity(n + m);
            row.extend(eq.coeffs.iter().map(|a| if flip { -a } else { a.clone() }));
            row.extend((0..m).map(|k| if k == i { Rational::one() } else { Rational::zero() }));
            rows.push(row);
            rhs.push(if flip { -&eq.rhs } else { eq.rhs.clone() });
            negated.push(flip);
        }
        Tableau {
            num_vars: n,
            rows,
            rhs,
            basis: (n..n + m).collect(),
            reduced: vec![Rational::zero(); n + m],
            value: Rational::zero(),
            negated,
            pivots: 0,
        }
    }

    fn width(&self) -> usize {
        self.reduced.len()
    }

    /// Installs the cost vector `costs` (full width) and recomputes reduced
    /// costs and the objective value for the current basis.
    fn set_costs(&mut self, costs: &[Rational]) {
        let mut reduced = costs.to_vec();
        let mut value = Rational::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &costs[b];
            if cb.is_zero() {
                continue;
            }
            for (slot, t) in reduced.iter_mut().zip(&self.rows[i]) {
                if !t.is_zero() {
                    *slot -= cb * t;
                }
            }
            value += cb * &self.rhs[i];
        }
        self.reduced = reduced;
        self.value = value;
    }

    fn pivot(&mut self, p: usize, j: usize) {
        let piv = self.rows[p][j].clone();
        debug_assert!(!piv.is_zero());
        if !piv.is_one() {
            for t in self.rows[p].iter_mut().filter(|t| !t.is_zero()) {
                *t /= &piv;
            }
            self.rhs[p] /= &piv;
        }
        let pivot_row: Vec<(usize, Rational)> = self.rows[p]
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_zero())
            .map(|(k, t)| (k, t.clone()))
            .collect();
        let pivot_rhs = self.rhs[p].clone();
        for i in 0..self.rows.len() {
            if i == p || self.rows[i][j].is_zero() {
                continue;
            }
            let factor = self.rows[i][j].clone();
            let row = &mut self.rows[i];
            for (k, t) in &pivot_row {
                row[*k] -= &factor * t;
            }
            if !pivot_rhs.is_zero() {
                self.rhs[i] -= &factor * &pivot_rhs;
            }
        }
        let factor = self.reduced[j].clone();
        if !factor.is_zero() {
            for (k, t) in &pivot_row {
                self.reduced[*k] -= &factor * t;
            }
            self.value += &factor * &pivot_rhs;
        }
        self.basis[p] = j;
        self.pivots += 1;
        if log_enabled!(Level::Trace) {
            trace!("pivot #{} on row {p}, column {j}\n{self}", self.pivots);
        }
    }

    /// Row chosen by the minimum-ratio test for entering column `j`, ties
    /// broken by the smallest basic variable index (Bland).
    fn leaving_row(&self, j: usize) -> Option<usize> {
        let mut best: Option<(usize, Rational)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if !row[j].is_positive() {
                continue;
            }
            let ratio = &self.rhs[i] / &row[j];
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    if ratio < br || (ratio == br && self.basis[i] < self.basis[bi]) {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    /// Primal simplex; only original columns may enter. Uses the largest
    /// reduced cost, and Bland's rule while a run of degenerate pivots lasts
    /// longer than `DEGENERATE_STREAK`, which rules out cycling.
    fn run(&mut self) -> RunResult {
        let mut streak = 0usize;
        loop {
            let candidates = (0..self.num_vars).filter(|&j| self.reduced[j].is_positive());
            let entering = if streak > DEGENERATE_STREAK {
                candidates.min()
            } else {
                candidates.fold(None, |best: Option<usize>, j| match best {
                    Some(b) if self.reduced[b] >= self.reduced[j] => Some(b),
                    _ => Some(j),
                })
            };
            let Some(j) = entering else {
                return RunResult::Optimal;
            };
            match self.leaving_row(j) {
                Some(p) => {
                    let before = self.value.clone();
                    self.pivot(p, j);
                    if self.value == before {
                        streak += 1;
                    } else {
                        streak = 0;
                    }
                }
                None => return RunResult::Unbounded,
            }
        }
    }

    fn point(&self) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.num_vars];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.num_vars {
                x[b] = self.rhs[i].clone();
            }
        }
        x
    }

    /// Dual vector of the original (unnormalized) rows, from the reduced
    /// costs of the artificial block: `y_k = c_{n+k} - d_{n+k}`.
    fn duals(&self, artificial_cost: &Rational) -> Vec<Rational> {
        (0..self.rows.len())
            .map(|k| {
                let y = artificial_cost - &self.reduced[self.num_vars + k];
                if self.negated[k] {
                    -y
                } else {
                    y
                }
            })
            .collect()
    }

    /// Phase I. Returns `Err(farkas)` when infeasible; on success every
    /// artificial left in the basis sits on a redundant row.
    fn phase_one(&mut self) -> Result<Vec<bool>, Vec<Rational>> {
        let n = self.num_vars;
        let mut costs = vec![Rational::zero(); self.width()];
        for c in &mut costs[n..] {
            *c = -Rational::one();
        }
        self.set_costs(&costs);
        // Phase I is bounded below by zero.
        let _ = self.run();
        if !self.value.is_zero() {
            return Err(self.duals(&-Rational::one()));
        }
        let mut redundant = vec![false; self.rows.len()];
        for p in 0..self.rows.len() {
            if self.basis[p] < n {
                continue;
            }
            match (0..n).find(|&j| !self.rows[p][j].is_zero()) {
                Some(j) => self.pivot(p, j),
                None => redundant[p] = true,
            }
        }
        Ok(redundant)
    }
}

impl fmt::Display for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows.iter().enumerate() {
            writeln!(f, "  x{:<4} | {} | {}", self.basis[i], format_row(row), format_rational(&self.rhs[i]))?;
        }
        write!(f, "  d      | {} | {}", format_row(&self.reduced), format_rational(&self.value))
    }
}

/// Phase-I feasibility. The objective, if any, is ignored.
pub fn solve_feasibility(lp: &LpProblem) -> LpSolution {
    let mut tableau = Tableau::new(lp);
    match tableau.phase_one() {
        Ok(_) => LpSolution {
            status: LpStatus::Feasible,
            point: Some(tableau.point()),
            optimum: None,
            certificate: None,
        },
        Err(farkas) => infeasible(farkas),
    }
}

/// Maximizes the objective (zero when absent) over the feasible set.
pub fn solve_max(lp: &LpProblem) -> LpSolution {
    let mut tableau = Tableau::new(lp);
    if let Err(farkas) = tableau.phase_one() {
        return infeasible(farkas);
    }
    let n = lp.num_vars;
    let mut costs = vec![Rational::zero(); tableau.width()];
    if let Some(c) = &lp.objective {
        costs[..n].clone_from_slice(c);
    }
    tableau.set_costs(&costs);
    match tableau.run() {
        RunResult::Optimal => LpSolution {
            status: LpStatus::Optimal,
            point: Some(tableau.point()),
            optimum: Some(tableau.value.clone()),
            certificate: Some(Certificate::Dual(tableau.duals(&Rational::zero()))),
        },
        RunResult::Unbounded => LpSolution {
            status: LpStatus::Unbounded,
            point: Some(tableau.point()),
            optimum: None,
            certificate: None,
        },
    }
}

/// Minimizes the objective; the reported optimum is the minimum and the dual
/// certificate refers to the negated (maximization) problem.
pub fn solve_min(lp: &LpProblem) -> LpSolution {
    let mut negated = lp.clone();
    if let Some(c) = &mut negated.objective {
        for v in c.iter_mut() {
            *v = -v.clone();
        }
    }
    let mut solution = solve_max(&negated);
    if let Some(v) = &mut solution.optimum {
        *v = -v.clone();
    }
    solution
}

fn infeasible(farkas: Vec<Rational>) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        point: None,
        optimum: None,
        certificate: Some(Certificate::Farkas(farkas)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("vertex enumeration visited more than {cap} bases")]
pub struct VertexLimit {
    pub cap: usize,
}

/// All vertices of `{x >= 0 : A x = b}` in lexicographic order, found by
/// breadth-first search over feasible bases. Empty when infeasible.
pub fn enumerate_vertices(lp: &LpProblem, cap: usize) -> Result<Vec<Vec<Rational>>, VertexLimit> {
    let mut tableau = Tableau::new(lp);
    let redundant = match tableau.phase_one() {
        Ok(r) => r,
        Err(_) => return Ok(Vec::new()),
    };
    let n = lp.num_vars;
    let mut reduced = Tableau {
        num_vars: n,
        rows: Vec::new(),
        rhs: Vec::new(),
        basis: Vec::new(),
        reduced: vec![Rational::zero(); n],
        value: Rational::zero(),
        negated: Vec::new(),
        pivots: 0,
    };
    for (i, row) in tableau.rows.iter().enumerate() {
        if redundant[i] {
            continue;
        }
        reduced.rows.push(row[..n].to_vec());
        reduced.rhs.push(tableau.rhs[i].clone());
        reduced.basis.push(tableau.basis[i]);
        reduced.negated.push(false);
    }
    let key = |t: &Tableau| {
        let mut b = t.basis.clone();
        b.sort_unstable();
        b
    };
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(key(&reduced));
    let mut queue = VecDeque::from([reduced]);
    let mut vertices = BTreeSet::new();
    while let Some(t) = queue.pop_front() {
        vertices.insert(t.point());
        for j in 0..n {
            if t.basis.contains(&j) {
                continue;
            }
            let Some(best) = t.leaving_row(j) else { continue };
            let ratio = &t.rhs[best] / &t.rows[best][j];
            for r in 0..t.rows.len() {
                if !t.rows[r][j].is_positive() || &t.rhs[r] / &t.rows[r][j] != ratio {
                    continue;
                }
                let mut next = t.clone();
                next.pivot(r, j);
                if seen.insert(key(&next)) {
                    if seen.len() > cap {
                        return Err(VertexLimit { cap });
                    }
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(vertices.into_iter().collect())
}
