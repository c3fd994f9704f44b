//! Brute-force checks that re-derive verdicts by other routes.
//!
//! The Fine oracle works on the basis of deterministic global assignments
//! (every assignment is a column, every bunch outcome including the
//! impossible ones is a row), which is a different LP from the pruned joint
//! pmf used by the coupling engine. Small systems skip the simplex solver
//! entirely and test every basis by Gaussian elimination.

use num_rational::Ratio;
use num_traits::{CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::consistify::{consistify, ConsistifyOutcome};
use crate::coupling::{cbd_analyze, search_reduced_coupling};
use crate::error::{Error, Result};
use crate::lp::{self, Certificate, LpProblem, LpStatus};
use crate::pmf::{product_tuples, Outcome, Pmf};
use crate::rational::{format_rational, is_nonnegative, Rational};
use crate::system::{check_connectedness, System};

/// Largest number of global assignments the Fine oracle will enumerate.
pub const FINE_LIMIT: u128 = 1_000_000;

/// Up to this many assignments the oracle does not call the LP solver.
pub const BASIS_ENUMERATION_LIMIT: usize = 16;

/// Largest alphabet accepted by [`exhaustive_pair_max`].
pub const PAIR_ALPHABET_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OracleMethod {
    BasisEnumeration,
    Simplex,
}

/// A convex mixture of deterministic global assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FineWeights {
    pub assignments: Vec<Vec<Outcome>>,
    pub weights: Vec<Rational>,
    pub method: OracleMethod,
}

impl FineWeights {
    /// Pushforward of the mixture onto the contents of each context equals
    /// that context's bunch.
    pub fn reproduces(&self, system: &System) -> bool {
        if self.weights.iter().any(|w| !is_nonnegative(w)) {
            return false;
        }
        let shape: Vec<usize> = system.content_ids().map(|q| system.alphabet_size(q)).collect();
        let joint = Pmf::accumulate(shape, self.assignments.iter().cloned().zip(self.weights.iter().cloned()));
        joint.total().is_one()
            && system.contexts().iter().all(|c| {
                let positions: Vec<usize> = c.contents.iter().map(|q| q.index()).collect();
                joint.marginal(&positions) == c.pmf
            })
    }
}

/// Assignments with the first content varying fastest.
fn assignments(shape: &[usize]) -> Vec<Vec<Outcome>> {
    let reversed: Vec<usize> = shape.iter().rev().copied().collect();
    product_tuples(&reversed).map(|mut t| {
        t.reverse();
        t
    })
    .collect()
}

/// Normalization row, then one row per outcome tuple of every context.
fn assignment_rows(system: &System, columns: &[Vec<Outcome>]) -> Vec<(Vec<Rational>, Rational)> {
    let mut rows = vec![(vec![Rational::one(); columns.len()], Rational::one())];
    for context in system.contexts() {
        let shape: Vec<usize> = context.contents.iter().map(|&q| system.alphabet_size(q)).collect();
        for t in product_tuples(&shape) {
            let coeffs = columns
                .iter()
                .map(|a| {
                    let hit = context.contents.iter().zip(&t).all(|(q, &x)| a[q.index()] == x);
                    if hit { Rational::one() } else { Rational::zero() }
                })
                .collect();
            rows.push((coeffs, context.pmf.prob(&t)));
        }
    }
    rows
}

/// Fine's joint-distribution test: a mixture of deterministic assignments
/// reproducing every bunch, or `None` when there is none.
pub fn fine_oracle(system: &System) -> Result<Option<FineWeights>> {
    let shape: Vec<usize> = system.content_ids().map(|q| system.alphabet_size(q)).collect();
    let size = shape.iter().fold(1u128, |acc, &n| acc.saturating_mul(n as u128));
    if size > FINE_LIMIT {
        return Err(Error::SizeGuard { size, limit: FINE_LIMIT });
    }
    let columns = assignments(&shape);
    let rows = assignment_rows(system, &columns);
    let found = if columns.len() <= BASIS_ENUMERATION_LIMIT {
        basis_enumeration(&rows, columns.len()).map(|w| (w, OracleMethod::BasisEnumeration))
    } else {
        let mut problem = LpProblem::new(columns.len());
        for (coeffs, rhs) in rows {
            problem.add_equality(coeffs, rhs).expect("row length matches");
        }
        lp::solve_feasibility(&problem).point.map(|w| (w, OracleMethod::Simplex))
    };
    Ok(found.map(|(weights, method)| FineWeights { assignments: columns, weights, method }))
}

/// Row-reduces `[A | b]`. Returns the nonzero rows, or `None` if the system
/// is inconsistent.
fn row_reduce(rows: &[(Vec<Rational>, Rational)], n: usize) -> Option<Vec<(Vec<Rational>, Rational)>> {
    let mut m: Vec<(Vec<Rational>, Rational)> = rows.to_vec();
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..m.len()).find(|&r| !m[r].0[col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank].0[col].clone();
        m[rank].0.iter_mut().for_each(|x| *x /= &pivot);
        m[rank].1 /= &pivot;
        let pivot_row = m[rank].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r == rank {
                continue;
            }
            let f = row.0[col].clone();
            if f.is_zero() {
                continue;
            }
            for (x, y) in row.0.iter_mut().zip(&pivot_row.0) {
                *x -= &f * y;
            }
            row.1 -= &f * &pivot_row.1;
        }
        rank += 1;
    }
    if m[rank..].iter().any(|(_, b)| !b.is_zero()) {
        return None;
    }
    m.truncate(rank);
    Some(m)
}

/// Solves the square system on columns `cols`, if it is nonsingular.
fn solve_square(rows: &[(Vec<Rational>, Rational)], cols: &[usize]) -> Option<Vec<Rational>> {
    let sub: Vec<(Vec<Rational>, Rational)> =
        rows.iter().map(|(a, b)| (cols.iter().map(|&j| a[j].clone()).collect(), b.clone())).collect();
    let reduced = row_reduce(&sub, cols.len())?;
    if reduced.len() < cols.len() {
        return None;
    }
    // Fully reduced square system: row i holds the unit vector e_i.
    Some(reduced.into_iter().map(|(_, b)| b).collect())
}

type Small = Ratio<i128>;

fn small(x: &Rational) -> Option<Small> {
    Some(Small::new(x.numer().to_i128()?, x.denom().to_i128()?))
}

/// Machine-integer version of [`solve_square`]. `Err(())` means an
/// intermediate value overflowed.
fn solve_square_small(rows: &[(Vec<Small>, Small)], cols: &[usize]) -> Result<Option<Vec<Small>>, ()> {
    let k = cols.len();
    let mut m: Vec<Vec<Small>> = rows
        .iter()
        .map(|(a, b)| cols.iter().map(|&j| a[j]).chain(std::iter::once(*b)).collect())
        .collect();
    for col in 0..k {
        let Some(p) = (col..k).find(|&r| !m[r][col].is_zero()) else {
            return Ok(None);
        };
        m.swap(col, p);
        let pivot = m[col][col];
        for r in 0..k {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].checked_div(&pivot).ok_or(())?;
            for j in col..=k {
                let d = f.checked_mul(&m[col][j]).ok_or(())?;
                m[r][j] = m[r][j].checked_sub(&d).ok_or(())?;
            }
        }
    }
    (0..k).map(|i| m[i][k].checked_div(&m[i][i]).ok_or(())).collect::<Result<Vec<_>, ()>>().map(Some)
}

/// Tries every basic solution of `A w = b` and returns the first
/// nonnegative one.
fn basis_enumeration(rows: &[(Vec<Rational>, Rational)], n: usize) -> Option<Vec<Rational>> {
    let reduced = row_reduce(rows, n)?;
    let k = reduced.len();
    let fast: Option<Vec<(Vec<Small>, Small)>> = reduced
        .iter()
        .map(|(a, b)| Some((a.iter().map(small).collect::<Option<Vec<_>>>()?, small(b)?)))
        .collect();
    let mut cols: Vec<usize> = (0..k).collect();
    loop {
        let nonnegative = match fast.as_ref().map(|f| solve_square_small(f, &cols)) {
            Some(Ok(w)) => w.map(|w| w.iter().all(|x| !x.is_negative())),
            _ => solve_square(&reduced, &cols).map(|w| w.iter().all(is_nonnegative)),
        };
        if nonnegative == Some(true) {
            let w = solve_square(&reduced, &cols).expect("nonsingular");
            let mut full = vec![Rational::zero(); n];
            for (&j, x) in cols.iter().zip(w) {
                full[j] = x;
            }
            return Some(full);
        }
        // Next k-subset in lexicographic order.
        let i = (0..k).rev().find(|&i| cols[i] < n - k + i)?;
        cols[i] += 1;
        for j in i + 1..k {
            cols[j] = cols[j - 1] + 1;
        }
    }
}

/// `max P[X = Y]` from the full `n × n` coupling LP.
pub fn exhaustive_pair_max(p: &Pmf, q: &Pmf) -> Result<Rational> {
    if p.arity() != 1 || p.shape() != q.shape() {
        return Err(Error::AlphabetMismatch { left: p.shape().to_vec(), right: q.shape().to_vec() });
    }
    let n = p.shape()[0];
    if n > PAIR_ALPHABET_LIMIT {
        return Err(Error::SizeGuard { size: n as u128, limit: PAIR_ALPHABET_LIMIT as u128 });
    }
    let var = |u: usize, v: usize| u * n + v;
    let mut problem = LpProblem::new(n * n);
    for u in 0..n {
        problem
            .add_sparse_equality((0..n).map(|v| (var(u, v), Rational::one())), p.prob(&[u]))
            .expect("in range");
        problem
            .add_sparse_equality((0..n).map(|v| (var(v, u), Rational::one())), q.prob(&[u]))
            .expect("in range");
    }
    let mut objective = vec![Rational::zero(); n * n];
    for u in 0..n {
        objective[var(u, u)] = Rational::one();
    }
    problem.set_objective(objective).expect("length");
    let solution = lp::solve_max(&problem);
    assert_eq!(solution.status, LpStatus::Optimal, "two pmfs always have a coupling");
    Ok(solution.optimum.expect("optimal"))
}

/// Verdicts compared by [`cross_validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    pub reduced_coupling_exists: bool,
    pub fine_mixture_exists: bool,
    pub consistent: bool,
    pub cbd_contextual: bool,
    pub consistified_contextual: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossCheck {
    pub name: &'static str,
    pub agree: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossReport {
    pub verdicts: Verdicts,
    pub checks: Vec<CrossCheck>,
}

impl CrossReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.agree)
    }
}

/// Members tried when a consistified class has several members.
const CLASS_MEMBER_CAP: usize = 256;

pub fn cross_validate(system: &System) -> Result<CrossReport> {
    cross_validate_with(system, |_| {})
}

/// Like [`cross_validate`], with a hook that may alter the verdicts before
/// they are compared. Used to test that disagreements are reported.
#[doc(hidden)]
pub fn cross_validate_with(system: &System, tamper: impl FnOnce(&mut Verdicts)) -> Result<CrossReport> {
    let search = search_reduced_coupling(system);
    let fine = fine_oracle(system)?;
    let cbd = cbd_analyze(system);
    let consistent = check_connectedness(system).consistent;
    let (consistified_contextual, consistified_note) = match consistify(system) {
        ConsistifyOutcome::Consistified(r) => {
            let found = search_reduced_coupling(&r.system);
            let note = match (&found.coupling, found.solution.verify(&found.lp)) {
                (_, Err(e)) => format!("consistified certificate invalid: {e}"),
                (Some(_), Ok(())) => "consistified system has a reduced coupling".to_string(),
                (None, Ok(())) => "consistified system: Farkas certificate verified".to_string(),
            };
            (found.coupling.is_none(), note)
        }
        ConsistifyOutcome::ClassEmpty(q) => {
            (true, format!("no multimaximal coupling for content {}", system.content(q).id))
        }
        ConsistifyOutcome::ClassMultiple(class) => match class.members(CLASS_MEMBER_CAP) {
            Ok(members) if members.iter().any(|m| search_reduced_coupling(&m.system).coupling.is_some()) => {
                (false, format!("a vertex member of {} is noncontextual", members.len()))
            }
            _ => (class.contextual(), "class verdict from the joint pinned LP".to_string()),
        },
    };
    let mut verdicts = Verdicts {
        reduced_coupling_exists: search.coupling.is_some(),
        fine_mixture_exists: fine.is_some(),
        consistent,
        cbd_contextual: cbd.contextual,
        consistified_contextual,
    };
    tamper(&mut verdicts);

    let mut checks = Vec::new();
    let certificate = match search.solution.verify(&search.lp) {
        Ok(()) => match &search.solution.certificate {
            Some(Certificate::Farkas(y)) => {
                let y: Vec<String> = y.iter().map(format_rational).collect();
                format!("no reduced coupling; Farkas multipliers [{}] verified", y.join(", "))
            }
            Some(Certificate::Dual(_)) => "reduced coupling with verified dual certificate".to_string(),
            None => "reduced coupling point verified".to_string(),
        },
        Err(e) => format!("reduced-coupling certificate invalid: {e}"),
    };
    let fine_detail = match &fine {
        Some(w) => format!(
            "Fine weights ({:?}): {}",
            w.method,
            w.assignments
                .iter()
                .zip(&w.weights)
                .filter(|(_, p)| !p.is_zero())
                .map(|(a, p)| format!("{a:?}:{}", format_rational(p)))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        None => "no Fine mixture".to_string(),
    };
    checks.push(CrossCheck {
        name: "fine-vs-reduced-coupling",
        agree: verdicts.fine_mixture_exists == verdicts.reduced_coupling_exists,
        detail: format!("{certificate}; {fine_detail}"),
    });
    checks.push(CrossCheck {
        name: "certificates",
        agree: search.solution.verify(&search.lp).is_ok() && fine.as_ref().is_none_or(|w| w.reproduces(system)),
        detail: "LP certificate and Fine mixture checked by substitution".to_string(),
    });
    checks.push(CrossCheck {
        name: "cbd-vs-consistified",
        agree: verdicts.cbd_contextual == verdicts.consistified_contextual,
        detail: format!(
            "measure {} (optimum {} of bound {}); {consistified_note}",
            format_rational(&cbd.measure),
            format_rational(&cbd.optimum),
            format_rational(&cbd.bound)
        ),
    });
    if verdicts.consistent {
        checks.push(CrossCheck {
            name: "consistent-cbd-vs-traditional",
            agree: verdicts.cbd_contextual != verdicts.reduced_coupling_exists,
            detail: "on consistently connected systems both definitions coincide".to_string(),
        });
    }
    Ok(CrossReport { verdicts, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::coupling::max_equal_prob;
    use crate::rational::rat;
    use crate::system::SystemBuilder;

    fn bern(p1: Rational) -> Pmf {
        Pmf::new(vec![2], [(vec![0], Rational::one() - &p1), (vec![1], p1)]).unwrap()
    }

    #[test]
    fn pr_box_has_no_mixture() {
        assert!(fine_oracle(&catalog::pr_box()).unwrap().is_none());
    }

    #[test]
    fn deterministic_system_has_one_assignment() {
        let s = SystemBuilder::new()
            .binary("a")
            .binary("b")
            .context("c", &["a", "b"], [(vec![1, 0], rat(1, 1))])
            .context("d", &["b"], [(vec![0], rat(1, 1))])
            .build()
            .unwrap();
        let w = fine_oracle(&s).unwrap().unwrap();
        assert_eq!(w.method, OracleMethod::BasisEnumeration);
        let support: Vec<_> = w.assignments.iter().zip(&w.weights).filter(|(_, p)| !p.is_zero()).collect();
        assert_eq!(support, [(&vec![1, 0], &rat(1, 1))]);
    }

    #[test]
    fn classical_bound_has_mixture() {
        let s = catalog::chsh([rat(1, 1), rat(1, 1), rat(1, 1), rat(1, 1)]).unwrap();
        let w = fine_oracle(&s).unwrap().unwrap();
        assert!(w.reproduces(&s));
    }

    #[test]
    fn simplex_path_on_five_contents() {
        let s = SystemBuilder::new()
            .binary("a")
            .binary("b")
            .binary("c")
            .binary("d")
            .binary("e")
            .context("x", &["a", "b", "c"], [(vec![0, 0, 0], rat(1, 2)), (vec![1, 1, 1], rat(1, 2))])
            .context("y", &["c", "d", "e"], [(vec![0, 1, 0], rat(1, 2)), (vec![1, 0, 1], rat(1, 2))])
            .build()
            .unwrap();
        let w = fine_oracle(&s).unwrap().unwrap();
        assert_eq!(w.method, OracleMethod::Simplex);
        assert!(w.reproduces(&s));
    }

    #[test]
    fn size_guard() {
        let mut b = SystemBuilder::new();
        let names: Vec<String> = (0..21).map(|i| format!("q{i}")).collect();
        for n in &names {
            b = b.binary(n);
        }
        for n in &names {
            b = b.context(n, &[n], [(vec![0], rat(1, 1))]);
        }
        assert!(matches!(fine_oracle(&b.build().unwrap()), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn pair_max_examples() {
        assert_eq!(exhaustive_pair_max(&bern(rat(1, 2)), &bern(rat(3, 4))).unwrap(), rat(3, 4));
        assert_eq!(exhaustive_pair_max(&bern(rat(1, 3)), &bern(rat(1, 3))).unwrap(), rat(1, 1));
        assert_eq!(exhaustive_pair_max(&bern(rat(0, 1)), &bern(rat(1, 1))).unwrap(), rat(0, 1));
        let p = Pmf::new(vec![3], [(vec![0], rat(1, 5)), (vec![1], rat(3, 5)), (vec![2], rat(1, 5))]).unwrap();
        let q = Pmf::new(vec![3], [(vec![0], rat(1, 2)), (vec![2], rat(1, 2))]).unwrap();
        assert_eq!(exhaustive_pair_max(&p, &q).unwrap(), max_equal_prob(&p, &q).unwrap());
    }

    #[test]
    fn catalog_agrees() {
        for (name, s) in catalog::fixtures() {
            let report = cross_validate(&s).unwrap();
            assert!(report.passed(), "{name}: {report:?}");
        }
    }

    #[test]
    fn tampered_verdict_is_reported() {
        let report = cross_validate_with(&catalog::pr_box(), |v| v.fine_mixture_exists = true).unwrap();
        assert!(!report.passed());
        let failing: Vec<_> = report.checks.iter().filter(|c| !c.agree).map(|c| c.name).collect();
        assert_eq!(failing, ["fine-vs-reduced-coupling"]);
        assert!(report.checks[0].detail.contains("Farkas"));
    }
}
