//! Coupling problems: reduced couplings (traditional noncontextuality),
//! maximal-equality couplings (Contextuality-by-Default), and multimaximal
//! couplings of a single content's variables.
//!
//! Every problem is posed as a pmf over joint assignments to a list of
//! variables, constrained so that chosen coordinate blocks have prescribed
//! marginals. Assignments that would hit a zero-probability outcome of some
//! block are removed before the LP is built.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpSolution, LpStatus, VertexLimit};
use crate::pmf::{Outcome, Pmf};
use crate::rational::{min_ref, Rational};
use crate::system::{ContentId, ContextId, System};

/// Which construction produced a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    /// Optimal vertex of the maximal-equality LP.
    MaximalEquality,
    /// Closed-form nested coupling of a dichotomous content.
    Nested,
    /// Vertex of the pinned multimaximal LP.
    Pinned,
}

/// A joint distribution of the variables `(q, c)` listed in `variables`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coupling {
    pub variables: Vec<(ContentId, ContextId)>,
    pub joint: Pmf,
    pub provenance: Provenance,
}

impl Coupling {
    /// `P[S_a = S_b]` for two variable positions.
    pub fn equality_probability(&self, a: usize, b: usize) -> Rational {
        self.joint
            .iter()
            .filter(|(t, _)| t[a] == t[b])
            .fold(Rational::zero(), |acc, (_, p)| acc + p)
    }

    pub fn position(&self, q: ContentId, c: ContextId) -> Option<usize> {
        self.variables.iter().position(|&v| v == (q, c))
    }
}

/// Joint distribution with one coordinate per content, in content order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedCoupling {
    pub joint: Pmf,
}

/// `max P[X = Y]` over couplings of `X ~ p` and `Y ~ q`, which is
/// `sum_v min(p(v), q(v))`.
pub fn max_equal_prob(p: &Pmf, q: &Pmf) -> Result<Rational> {
    if p.shape() != q.shape() {
        return Err(Error::AlphabetMismatch { left: p.shape().to_vec(), right: q.shape().to_vec() });
    }
    Ok(p.iter()
        .map(|(t, pv)| (pv, q.prob(t)))
        .fold(Rational::zero(), |acc, (pv, qv)| acc + min_ref(pv, &qv)))
}

/// A pmf-over-assignments LP: columns are the surviving joint assignments.
#[derive(Debug, Clone)]
pub(crate) struct CouplingLp {
    pub shape: Vec<usize>,
    pub columns: Vec<Vec<Outcome>>,
    pub lp: LpProblem,
}

/// Marginal constraint: the coordinates at `positions` are distributed as `target`.
pub(crate) struct Block<'a> {
    pub positions: Vec<usize>,
    pub target: &'a Pmf,
}

impl CouplingLp {
    pub fn new(shape: Vec<usize>, blocks: &[Block<'_>]) -> Self {
        let columns = surviving_assignments(&shape, blocks);
        let mut lp = LpProblem::new(columns.len());
        for block in blocks {
            let mut rows: BTreeMap<Vec<Outcome>, Vec<(usize, Rational)>> = block
                .target
                .support()
                .map(|t| (t.clone(), Vec::new()))
                .collect();
            for (k, s) in columns.iter().enumerate() {
                let projected: Vec<Outcome> = block.positions.iter().map(|&i| s[i]).collect();
                if let Some(row) = rows.get_mut(&projected) {
                    row.push((k, Rational::one()));
                }
            }
            for (tuple, terms) in rows {
                lp.add_sparse_equality(terms, block.target.prob(&tuple))
                    .expect("column indices are in range");
            }
        }
        CouplingLp { shape, columns, lp }
    }

    /// Objective assigning `weight(s)` to each surviving assignment.
    pub fn set_objective(&mut self, weight: impl Fn(&[Outcome]) -> Rational) {
        let c = self.columns.iter().map(|s| weight(s)).collect();
        self.lp.set_objective(c).expect("objective length matches");
    }

    pub fn joint(&self, point: &[Rational]) -> Pmf {
        Pmf::accumulate(
            self.shape.clone(),
            self.columns.iter().cloned().zip(point.iter().cloned()),
        )
    }
}

/// Depth-first enumeration of assignments whose every completed block lands
/// in the support of that block's target.
fn surviving_assignments(shape: &[usize], blocks: &[Block<'_>]) -> Vec<Vec<Outcome>> {
    // Blocks are checked at the position where their last coordinate is set.
    let mut due: Vec<Vec<&Block<'_>>> = vec![Vec::new(); shape.len()];
    for block in blocks {
        if let Some(&last) = block.positions.iter().max() {
            due[last].push(block);
        }
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(shape.len());
    fn walk<'b>(
        shape: &[usize],
        due: &[Vec<&Block<'b>>],
        current: &mut Vec<Outcome>,
        out: &mut Vec<Vec<Outcome>>,
    ) {
        let depth = current.len();
        if depth == shape.len() {
            out.push(current.clone());
            return;
        }
        for x in 0..shape[depth] {
            current.push(x);
            let ok = due[depth].iter().all(|b| {
                let t: Vec<Outcome> = b.positions.iter().map(|&i| current[i]).collect();
                !b.target.prob(&t).is_zero()
            });
            if ok {
                walk(shape, due, current, out);
            }
            current.pop();
        }
    }
    walk(shape, &due, &mut current, &mut out);
    out
}

fn context_blocks<'a>(system: &'a System, position: impl Fn(ContentId, ContextId) -> usize) -> Vec<Block<'a>> {
    system
        .context_ids()
        .map(|c| {
            let ctx = system.context(c);
            Block {
                positions: ctx.contents.iter().map(|&q| position(q, c)).collect(),
                target: &ctx.pmf,
            }
        })
        .collect()
}

/// The reduced-coupling LP, its solution and certificate, and the coupling
/// when one exists.
#[derive(Debug, Clone)]
pub struct ReducedCouplingSearch {
    pub lp: LpProblem,
    pub solution: LpSolution,
    pub coupling: Option<ReducedCoupling>,
}

pub fn search_reduced_coupling(system: &System) -> ReducedCouplingSearch {
    let shape: Vec<usize> = system.content_ids().map(|q| system.alphabet_size(q)).collect();
    let blocks = context_blocks(system, |q, _| q.index());
    let problem = CouplingLp::new(shape, &blocks);
    let solution = lp::solve_feasibility(&problem.lp);
    let coupling = solution.point.as_ref().map(|x| {
        let joint = problem.joint(x);
        for c in system.context_ids() {
            let positions: Vec<usize> = system.context(c).contents.iter().map(|q| q.index()).collect();
            assert_eq!(
                joint.marginal(&positions),
                system.context(c).pmf,
                "reduced coupling violates the bunch of context {}",
                system.context(c).id
            );
        }
        ReducedCoupling { joint }
    });
    ReducedCouplingSearch { lp: problem.lp, solution, coupling }
}

/// A single jointly distributed `S` indexed by contents whose projection on
/// every `Q^c` is distributed as the bunch `R^c`, if one exists.
pub fn find_reduced_coupling(system: &System) -> Option<ReducedCoupling> {
    search_reduced_coupling(system).coupling
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairEquality {
    pub content: ContentId,
    pub first: ContextId,
    pub second: ContextId,
    /// Largest `P[S_q^c = S_q^c']` compatible with the two marginals.
    #[serde(with = "crate::rational::serde_rational")]
    pub maximal: Rational,
    /// `P[S_q^c = S_q^c']` in the optimal coupling.
    #[serde(with = "crate::rational::serde_rational")]
    pub achieved: Rational,
}

#[derive(Debug, Clone)]
pub struct CbdVerdict {
    pub contextual: bool,
    /// Sum of pairwise maxima minus the LP optimum.
    pub measure: Rational,
    pub optimum: Rational,
    pub bound: Rational,
    pub coupling: Coupling,
    pub pairs: Vec<PairEquality>,
    pub lp: LpProblem,
    pub solution: LpSolution,
}

/// Unordered content-sharing pairs `(q, {c, c'})` in context order.
pub fn content_pairs(system: &System) -> Vec<(ContentId, ContextId, ContextId)> {
    let mut pairs = Vec::new();
    for q in system.content_ids() {
        let cs = system.contexts_of(q);
        for (i, &c) in cs.iter().enumerate() {
            for &d in &cs[i + 1..] {
                pairs.push((q, c, d));
            }
        }
    }
    pairs
}

/// Contextuality-by-Default analysis.
///
/// Maximizes the total equality probability of all content-sharing pairs
/// over couplings of the whole system. Each term is capped by its pairwise
/// maximum, so the bound is attained exactly when every pair attains its own
/// maximum, which is the noncontextuality condition.
pub fn cbd_analyze(system: &System) -> CbdVerdict {
    let variables = system.incidence();
    let index: BTreeMap<(ContentId, ContextId), usize> =
        variables.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let shape: Vec<usize> = variables.iter().map(|&(q, _)| system.alphabet_size(q)).collect();
    let blocks = context_blocks(system, |q, c| index[&(q, c)]);
    let mut problem = CouplingLp::new(shape, &blocks);

    let pairs = content_pairs(system);
    let pair_positions: Vec<(usize, usize)> =
        pairs.iter().map(|&(q, c, d)| (index[&(q, c)], index[&(q, d)])).collect();
    problem.set_objective(|s| {
        let hits = pair_positions.iter().filter(|&&(a, b)| s[a] == s[b]).count();
        Rational::from_integer((hits as i64).into())
    });
    let solution = lp::solve_max(&problem.lp);
    assert_eq!(solution.status, LpStatus::Optimal, "a coupling of every system exists");
    let point = solution.point.as_ref().expect("optimal point");
    let coupling = Coupling { variables, joint: problem.joint(point), provenance: Provenance::MaximalEquality };
    for c in system.context_ids() {
        let positions: Vec<usize> = system.context(c).contents.iter().map(|&q| index[&(q, c)]).collect();
        assert_eq!(coupling.joint.marginal(&positions), system.context(c).pmf);
    }

    let mut bound = Rational::zero();
    let mut table = Vec::with_capacity(pairs.len());
    for (&(q, c, d), &(a, b)) in pairs.iter().zip(&pair_positions) {
        let maximal = max_equal_prob(
            &system.variable_marginal(q, c).expect("q measured in c"),
            &system.variable_marginal(q, d).expect("q measured in d"),
        )
        .expect("same content, same alphabet");
        bound += &maximal;
        let achieved = coupling.equality_probability(a, b);
        table.push(PairEquality { content: q, first: c, second: d, maximal, achieved });
    }
    let optimum = solution.optimum.clone().expect("optimal value");
    let measure = &bound - &optimum;
    CbdVerdict {
        contextual: !measure.is_zero(),
        measure,
        optimum,
        bound,
        coupling,
        pairs: table,
        lp: problem.lp,
        solution,
    }
}

/// Result of looking for a coupling `T_q` of all variables sharing content
/// `q` in which every pairwise equality probability is maximal.
#[derive(Debug, Clone)]
pub enum MultimaximalResult {
    Found(Coupling),
    NotUnique { witness: Coupling, class: MultimaximalClass },
    Empty,
}

/// The polytope of multimaximal couplings for one content.
#[derive(Debug, Clone)]
pub struct MultimaximalClass {
    pub content: ContentId,
    pub variables: Vec<(ContentId, ContextId)>,
    problem: CouplingLp,
}

impl MultimaximalClass {
    pub fn new(system: &System, q: ContentId) -> Result<Self> {
        if q.index() >= system.contents().len() {
            return Err(Error::UnknownContent(format!("#{}", q.index())));
        }
        let contexts = system.contexts_of(q);
        let marginals: Vec<Pmf> = contexts
            .iter()
            .map(|&c| system.variable_marginal(q, c))
            .collect::<Result<_>>()?;
        let blocks: Vec<Block<'_>> = marginals
            .iter()
            .enumerate()
            .map(|(i, m)| Block { positions: vec![i], target: m })
            .collect();
        let shape = vec![system.alphabet_size(q); contexts.len()];
        let mut problem = CouplingLp::new(shape, &blocks);
        for i in 0..contexts.len() {
            for j in i + 1..contexts.len() {
                let target = max_equal_prob(&marginals[i], &marginals[j])?;
                let terms: Vec<(usize, Rational)> = problem
                    .columns
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s[i] == s[j])
                    .map(|(k, _)| (k, Rational::one()))
                    .collect();
                problem.lp.add_sparse_equality(terms, target).expect("in range");
            }
        }
        Ok(MultimaximalClass {
            content: q,
            variables: contexts.into_iter().map(|c| (q, c)).collect(),
            problem,
        })
    }

    pub fn lp(&self) -> &LpProblem {
        &self.problem.lp
    }

    fn coupling(&self, point: &[Rational]) -> Coupling {
        Coupling {
            variables: self.variables.clone(),
            joint: self.problem.joint(point),
            provenance: Provenance::Pinned,
        }
    }

    pub fn some_member(&self) -> Option<Coupling> {
        lp::solve_feasibility(&self.problem.lp).point.map(|x| self.coupling(&x))
    }

    pub fn is_empty(&self) -> bool {
        self.some_member().is_none()
    }

    /// True when the class has exactly one member: every coordinate of the
    /// polytope has equal minimum and maximum.
    pub fn is_singleton(&self) -> bool {
        let n = self.problem.columns.len();
        let mut lp = self.problem.lp.clone();
        if !lp::solve_feasibility(&lp).is_feasible() {
            return false;
        }
        (0..n).all(|k| {
            let mut e = vec![Rational::zero(); n];
            e[k] = Rational::one();
            lp.set_objective(e).expect("length");
            lp::solve_max(&lp).optimum == lp::solve_min(&lp).optimum
        })
    }

    /// Vertices of the class, visiting at most `cap` simplex bases.
    pub fn vertices(&self, cap: usize) -> std::result::Result<Vec<Coupling>, VertexLimit> {
        Ok(lp::enumerate_vertices(&self.problem.lp, cap)?
            .iter()
            .map(|x| self.coupling(x))
            .collect())
    }
}

/// Monotone coupling of dichotomous variables: `T^c = 1` iff `U < P(R_q^c = 1)`
/// for a single uniform `U`. Every pair then agrees with probability
/// `1 - |P(R_q^c = 1) - P(R_q^{c'} = 1)|`, the pairwise maximum.
fn nested_coupling(variables: Vec<(ContentId, ContextId)>, ones: &[Rational]) -> Coupling {
    let mut cuts: Vec<Rational> = ones.to_vec();
    cuts.push(Rational::zero());
    cuts.push(Rational::one());
    cuts.sort();
    cuts.dedup();
    let entries = cuts.windows(2).map(|w| {
        let (lo, hi) = (&w[0], &w[1]);
        let tuple: Vec<Outcome> = ones.iter().map(|a| usize::from(a >= hi)).collect();
        (tuple, hi - lo)
    });
    Coupling {
        joint: Pmf::accumulate(vec![2; ones.len()], entries),
        variables,
        provenance: Provenance::Nested,
    }
}

pub fn multimaximal_coupling(system: &System, q: ContentId) -> Result<MultimaximalResult> {
    if q.index() >= system.contents().len() {
        return Err(Error::UnknownContent(format!("#{}", q.index())));
    }
    let contexts = system.contexts_of(q);
    if system.alphabet_size(q) == 2 {
        let ones: Vec<Rational> = contexts
            .iter()
            .map(|&c| system.variable_marginal(q, c).map(|m| m.prob(&[1])))
            .collect::<Result<_>>()?;
        let variables = contexts.into_iter().map(|c| (q, c)).collect();
        return Ok(MultimaximalResult::Found(nested_coupling(variables, &ones)));
    }
    let class = MultimaximalClass::new(system, q)?;
    let Some(witness) = class.some_member() else {
        return Ok(MultimaximalResult::Empty);
    };
    if class.is_singleton() {
        Ok(MultimaximalResult::Found(witness))
    } else {
        Ok(MultimaximalResult::NotUnique { witness, class })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::system::SystemBuilder;

    fn pmf1(probs: &[Rational]) -> Pmf {
        Pmf::new(vec![probs.len()], probs.iter().enumerate().map(|(i, p)| (vec![i], p.clone()))).unwrap()
    }

    /// One content measured alone in each context, with the given marginals.
    fn spread(alphabet: &[&str], marginals: &[Vec<Rational>]) -> System {
        let mut b = SystemBuilder::new().content("q", alphabet);
        for (i, m) in marginals.iter().enumerate() {
            b = b.context(&format!("c{}", i + 1), &["q"], m.iter().enumerate().map(|(x, p)| (vec![x], p.clone())));
        }
        b.build().unwrap()
    }

    #[test]
    fn max_equal_prob_cases() {
        let half = pmf1(&[rat(1, 2), rat(1, 2)]);
        let three_q = pmf1(&[rat(1, 4), rat(3, 4)]);
        assert_eq!(max_equal_prob(&half, &half).unwrap(), rat(1, 1));
        assert_eq!(max_equal_prob(&half, &three_q).unwrap(), rat(3, 4));
        let zero = pmf1(&[rat(1, 1), rat(0, 1)]);
        let one = pmf1(&[rat(0, 1), rat(1, 1)]);
        assert_eq!(max_equal_prob(&zero, &one).unwrap(), rat(0, 1));
        let ternary = pmf1(&[rat(1, 3), rat(1, 3), rat(1, 3)]);
        assert!(matches!(max_equal_prob(&half, &ternary), Err(Error::AlphabetMismatch { .. })));
    }

    #[test]
    fn deterministic_system_has_point_mass_reduced_coupling() {
        let system = SystemBuilder::new()
            .binary("a")
            .binary("b")
            .binary("c")
            .context("x", &["a", "b"], [(vec![1, 0], rat(1, 1))])
            .context("y", &["b", "c"], [(vec![0, 1], rat(1, 1))])
            .build()
            .unwrap();
        let s = find_reduced_coupling(&system).unwrap();
        assert!(s.joint.is_point_mass());
        assert_eq!(s.joint.prob(&[1, 0, 1]), rat(1, 1));
        let verdict = cbd_analyze(&system);
        assert!(!verdict.contextual);
    }

    #[test]
    fn single_context_has_zero_measure() {
        let system = spread(&["0", "1"], &[vec![rat(1, 3), rat(2, 3)]]);
        let verdict = cbd_analyze(&system);
        assert!(verdict.pairs.is_empty());
        assert_eq!(verdict.measure, rat(0, 1));
        assert!(!verdict.contextual);
    }

    #[test]
    fn lone_content_multimaximal_is_its_marginal() {
        let system = spread(&["0", "1", "2"], &[vec![rat(1, 2), rat(1, 4), rat(1, 4)]]);
        match multimaximal_coupling(&system, ContentId(0)).unwrap() {
            MultimaximalResult::Found(t) => {
                assert_eq!(t.joint, system.contexts()[0].pmf);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_coupling_for_three_dichotomous_marginals() {
        let system = spread(
            &["0", "1"],
            &[
                vec![rat(3, 4), rat(1, 4)],
                vec![rat(1, 2), rat(1, 2)],
                vec![rat(1, 4), rat(3, 4)],
            ],
        );
        let MultimaximalResult::Found(t) = multimaximal_coupling(&system, ContentId(0)).unwrap() else {
            panic!("dichotomous class is a singleton");
        };
        assert_eq!(t.equality_probability(0, 1), rat(3, 4));
        assert_eq!(t.equality_probability(0, 2), rat(1, 2));
        assert_eq!(t.equality_probability(1, 2), rat(3, 4));
        for (i, c) in system.context_ids().enumerate() {
            assert_eq!(t.joint.marginal(&[i]), system.variable_marginal(ContentId(0), c).unwrap());
        }
        // The pinned LP agrees and has no other member.
        let class = MultimaximalClass::new(&system, ContentId(0)).unwrap();
        assert!(class.is_singleton());
        assert_eq!(class.some_member().unwrap().joint, t.joint);
    }

    #[test]
    fn ternary_rotation_has_empty_class() {
        // Supports {0,1}, {1,2}, {0,2}: each pair can only agree on one value,
        // and forcing all three agreements closes a contradictory cycle.
        let system = spread(
            &["0", "1", "2"],
            &[
                vec![rat(1, 2), rat(1, 2), rat(0, 1)],
                vec![rat(0, 1), rat(1, 2), rat(1, 2)],
                vec![rat(1, 2), rat(0, 1), rat(1, 2)],
            ],
        );
        assert!(matches!(multimaximal_coupling(&system, ContentId(0)).unwrap(), MultimaximalResult::Empty));
    }

    #[test]
    fn disjoint_residuals_are_not_unique() {
        let system = spread(
            &["0", "1", "2", "3"],
            &[
                vec![rat(1, 2), rat(1, 2), rat(0, 1), rat(0, 1)],
                vec![rat(0, 1), rat(0, 1), rat(1, 2), rat(1, 2)],
            ],
        );
        let MultimaximalResult::NotUnique { witness, class } = multimaximal_coupling(&system, ContentId(0)).unwrap()
        else {
            panic!("expected several members");
        };
        assert_eq!(witness.equality_probability(0, 1), rat(0, 1));
        let vertices = class.vertices(1000).unwrap();
        assert_eq!(vertices.len(), 2);
    }

    #[test]
    fn unknown_content_is_an_error() {
        let system = spread(&["0", "1"], &[vec![rat(1, 2), rat(1, 2)]]);
        assert!(matches!(multimaximal_coupling(&system, ContentId(7)), Err(Error::UnknownContent(_))));
    }
}
