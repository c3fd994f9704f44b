//! Exact probability mass functions over finite product alphabets.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::rational::{format_rational, is_nonnegative, Rational};

/// Index of an outcome inside a content's alphabet.
pub type Outcome = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PmfError {
    #[error("outcome tuple {tuple:?} does not fit alphabet sizes {shape:?}")]
    OutOfRange { tuple: Vec<Outcome>, shape: Vec<usize> },
    #[error("outcome tuple {0:?} listed twice")]
    Duplicate(Vec<Outcome>),
    #[error("negative probability {prob} for {tuple:?}")]
    Negative { tuple: Vec<Outcome>, prob: String },
    #[error("probabilities sum to {0}, not exactly 1")]
    Sum(String),
}

/// A distribution over tuples `(x_0, .., x_{k-1})` with `x_i < shape[i]`.
///
/// Only positive-probability tuples are stored; iteration is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pmf {
    shape: Vec<usize>,
    probs: BTreeMap<Vec<Outcome>, Rational>,
}

impl Pmf {
    /// Validating constructor. Explicit zero entries are accepted and dropped.
    pub fn new<I>(shape: Vec<usize>, entries: I) -> Result<Self, PmfError>
    where
        I: IntoIterator<Item = (Vec<Outcome>, Rational)>,
    {
        let mut probs = BTreeMap::new();
        let mut total = Rational::zero();
        for (tuple, prob) in entries {
            if tuple.len() != shape.len() || tuple.iter().zip(&shape).any(|(x, n)| x >= n) {
                return Err(PmfError::OutOfRange { tuple, shape });
            }
            if !is_nonnegative(&prob) {
                return Err(PmfError::Negative { prob: format_rational(&prob), tuple });
            }
            if probs.contains_key(&tuple) {
                return Err(PmfError::Duplicate(tuple));
            }
            total += &prob;
            probs.insert(tuple, prob);
        }
        if !total.is_one() {
            return Err(PmfError::Sum(format_rational(&total)));
        }
        probs.retain(|_, p| !p.is_zero());
        Ok(Pmf { shape, probs })
    }

    /// Builds a pmf from entries the caller already knows to be valid,
    /// merging duplicate tuples by addition.
    pub(crate) fn accumulate<I>(shape: Vec<usize>, entries: I) -> Self
    where
        I: IntoIterator<Item = (Vec<Outcome>, Rational)>,
    {
        let mut probs: BTreeMap<Vec<Outcome>, Rational> = BTreeMap::new();
        for (tuple, prob) in entries {
            debug_assert_eq!(tuple.len(), shape.len());
            if prob.is_zero() {
                continue;
            }
            *probs.entry(tuple).or_insert_with(Rational::zero) += prob;
        }
        probs.retain(|_, p| !p.is_zero());
        Pmf { shape, probs }
    }

    pub fn point_mass(shape: Vec<usize>, tuple: Vec<Outcome>) -> Result<Self, PmfError> {
        Pmf::new(shape, [(tuple, Rational::one())])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn arity(&self) -> usize {
        self.shape.len()
    }

    pub fn prob(&self, tuple: &[Outcome]) -> Rational {
        self.probs.get(tuple).cloned().unwrap_or_else(Rational::zero)
    }

    /// Positive-probability entries in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Outcome>, &Rational)> + '_ {
        self.probs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Vec<Outcome>> + '_ {
        self.probs.keys()
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_point_mass(&self) -> bool {
        self.probs.len() == 1
    }

    /// Sum of all stored probabilities; `1` for every valid pmf.
    pub fn total(&self) -> Rational {
        self.probs.values().fold(Rational::zero(), |acc, p| acc + p)
    }

    /// Pushforward onto the coordinates at `positions`, in that order.
    ///
    /// Panics if a position is out of range.
    pub fn marginal(&self, positions: &[usize]) -> Pmf {
        let shape = positions.iter().map(|&i| self.shape[i]).collect();
        Pmf::accumulate(
            shape,
            self.probs
                .iter()
                .map(|(tuple, p)| (positions.iter().map(|&i| tuple[i]).collect(), p.clone())),
        )
    }

    /// Independent product: coordinates of `self` followed by those of `other`.
    pub fn product(&self, other: &Pmf) -> Pmf {
        let shape = self.shape.iter().chain(&other.shape).copied().collect();
        let mut probs = BTreeMap::new();
        for (a, pa) in &self.probs {
            for (b, pb) in &other.probs {
                let tuple: Vec<Outcome> = a.iter().chain(b).copied().collect();
                probs.insert(tuple, pa * pb);
            }
        }
        Pmf { shape, probs }
    }

    /// Same distribution with coordinates reordered: coordinate `i` of the
    /// result is coordinate `order[i]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Pmf {
        assert_eq!(order.len(), self.arity());
        self.marginal(order)
    }

    /// Maximum absolute difference between point probabilities, for display.
    pub fn linf_distance_f64(&self, other: &BTreeMap<Vec<Outcome>, f64>) -> f64 {
        let mut keys: Vec<&Vec<Outcome>> = self.probs.keys().collect();
        keys.extend(other.keys());
        keys.into_iter()
            .map(|k| {
                let exact = self.probs.get(k).map(crate::rational::to_f64).unwrap_or(0.0);
                (exact - other.get(k).copied().unwrap_or(0.0)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Enumerates every tuple of the product alphabet `shape` lexicographically.
pub fn product_tuples(shape: &[usize]) -> impl Iterator<Item = Vec<Outcome>> + '_ {
    let total: usize = shape.iter().product();
    let mut current = vec![0; shape.len()];
    let mut emitted = 0usize;
    std::iter::from_fn(move || {
        if emitted == total {
            return None;
        }
        let out = current.clone();
        emitted += 1;
        for i in (0..shape.len()).rev() {
            current[i] += 1;
            if current[i] < shape[i] {
                break;
            }
            current[i] = 0;
        }
        Some(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn bern(p1: Rational) -> Pmf {
        let p0 = Rational::one() - &p1;
        Pmf::new(vec![2], [(vec![0], p0), (vec![1], p1)]).unwrap()
    }

    #[test]
    fn uniform_square_marginal_is_fair_coin() {
        let uniform = Pmf::new(
            vec![2, 2],
            product_tuples(&[2, 2]).map(|t| (t, rat(1, 4))),
        )
        .unwrap();
        assert_eq!(uniform.marginal(&[0]), bern(rat(1, 2)));
        assert_eq!(uniform.marginal(&[1]), bern(rat(1, 2)));
    }

    #[test]
    fn perfectly_correlated_marginal() {
        let pmf = Pmf::new(vec![2, 2], [(vec![0, 0], rat(1, 2)), (vec![1, 1], rat(1, 2))]).unwrap();
        assert_eq!(pmf.marginal(&[1]), bern(rat(1, 2)));
    }

    #[test]
    fn exact_sum_with_explicit_zero() {
        let pmf = Pmf::new(
            vec![4],
            [
                (vec![0], rat(1, 3)),
                (vec![1], rat(1, 3)),
                (vec![2], rat(1, 3)),
                (vec![3], rat(0, 1)),
            ],
        )
        .unwrap();
        assert_eq!(pmf.support_len(), 3);
    }

    #[test]
    fn decimal_sum_short_of_one_rejected() {
        let err = Pmf::new(
            vec![3],
            [(vec![0], rat(3, 10)), (vec![1], rat(3, 10)), (vec![2], rat(3, 10))],
        )
        .unwrap_err();
        assert_eq!(err, PmfError::Sum("9/10".into()));
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(matches!(
            Pmf::new(vec![2], [(vec![2], rat(1, 1))]),
            Err(PmfError::OutOfRange { .. })
        ));
        assert!(matches!(
            Pmf::new(vec![2], [(vec![0], rat(1, 2)), (vec![0], rat(1, 2))]),
            Err(PmfError::Duplicate(_))
        ));
        assert!(matches!(
            Pmf::new(vec![2], [(vec![0], rat(3, 2)), (vec![1], rat(-1, 2))]),
            Err(PmfError::Negative { .. })
        ));
    }

    #[test]
    fn product_tuples_are_lexicographic() {
        let all: Vec<_> = product_tuples(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[5], vec![1, 2]);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }

    #[test]
    fn product_has_independent_marginals() {
        let a = bern(rat(1, 3));
        let b = bern(rat(3, 4));
        let ab = a.product(&b);
        assert_eq!(ab.marginal(&[0]), a);
        assert_eq!(ab.marginal(&[1]), b);
        assert_eq!(ab.prob(&[1, 1]), rat(1, 4));
    }
}
