//! Fixture systems used by tests, documentation, the CLI, and benchmarks.

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pmf::{product_tuples, Outcome, Pmf};
use crate::rational::{format_rational, int, rat, Rational};
use crate::system::{Content, ContentId, Context, System, SystemBuilder};

fn correlated(sign: i64) -> Vec<(Vec<Outcome>, Rational)> {
    if sign > 0 {
        vec![(vec![0, 0], rat(1, 2)), (vec![1, 1], rat(1, 2))]
    } else {
        vec![(vec![0, 1], rat(1, 2)), (vec![1, 0], rat(1, 2))]
    }
}

/// The Popescu-Rohrlich box: four binary contents `a1, a2, b1, b2`, contexts
/// `{a_i, b_j}`, perfectly correlated except anti-correlated in `(2, 2)`.
pub fn pr_box() -> System {
    SystemBuilder::new()
        .binary("a1")
        .binary("a2")
        .binary("b1")
        .binary("b2")
        .context("11", &["a1", "b1"], correlated(1))
        .context("12", &["a1", "b2"], correlated(1))
        .context("21", &["a2", "b1"], correlated(1))
        .context("22", &["a2", "b2"], correlated(-1))
        .build()
        .expect("PR box is a valid system")
}

/// Cyclic system of four `±1` contents `q1..q4` with contexts
/// `{q1,q2}, {q2,q3}, {q3,q4}, {q4,q1}`, uniform marginals, and the given
/// product expectations.
pub fn chsh(correlations: [Rational; 4]) -> Result<System> {
    for e in &correlations {
        if e.abs() > Rational::one() {
            return Err(Error::CorrelationOutOfRange(format_rational(e)));
        }
    }
    let names = ["q1", "q2", "q3", "q4"];
    let mut builder = SystemBuilder::new();
    for name in names {
        builder = builder.content(name, &["-1", "+1"]);
    }
    for (i, e) in correlations.iter().enumerate() {
        let (a, b) = (names[i], names[(i + 1) % 4]);
        let same = (Rational::one() + e) / int(4);
        let diff = (Rational::one() - e) / int(4);
        builder = builder.context(
            &format!("c{}{}", i + 1, (i + 1) % 4 + 1),
            &[a, b],
            [
                (vec![0, 0], same.clone()),
                (vec![1, 1], same),
                (vec![0, 1], diff.clone()),
                (vec![1, 0], diff),
            ],
        );
    }
    builder.build()
}

/// Two contexts over contents `A, B`; `A` is a fair coin in `c1` but has
/// `P(A = 1) = 3/4` in `c2`, while `B` is a fair coin in both.
pub fn signaling_example() -> System {
    SystemBuilder::new()
        .binary("A")
        .binary("B")
        .context("c1", &["A", "B"], [(vec![0, 0], rat(1, 2)), (vec![1, 1], rat(1, 2))])
        .context(
            "c2",
            &["A", "B"],
            [(vec![0, 0], rat(1, 4)), (vec![1, 0], rat(1, 4)), (vec![1, 1], rat(1, 2))],
        )
        .build()
        .expect("signaling example is a valid system")
}

/// Random dichotomous system on the incidence pattern
/// `1: {1,2,3}`, `2: {3,4}`, `3: {1,2,3,4}`.
pub fn r0_shape(seed: u64) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let contents: Vec<Content> = (1..=4)
        .map(|q| Content { id: q.to_string(), alphabet: vec!["0".into(), "1".into()] })
        .collect();
    let layout: [&[usize]; 3] = [&[0, 1, 2], &[2, 3], &[0, 1, 2, 3]];
    let contexts = layout
        .iter()
        .enumerate()
        .map(|(c, qs)| Context {
            id: (c + 1).to_string(),
            contents: qs.iter().map(|&q| ContentId(q)).collect(),
            pmf: random_pmf(&mut rng, vec![2; qs.len()], 3),
        })
        .collect();
    System::new(contents, contexts).expect("R0 layout is valid")
}

/// Catalog lookup used by the command line.
pub fn by_name(name: &str, seed: u64, correlations: Option<[Rational; 4]>) -> Result<System> {
    match name {
        "prbox" | "pr-box" => Ok(pr_box()),
        "signaling" => Ok(signaling_example()),
        "r0" => Ok(r0_shape(seed)),
        "chsh" => chsh(correlations.unwrap_or_else(|| [rat(1, 2), rat(1, 2), rat(1, 2), rat(-1, 2)])),
        other => Err(Error::Schema(format!(
            "unknown catalog entry `{other}` (expected prbox, chsh, signaling, r0)"
        ))),
    }
}

pub const NAMES: [&str; 4] = ["prbox", "chsh", "signaling", "r0"];

/// Pmf with integer weights drawn uniformly from `0..=max_weight`, normalized.
pub fn random_pmf<R: Rng>(rng: &mut R, shape: Vec<usize>, max_weight: u32) -> Pmf {
    let tuples: Vec<Vec<Outcome>> = product_tuples(&shape).collect();
    let mut weights: Vec<u32> = tuples.iter().map(|_| rng.random_range(0..=max_weight)).collect();
    if weights.iter().all(|&w| w == 0) {
        let k = rng.random_range(0..weights.len());
        weights[k] = 1;
    }
    let total: u32 = weights.iter().sum();
    Pmf::new(
        shape,
        tuples.into_iter().zip(weights).map(|(t, w)| (t, rat(w as i64, total as i64))),
    )
    .expect("normalized weights form a pmf")
}

/// Knobs for [`random_system`].
#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub contents: (usize, usize),
    pub contexts: (usize, usize),
    pub alphabet: (usize, usize),
    pub max_context_size: usize,
    /// Upper bound on the number of variables `(q, c)`.
    pub max_variables: usize,
    pub max_weight: u32,
}

impl RandomSpec {
    /// Dichotomous systems with 2–4 contents and 2–4 contexts, sized so that
    /// full couplings stay at a few hundred joint assignments.
    pub fn dichotomous() -> Self {
        RandomSpec {
            contents: (2, 4),
            contexts: (2, 4),
            alphabet: (2, 2),
            max_context_size: 3,
            max_variables: 8,
            max_weight: 3,
        }
    }
}

fn random_incidence(rng: &mut ChaCha8Rng, spec: &RandomSpec) -> (usize, Vec<Vec<usize>>) {
    loop {
        let n = rng.random_range(spec.contents.0..=spec.contents.1);
        let m = rng.random_range(spec.contexts.0..=spec.contexts.1);
        let mut layout: Vec<Vec<usize>> = (0..m)
            .map(|_| {
                let size = rng.random_range(1..=spec.max_context_size.min(n));
                let mut qs: Vec<usize> = (0..n).collect();
                for i in 0..size {
                    let j = rng.random_range(i..n);
                    qs.swap(i, j);
                }
                qs.truncate(size);
                qs.sort_unstable();
                qs
            })
            .collect();
        for q in 0..n {
            if !layout.iter().any(|qs| qs.contains(&q)) {
                let c = rng.random_range(0..m);
                layout[c].push(q);
                layout[c].sort_unstable();
            }
        }
        let vars: usize = layout.iter().map(Vec::len).sum();
        if vars <= spec.max_variables {
            return (n, layout);
        }
    }
}

fn random_contents(rng: &mut ChaCha8Rng, n: usize, spec: &RandomSpec) -> Vec<Content> {
    (0..n)
        .map(|q| {
            let k = rng.random_range(spec.alphabet.0..=spec.alphabet.1);
            Content { id: format!("q{}", q + 1), alphabet: (0..k).map(|x| x.to_string()).collect() }
        })
        .collect()
}

/// Seed-pinned random system; generally inconsistently connected.
pub fn random_system(seed: u64, spec: &RandomSpec) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, layout) = random_incidence(&mut rng, spec);
    let contents = random_contents(&mut rng, n, spec);
    let contexts = layout
        .into_iter()
        .enumerate()
        .map(|(c, qs)| {
            let shape = qs.iter().map(|&q| contents[q].alphabet.len()).collect();
            Context {
                id: format!("c{}", c + 1),
                contents: qs.into_iter().map(ContentId).collect(),
                pmf: random_pmf(&mut rng, shape, spec.max_weight),
            }
        })
        .collect();
    System::new(contents, contexts).expect("random layout is valid")
}

/// Seed-pinned random system whose bunches are all marginals of one global
/// pmf: consistently connected and noncontextual by construction.
pub fn random_marginal_system(seed: u64, spec: &RandomSpec) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, layout) = random_incidence(&mut rng, spec);
    let contents = random_contents(&mut rng, n, spec);
    let global = random_pmf(&mut rng, contents.iter().map(|c| c.alphabet.len()).collect(), spec.max_weight);
    let contexts = layout
        .into_iter()
        .enumerate()
        .map(|(c, qs)| Context {
            id: format!("c{}", c + 1),
            pmf: global.marginal(&qs),
            contents: qs.into_iter().map(ContentId).collect(),
        })
        .collect();
    System::new(contents, contexts).expect("random layout is valid")
}

/// CHSH system with correlations drawn from `{-1, -3/4, ..., 1}`.
pub fn random_chsh(seed: u64) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| rat(rng.random_range(-4..=4), 4);
    let e = [draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng)];
    chsh(e).expect("correlations within range")
}

/// Every named fixture, with the CHSH family at the entries used throughout
/// the tests: perfect correlation, independence, the classical bound, a
/// rational point beyond it, and the cyclic PR box.
pub fn fixtures() -> Vec<(String, System)> {
    let chsh_cases: [(&str, [Rational; 4]); 5] = [
        ("chsh(1,1,1,1)", [int(1), int(1), int(1), int(1)]),
        ("chsh(0,0,0,0)", [Rational::zero(), Rational::zero(), Rational::zero(), Rational::zero()]),
        ("chsh(1/2,1/2,1/2,-1/2)", [rat(1, 2), rat(1, 2), rat(1, 2), rat(-1, 2)]),
        ("chsh(7/10,7/10,7/10,-7/10)", [rat(7, 10), rat(7, 10), rat(7, 10), rat(-7, 10)]),
        ("chsh(1,1,1,-1)", [int(1), int(1), int(1), int(-1)]),
    ];
    let mut out = vec![
        ("prbox".to_string(), pr_box()),
        ("signaling".to_string(), signaling_example()),
        ("r0(0)".to_string(), r0_shape(0)),
        ("r0(1)".to_string(), r0_shape(1)),
    ];
    for (name, e) in chsh_cases {
        out.push((name.to_string(), chsh(e).expect("catalog correlations are in range")));
    }
    out
}

/// File name under which a fixture is shipped, e.g. `chsh(1/2,1/2,1/2,-1/2)`
/// becomes `chsh_1d2_1d2_1d2_m1d2.json`.
pub fn fixture_file_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 5);
    for ch in name.chars() {
        match ch {
            '(' | ',' => out.push('_'),
            ')' => {}
            '/' => out.push('d'),
            '-' => out.push('m'),
            c => out.push(c),
        }
    }
    out.push_str(".json");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::check_connectedness;

    #[test]
    fn fixture_file_names_are_distinct_and_plain() {
        let names: Vec<String> = fixtures().iter().map(|(n, _)| fixture_file_name(n)).collect();
        assert!(names.contains(&"chsh_1d2_1d2_1d2_m1d2.json".to_string()));
        let unique: std::collections::HashSet<&String> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert!(names.iter().all(|n| n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')));
    }

    #[test]
    fn pr_box_marginals_are_fair() {
        let system = pr_box();
        assert_eq!(system.contents().len(), 4);
        assert_eq!(system.contexts().len(), 4);
        for (q, c) in system.incidence() {
            let m = system.variable_marginal(q, c).unwrap();
            assert_eq!(m.prob(&[0]), rat(1, 2));
            assert_eq!(m.prob(&[1]), rat(1, 2));
        }
        let report = check_connectedness(&system);
        assert!(report.consistent && report.strongly_consistent);
    }

    #[test]
    fn chsh_rejects_out_of_range() {
        assert!(matches!(
            chsh([rat(3, 2), int(0), int(0), int(0)]),
            Err(Error::CorrelationOutOfRange(_))
        ));
    }

    #[test]
    fn chsh_product_expectations() {
        let system = chsh([rat(1, 2), rat(-1, 4), int(0), int(1)]).unwrap();
        for (ctx, e) in system.contexts().iter().zip([rat(1, 2), rat(-1, 4), int(0), int(1)]) {
            let expectation = ctx.pmf.iter().fold(Rational::zero(), |acc, (t, p)| {
                let sign = if t[0] == t[1] { int(1) } else { int(-1) };
                acc + sign * p
            });
            assert_eq!(expectation, e);
        }
    }

    #[test]
    fn signaling_example_shifts_one_marginal() {
        let system = signaling_example();
        let report = check_connectedness(&system);
        assert!(!report.consistent);
        let a = system.find_content("A").unwrap();
        let (c1, c2) = (system.find_context("c1").unwrap(), system.find_context("c2").unwrap());
        assert_eq!(system.variable_marginal(a, c1).unwrap().prob(&[1]), rat(1, 2));
        assert_eq!(system.variable_marginal(a, c2).unwrap().prob(&[1]), rat(3, 4));
        let offending: Vec<_> = report.violations().filter(|m| m.contents.len() == 1).collect();
        assert_eq!(offending.len(), 1);
        assert_eq!(offending[0].contents, vec![a]);
    }

    #[test]
    fn r0_bunch_arities() {
        let system = r0_shape(3);
        let arities: Vec<usize> = system.contexts().iter().map(|c| c.contents.len()).collect();
        assert_eq!(arities, vec![3, 2, 4]);
        assert_eq!(System::parse_json(&system.to_json()).unwrap(), system);
    }

    #[test]
    fn random_generators_are_seed_pinned() {
        let spec = RandomSpec::dichotomous();
        for seed in 0..20 {
            let a = random_system(seed, &spec);
            assert_eq!(a, random_system(seed, &spec));
            assert!(a.incidence().len() <= spec.max_variables);
            assert!((2..=4).contains(&a.contents().len()));
            assert!((2..=4).contains(&a.contexts().len()));
            let b = random_marginal_system(seed, &spec);
            assert!(check_connectedness(&b).strongly_consistent);
        }
    }
}
