//! Hidden-variable models with finite hidden-state spaces.
//!
//! A witness assigns each context a distribution over hidden states and maps
//! every `(content, state[, context])` to one outcome. The four model
//! classes differ in two restrictions: whether the response may read the
//! context, and whether the hidden distribution may change with the context.
//!
//! | class      | response reads context | hidden pmf varies |
//! |------------|------------------------|-------------------|
//! | `Gen`      | yes                    | yes               |
//! | `CimNoFc`  | no                     | yes               |
//! | `FcNoCim`  | yes                    | no                |
//! | `Bell`     | no                     | no                |

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consistify::{ConsistifiedSystem, ContextKind};
use crate::coupling::find_reduced_coupling;
use crate::error::{Error, Result};
use crate::pmf::{product_tuples, Outcome, Pmf};
use crate::rational::{format_rational, is_nonnegative, parse_rational, to_f64, Rational};
use crate::system::{Content, ContentDocument, ContentId, ContextId, System};

pub const SCHEMA: &str = "hvm-v1";

/// Largest hidden-state space the coupling constructions will build.
pub const MAX_STATES: usize = 1 << 20;

/// Hidden states examined per context by the factorizability check.
const FACTOR_SAMPLE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelClass {
    Gen,
    CimNoFc,
    FcNoCim,
    Bell,
}

impl ModelClass {
    pub fn allows_context_in_response(self) -> bool {
        matches!(self, ModelClass::Gen | ModelClass::FcNoCim)
    }

    pub fn allows_context_dependent_hidden(self) -> bool {
        matches!(self, ModelClass::Gen | ModelClass::CimNoFc)
    }
}

/// The deterministic response table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    /// Keyed by `(content, state)`.
    ContextFree(BTreeMap<(ContentId, usize), Outcome>),
    /// Keyed by `(content, state, context)`.
    ContextReading(BTreeMap<(ContentId, usize, ContextId), Outcome>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HvmWitness {
    pub model: ModelClass,
    pub contents: Vec<Content>,
    /// Context ids and their contents, in the system's order.
    pub contexts: Vec<(String, Vec<ContentId>)>,
    pub states: Vec<String>,
    /// Hidden distribution per context, keyed by state index.
    pub hidden: Vec<BTreeMap<usize, Rational>>,
    pub response: Response,
}

fn signature(system: &System) -> (Vec<Content>, Vec<(String, Vec<ContentId>)>) {
    (
        system.contents().to_vec(),
        system.contexts().iter().map(|c| (c.id.clone(), c.contents.clone())).collect(),
    )
}

fn pmf_map(pmf: &Pmf, mut state_of: impl FnMut(&Vec<Outcome>) -> usize) -> BTreeMap<usize, Rational> {
    let mut out = BTreeMap::new();
    for (t, p) in pmf.iter() {
        *out.entry(state_of(t)).or_insert_with(Rational::zero) += p;
    }
    out
}

impl HvmWitness {
    /// The response table is keyed by context.
    pub fn uses_context_in_response(&self) -> bool {
        matches!(self.response, Response::ContextReading(_))
    }

    pub fn hidden_dist_context_dependent(&self) -> bool {
        self.hidden.windows(2).any(|w| w[0] != w[1])
    }

    pub fn outcome(&self, q: ContentId, state: usize, c: ContextId) -> Option<Outcome> {
        match &self.response {
            Response::ContextFree(table) => table.get(&(q, state)).copied(),
            Response::ContextReading(table) => table.get(&(q, state, c)).copied(),
        }
    }

    /// Outcomes of the contents of `c` when the hidden state is `state`.
    pub fn response_tuple(&self, c: ContextId, state: usize) -> std::result::Result<Vec<Outcome>, String> {
        let (id, contents) = &self.contexts[c.index()];
        contents
            .iter()
            .map(|&q| {
                let x = self.outcome(q, state, c).ok_or_else(|| {
                    format!("no response for content {} in context {} at state {}", self.content_id(q), id, state)
                })?;
                if x >= self.contents[q.index()].alphabet.len() {
                    return Err(format!("response {x} for content {} is outside its alphabet", self.content_id(q)));
                }
                Ok(x)
            })
            .collect()
    }

    fn content_id(&self, q: ContentId) -> &str {
        self.contents.get(q.index()).map_or("?", |c| c.id.as_str())
    }

    fn shape(&self, c: ContextId) -> Vec<usize> {
        self.contexts[c.index()].1.iter().map(|q| self.contents[q.index()].alphabet.len()).collect()
    }

    /// Image of a distribution over hidden states under the response of `c`.
    fn push<'a>(
        &self,
        c: ContextId,
        dist: impl IntoIterator<Item = (usize, &'a Rational)>,
    ) -> std::result::Result<Pmf, String> {
        let mut entries = Vec::new();
        for (s, p) in dist {
            entries.push((self.response_tuple(c, s)?, p.clone()));
        }
        Ok(Pmf::accumulate(self.shape(c), entries))
    }

    /// Distribution of the modelled bunch in context `c`.
    pub fn pushforward(&self, c: ContextId) -> std::result::Result<Pmf, String> {
        self.push(c, self.hidden[c.index()].iter().map(|(&s, p)| (s, p)))
    }

    pub fn context_index(&self, id: &str) -> Result<ContextId> {
        self.contexts
            .iter()
            .position(|(c, _)| c == id)
            .map(ContextId)
            .ok_or_else(|| Error::UnknownContext(id.to_string()))
    }

    fn outcome_label(&self, q: ContentId, x: Outcome) -> &str {
        &self.contents[q.index()].alphabet[x]
    }
}

/// The general model: the hidden variable of context `c` is the bunch `R^c`
/// itself and the response reads off one coordinate. It exists for every
/// system, contextual or not.
pub fn build_gen(system: &System) -> HvmWitness {
    let (contents, contexts) = signature(system);
    let mut states = Vec::new();
    let mut hidden = Vec::with_capacity(contexts.len());
    let mut table = BTreeMap::new();
    for c in system.context_ids() {
        let context = system.context(c);
        let first = states.len();
        for (k, t) in context.pmf.support().enumerate() {
            states.push(format!("{}:{}", context.id, system.outcome_labels(&context.contents, t).join(",")));
            for (&q, &x) in context.contents.iter().zip(t) {
                table.insert((q, first + k, c), x);
            }
        }
        let mut k = first;
        hidden.push(pmf_map(&context.pmf, |_| {
            k += 1;
            k - 1
        }));
    }
    HvmWitness {
        model: ModelClass::Gen,
        contents,
        contexts,
        states,
        hidden,
        response: Response::ContextReading(table),
    }
}

/// Removes the context from the response by taking as hidden state the
/// partial assignment `{q -> outcome}` the original model produces.
pub fn to_cim_no_fc(witness: &HvmWitness) -> HvmWitness {
    if !witness.uses_context_in_response() {
        return HvmWitness { model: ModelClass::CimNoFc, ..witness.clone() };
    }
    let mut index: HashMap<Vec<(ContentId, Outcome)>, usize> = HashMap::new();
    let mut assignments: Vec<Vec<(ContentId, Outcome)>> = Vec::new();
    let mut hidden = Vec::with_capacity(witness.contexts.len());
    for (ci, (_, contents)) in witness.contexts.iter().enumerate() {
        let c = ContextId(ci);
        let mut dist = BTreeMap::new();
        for (&s, p) in &witness.hidden[ci] {
            let tuple = witness.response_tuple(c, s).expect("witness is total on its support");
            let lambda: Vec<(ContentId, Outcome)> = contents.iter().copied().zip(tuple).collect();
            let next = assignments.len();
            let k = *index.entry(lambda.clone()).or_insert_with(|| {
                assignments.push(lambda);
                next
            });
            *dist.entry(k).or_insert_with(Rational::zero) += p;
        }
        hidden.push(dist);
    }
    let mut table = BTreeMap::new();
    let mut states = Vec::with_capacity(assignments.len());
    for (k, lambda) in assignments.iter().enumerate() {
        let parts: Vec<String> = lambda
            .iter()
            .map(|&(q, x)| {
                table.insert((q, k), x);
                format!("{}={}", witness.content_id(q), witness.outcome_label(q, x))
            })
            .collect();
        states.push(format!("{{{}}}", parts.join(",")));
    }
    HvmWitness {
        model: ModelClass::CimNoFc,
        contents: witness.contents.clone(),
        contexts: witness.contexts.clone(),
        states,
        hidden,
        response: Response::ContextFree(table),
    }
}

/// Supplies a joint distribution with the given one-dimensional marginals.
pub trait CouplingSupplier {
    fn couple(&self, marginals: &[Pmf]) -> Pmf;
}

/// Independent coupling.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProductCoupling;

impl CouplingSupplier for ProductCoupling {
    fn couple(&self, marginals: &[Pmf]) -> Pmf {
        marginals
            .iter()
            .fold(Pmf::point_mass(vec![], vec![]).expect("empty tuple"), |acc, m| acc.product(m))
    }
}

pub fn to_fc_no_cim(witness: &HvmWitness) -> Result<HvmWitness> {
    to_fc_no_cim_with(witness, &ProductCoupling)
}

/// Couples the per-context hidden variables into one `Γ` shared by all
/// contexts; context `c` reads its own component of `Γ`.
pub fn to_fc_no_cim_with(witness: &HvmWitness, supplier: &dyn CouplingSupplier) -> Result<HvmWitness> {
    let cim = if witness.uses_context_in_response() { to_cim_no_fc(witness) } else { witness.clone() };
    let locals: Vec<Vec<usize>> = cim.hidden.iter().map(|h| h.keys().copied().collect()).collect();
    let size = locals.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.len()).filter(|&n| n <= MAX_STATES));
    if size.is_none() {
        let size = locals.iter().fold(1u128, |acc, l| acc.saturating_mul(l.len() as u128));
        return Err(Error::SizeGuard { size, limit: MAX_STATES as u128 });
    }
    let marginals: Vec<Pmf> = cim
        .hidden
        .iter()
        .zip(&locals)
        .map(|(h, l)| Pmf::accumulate(vec![l.len()], l.iter().enumerate().map(|(i, s)| (vec![i], h[s].clone()))))
        .collect();
    let gamma = supplier.couple(&marginals);
    let expected_shape: Vec<usize> = marginals.iter().map(|m| m.shape()[0]).collect();
    if gamma.shape() != expected_shape.as_slice()
        || gamma.total() != Rational::one()
        || marginals.iter().enumerate().any(|(i, m)| &gamma.marginal(&[i]) != m)
    {
        return Err(Error::Witness("supplied coupling does not have the hidden marginals".into()));
    }

    let mut states = Vec::with_capacity(gamma.support_len());
    let mut table = BTreeMap::new();
    let mut shared = BTreeMap::new();
    for (k, (g, p)) in gamma.iter().enumerate() {
        let parts: Vec<&str> = g.iter().zip(&locals).map(|(&i, l)| cim.states[l[i]].as_str()).collect();
        states.push(format!("<{}>", parts.join(" | ")));
        shared.insert(k, p.clone());
        for (ci, (_, contents)) in cim.contexts.iter().enumerate() {
            let s = locals[ci][g[ci]];
            for &q in contents {
                let x = cim.outcome(q, s, ContextId(ci)).expect("witness is total on its support");
                table.insert((q, k, ContextId(ci)), x);
            }
        }
    }
    Ok(HvmWitness {
        model: ModelClass::FcNoCim,
        contents: cim.contents,
        hidden: vec![shared; cim.contexts.len()],
        contexts: cim.contexts,
        states,
        response: Response::ContextReading(table),
    })
}

/// Bell model from a reduced coupling: the hidden state is a full
/// assignment of outcomes to contents, the same in every context.
pub fn build_bell(system: &System) -> Option<HvmWitness> {
    let coupling = find_reduced_coupling(system)?;
    Some(bell_from_joint(system, &coupling.joint))
}

fn bell_from_joint(system: &System, joint: &Pmf) -> HvmWitness {
    let (contents, contexts) = signature(system);
    let all: Vec<ContentId> = system.content_ids().collect();
    let mut states = Vec::new();
    let mut table = BTreeMap::new();
    for (k, t) in joint.support().enumerate() {
        states.push(format!("({})", system.outcome_labels(&all, t).join(",")));
        for (&q, &x) in all.iter().zip(t) {
            table.insert((q, k), x);
        }
    }
    let mut k = 0;
    let shared = pmf_map(joint, |_| {
        k += 1;
        k - 1
    });
    HvmWitness {
        model: ModelClass::Bell,
        contents,
        hidden: vec![shared; contexts.len()],
        contexts,
        states,
        response: Response::ContextFree(table),
    }
}

/// Models of a consistified system that use one response function for all
/// bunch contexts and one for all connection contexts.
#[derive(Debug, Clone)]
pub struct ConsistifiedWitnesses {
    /// Shared `Φ = (X, Y)`; bunch contexts read `X`, connections read `Y`.
    pub fc_no_cim: HvmWitness,
    /// `Ψ₁` in bunch contexts, `Ψ₂` in connection contexts, one response.
    pub cim_no_fc: HvmWitness,
    /// Present iff `R†` has a reduced coupling.
    pub bell: Option<HvmWitness>,
}

/// Independent product of the bunches of `group`, as full assignments to the
/// contents of `system`. The contexts in `group` must partition the contents.
fn product_of_bunches(system: &System, group: &[ContextId]) -> Result<Vec<(Vec<Outcome>, Rational)>> {
    let size = group
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(system.context(c).pmf.support_len() as u128));
    if size > MAX_STATES as u128 {
        return Err(Error::SizeGuard { size, limit: MAX_STATES as u128 });
    }
    let mut out = vec![(vec![0; system.contents().len()], Rational::one())];
    for &c in group {
        let context = system.context(c);
        let mut next = Vec::with_capacity(out.len() * context.pmf.support_len());
        for (assignment, p) in &out {
            for (t, pt) in context.pmf.iter() {
                let mut a = assignment.clone();
                for (&q, &x) in context.contents.iter().zip(t) {
                    a[q.index()] = x;
                }
                next.push((a, p * pt));
            }
        }
        out = next;
    }
    Ok(out)
}

pub fn build_consistified_hvms(r: &ConsistifiedSystem) -> Result<ConsistifiedWitnesses> {
    let system = &r.system;
    let (contents, contexts) = signature(system);
    let all: Vec<ContentId> = system.content_ids().collect();
    let bunch_contexts: Vec<ContextId> =
        system.context_ids().filter(|c| matches!(r.kinds[c.index()], ContextKind::Bunch(_))).collect();
    let connection_contexts: Vec<ContextId> =
        system.context_ids().filter(|c| matches!(r.kinds[c.index()], ContextKind::Connection(_))).collect();
    let x = product_of_bunches(system, &bunch_contexts)?;
    let y = product_of_bunches(system, &connection_contexts)?;
    let label = |a: &[Outcome]| format!("({})", system.outcome_labels(&all, a).join(","));

    // Φ = (X, Y) with X and Y independent.
    if (x.len() as u128) * (y.len() as u128) > MAX_STATES as u128 {
        return Err(Error::SizeGuard { size: x.len() as u128 * y.len() as u128, limit: MAX_STATES as u128 });
    }
    let mut states = Vec::with_capacity(x.len() * y.len());
    let mut shared = BTreeMap::new();
    let mut table = BTreeMap::new();
    for (xa, px) in &x {
        for (ya, py) in &y {
            let k = states.len();
            states.push(format!("{}|{}", label(xa), label(ya)));
            shared.insert(k, px * py);
            for c in system.context_ids() {
                let read = if matches!(r.kinds[c.index()], ContextKind::Bunch(_)) { xa } else { ya };
                for &q in &system.context(c).contents {
                    table.insert((q, k, c), read[q.index()]);
                }
            }
        }
    }
    let fc_no_cim = HvmWitness {
        model: ModelClass::FcNoCim,
        contents: contents.clone(),
        contexts: contexts.clone(),
        states,
        hidden: vec![shared; contexts.len()],
        response: Response::ContextReading(table),
    };

    // Ψ₁ and Ψ₂ live on the same space of full assignments.
    let mut index: BTreeMap<Vec<Outcome>, usize> = BTreeMap::new();
    for (a, _) in x.iter().chain(&y) {
        let next = index.len();
        index.entry(a.clone()).or_insert(next);
    }
    let mut states = vec![String::new(); index.len()];
    let mut table = BTreeMap::new();
    for (a, &k) in &index {
        states[k] = label(a);
        for (&q, &v) in all.iter().zip(a) {
            table.insert((q, k), v);
        }
    }
    let gather = |dist: &[(Vec<Outcome>, Rational)]| {
        let mut m = BTreeMap::new();
        for (a, p) in dist {
            *m.entry(index[a]).or_insert_with(Rational::zero) += p;
        }
        m
    };
    let (psi1, psi2) = (gather(&x), gather(&y));
    let hidden = system
        .context_ids()
        .map(|c| match r.kinds[c.index()] {
            ContextKind::Bunch(_) => psi1.clone(),
            ContextKind::Connection(_) => psi2.clone(),
        })
        .collect();
    let cim_no_fc = HvmWitness {
        model: ModelClass::CimNoFc,
        contents,
        contexts,
        states,
        hidden,
        response: Response::ContextFree(table),
    };

    Ok(ConsistifiedWitnesses { fc_no_cim, cim_no_fc, bell: build_bell(system) })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub malformed: Vec<String>,
    pub bunch_mismatches: Vec<String>,
    pub class_violations: Vec<String>,
    pub determinism_failures: Vec<String>,
    pub factorizability_failures: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.malformed.is_empty()
            && self.bunch_mismatches.is_empty()
            && self.class_violations.is_empty()
            && self.determinism_failures.is_empty()
            && self.factorizability_failures.is_empty()
    }

    pub fn failures(&self) -> impl Iterator<Item = &String> + '_ {
        self.malformed
            .iter()
            .chain(&self.bunch_mismatches)
            .chain(&self.class_violations)
            .chain(&self.determinism_failures)
            .chain(&self.factorizability_failures)
    }
}

/// Checks a witness against a system. Fails with an error only when the
/// witness is written for a different set of contents or contexts.
pub fn verify_witness(witness: &HvmWitness, system: &System) -> Result<VerificationReport> {
    let (contents, contexts) = signature(system);
    if witness.contents != contents {
        return Err(Error::WitnessShape("contents or alphabets differ from the system".into()));
    }
    if witness.contexts != contexts {
        return Err(Error::WitnessShape("contexts differ from the system".into()));
    }
    let mut report = VerificationReport::default();
    if witness.hidden.len() != contexts.len() {
        report.malformed.push(format!("{} hidden distributions for {} contexts", witness.hidden.len(), contexts.len()));
        return Ok(report);
    }
    for (ci, h) in witness.hidden.iter().enumerate() {
        let id = &contexts[ci].0;
        if let Some(s) = h.keys().find(|&&s| s >= witness.states.len()) {
            report.malformed.push(format!("context {id}: unknown hidden state {s}"));
        }
        if let Some(p) = h.values().find(|p| !is_nonnegative(p)) {
            report.malformed.push(format!("context {id}: negative probability {}", format_rational(p)));
        }
        let total = h.values().fold(Rational::zero(), |acc, p| acc + p);
        if !total.is_one() {
            report.malformed.push(format!("context {id}: hidden probabilities sum to {}", format_rational(&total)));
        }
    }
    let table_keys_ok = match &witness.response {
        Response::ContextFree(t) => t.keys().all(|&(q, s)| q.index() < contents.len() && s < witness.states.len()),
        Response::ContextReading(t) => t
            .keys()
            .all(|&(q, s, c)| q.index() < contents.len() && s < witness.states.len() && c.index() < contexts.len()),
    };
    if !table_keys_ok {
        report.malformed.push("response table refers to unknown contents, states or contexts".into());
    }
    if !report.malformed.is_empty() {
        return Ok(report);
    }

    if witness.uses_context_in_response() && !witness.model.allows_context_in_response() {
        report.class_violations.push(format!("{:?} response must not read the context", witness.model));
    }
    if witness.hidden_dist_context_dependent() && !witness.model.allows_context_dependent_hidden() {
        report.class_violations.push(format!("{:?} hidden distribution must be the same in every context", witness.model));
    }

    for c in system.context_ids() {
        let id = &contexts[c.index()].0;
        let support: Vec<usize> =
            witness.hidden[c.index()].iter().filter(|(_, p)| !p.is_zero()).map(|(&s, _)| s).collect();
        let mut total = true;
        for &s in &support {
            if let Err(e) = witness.response_tuple(c, s) {
                report.determinism_failures.push(e);
                total = false;
            }
        }
        if !total {
            continue;
        }
        match witness.pushforward(c) {
            Ok(pmf) if pmf == system.context(c).pmf => {}
            Ok(_) => report.bunch_mismatches.push(format!("context {id}: pushforward differs from the bunch")),
            Err(e) => report.bunch_mismatches.push(e),
        }
        let shape = witness.shape(c);
        let alphabet_product: usize = shape.iter().product();
        for &s in support.iter().take(FACTOR_SAMPLE) {
            if let Some(problem) = check_factorization(witness, c, s, &shape, alphabet_product) {
                report.factorizability_failures.push(format!("context {id}, state {s}: {problem}"));
            }
        }
    }
    Ok(report)
}

/// Given the hidden state, the joint probability of every outcome tuple must
/// be 0 or 1 and equal the product of the single-content probabilities.
fn check_factorization(
    witness: &HvmWitness,
    c: ContextId,
    s: usize,
    shape: &[usize],
    alphabet_product: usize,
) -> Option<String> {
    let one = Rational::one();
    let conditional = match witness.push(c, [(s, &one)]) {
        Ok(p) => p,
        Err(e) => return Some(e),
    };
    let marginals: Vec<Pmf> = (0..shape.len()).map(|i| conditional.marginal(&[i])).collect();
    let check = |g: &[Outcome]| -> Option<String> {
        let joint = conditional.prob(g);
        if !(joint.is_zero() || joint.is_one()) {
            return Some(format!("conditional probability {} of {g:?}", format_rational(&joint)));
        }
        let product = marginals.iter().zip(g).fold(Rational::one(), |acc, (m, &x)| acc * m.prob(&[x]));
        (product != joint).then(|| format!("joint {} differs from product {} at {g:?}", joint, product))
    };
    if alphabet_product <= 256 {
        return product_tuples(shape).find_map(|g| check(&g));
    }
    let centre = conditional.support().next()?.clone();
    if let Some(problem) = check(&centre) {
        return Some(problem);
    }
    for i in 0..shape.len() {
        for x in 0..shape[i] {
            let mut g = centre.clone();
            g[i] = x;
            if let Some(problem) = check(&g) {
                return Some(problem);
            }
        }
    }
    None
}

/// Draws `n` hidden states for context `context` and counts the resulting
/// outcome tuples.
pub fn sample(witness: &HvmWitness, context: &str, n: u64, seed: u64) -> Result<BTreeMap<Vec<Outcome>, u64>> {
    let c = witness.context_index(context)?;
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let entries: Vec<(usize, &Rational)> =
        witness.hidden[c.index()].iter().filter(|(_, p)| !p.is_zero()).map(|(&s, p)| (s, p)).collect();
    let tuples: Vec<Vec<Outcome>> = entries
        .iter()
        .map(|&(s, _)| witness.response_tuple(c, s).map_err(Error::Witness))
        .collect::<Result<_>>()?;
    let weights = WeightedIndex::new(entries.iter().map(|(_, p)| to_f64(p)))
        .map_err(|e| Error::Witness(format!("context {context}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..n {
        *counts.entry(tuples[weights.sample(&mut rng)].clone()).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Relative frequencies of a count table.
pub fn empirical(counts: &BTreeMap<Vec<Outcome>, u64>) -> BTreeMap<Vec<Outcome>, f64> {
    let n: u64 = counts.values().sum();
    counts.iter().map(|(t, &k)| (t.clone(), k as f64 / n as f64)).collect()
}

/// Serialized form of an [`HvmWitness`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessDocument {
    pub schema: String,
    pub model: ModelClass,
    pub contents: Vec<ContentDocument>,
    pub contexts: Vec<WitnessContextDocument>,
    pub states: Vec<String>,
    pub hidden: Vec<HiddenDocument>,
    pub response: Vec<ResponseDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessContextDocument {
    pub id: String,
    pub contents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenDocument {
    pub context: String,
    pub pmf: Vec<StateProbDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateProbDocument {
    pub state: usize,
    pub p: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseDocument {
    pub content: String,
    pub state: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub outcome: String,
}

impl HvmWitness {
    pub fn to_document(&self) -> WitnessDocument {
        let response = match &self.response {
            Response::ContextFree(t) => t
                .iter()
                .map(|(&(q, s), &x)| ResponseDocument {
                    content: self.content_id(q).to_string(),
                    state: s,
                    context: None,
                    outcome: self.outcome_label(q, x).to_string(),
                })
                .collect(),
            Response::ContextReading(t) => t
                .iter()
                .map(|(&(q, s, c), &x)| ResponseDocument {
                    content: self.content_id(q).to_string(),
                    state: s,
                    context: Some(self.contexts[c.index()].0.clone()),
                    outcome: self.outcome_label(q, x).to_string(),
                })
                .collect(),
        };
        WitnessDocument {
            schema: SCHEMA.to_string(),
            model: self.model,
            contents: self
                .contents
                .iter()
                .map(|c| ContentDocument { id: c.id.clone(), alphabet: c.alphabet.clone() })
                .collect(),
            contexts: self
                .contexts
                .iter()
                .map(|(id, qs)| WitnessContextDocument {
                    id: id.clone(),
                    contents: qs.iter().map(|&q| self.content_id(q).to_string()).collect(),
                })
                .collect(),
            states: self.states.clone(),
            hidden: self
                .contexts
                .iter()
                .zip(&self.hidden)
                .map(|((id, _), h)| HiddenDocument {
                    context: id.clone(),
                    pmf: h.iter().map(|(&s, p)| StateProbDocument { state: s, p: format_rational(p) }).collect(),
                })
                .collect(),
            response,
        }
    }

    pub fn from_document(doc: &WitnessDocument) -> Result<Self> {
        if doc.schema != SCHEMA {
            return Err(Error::WitnessShape(format!("unsupported schema `{}`, expected `{SCHEMA}`", doc.schema)));
        }
        let contents: Vec<Content> =
            doc.contents.iter().map(|c| Content { id: c.id.clone(), alphabet: c.alphabet.clone() }).collect();
        let content_index: HashMap<&str, ContentId> =
            contents.iter().enumerate().map(|(i, c)| (c.id.as_str(), ContentId(i))).collect();
        let find_content = |id: &str| {
            content_index.get(id).copied().ok_or_else(|| Error::UnknownContent(id.to_string()))
        };
        let contexts: Vec<(String, Vec<ContentId>)> = doc
            .contexts
            .iter()
            .map(|c| Ok((c.id.clone(), c.contents.iter().map(|q| find_content(q)).collect::<Result<_>>()?)))
            .collect::<Result<_>>()?;
        let context_index: HashMap<&str, ContextId> =
            contexts.iter().enumerate().map(|(i, (id, _))| (id.as_str(), ContextId(i))).collect();
        if doc.hidden.len() != contexts.len()
            || doc.hidden.iter().zip(&contexts).any(|(h, (id, _))| &h.context != id)
        {
            return Err(Error::WitnessShape("hidden distributions must list every context in order".into()));
        }
        let mut hidden = Vec::with_capacity(doc.hidden.len());
        for h in &doc.hidden {
            let mut dist = BTreeMap::new();
            for entry in &h.pmf {
                if entry.state >= doc.states.len() {
                    return Err(Error::WitnessShape(format!("context {}: unknown state {}", h.context, entry.state)));
                }
                if dist.insert(entry.state, parse_rational(&entry.p)?).is_some() {
                    return Err(Error::WitnessShape(format!("context {}: state {} listed twice", h.context, entry.state)));
                }
            }
            hidden.push(dist);
        }
        let reads_context = doc.response.first().is_some_and(|r| r.context.is_some());
        if doc.response.iter().any(|r| r.context.is_some() != reads_context) {
            return Err(Error::WitnessShape("response entries must all name a context or none may".into()));
        }
        let mut free = BTreeMap::new();
        let mut reading = BTreeMap::new();
        for r in &doc.response {
            let q = find_content(&r.content)?;
            if r.state >= doc.states.len() {
                return Err(Error::WitnessShape(format!("response names unknown state {}", r.state)));
            }
            let x = contents[q.index()].alphabet.iter().position(|a| a == &r.outcome).ok_or_else(|| {
                Error::WitnessShape(format!("outcome `{}` is not in the alphabet of {}", r.outcome, r.content))
            })?;
            let duplicate = match &r.context {
                Some(id) => {
                    let c = context_index.get(id.as_str()).copied().ok_or_else(|| Error::UnknownContext(id.clone()))?;
                    reading.insert((q, r.state, c), x).is_some()
                }
                None => free.insert((q, r.state), x).is_some(),
            };
            if duplicate {
                return Err(Error::WitnessShape(format!("response for {} at state {} given twice", r.content, r.state)));
            }
        }
        Ok(HvmWitness {
            model: doc.model,
            contents,
            contexts,
            states: doc.states.clone(),
            hidden,
            response: if reads_context { Response::ContextReading(reading) } else { Response::ContextFree(free) },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("witness document serializes")
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let doc: WitnessDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}
