//! Systems of random variables: contents, contexts, and one bunch per context.
//!
//! Variables from different contexts are stochastically unrelated, so a
//! [`System`] stores one joint [`Pmf`] per context and nothing across
//! contexts. Contents inside a context are kept in declaration order, which
//! fixes the coordinate order of every bunch pmf.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::{Outcome, Pmf};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContentId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContextId(pub usize);

impl ContentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl ContextId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A content `q` and the labels of its possible outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Content {
    pub id: String,
    pub alphabet: Vec<String>,
}

/// A context `c`, the contents measured in it, and its bunch distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub id: String,
    /// `Q^c` in canonical (declaration) order.
    pub contents: Vec<ContentId>,
    /// Joint distribution of the bunch, coordinates ordered as `contents`.
    pub pmf: Pmf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct System {
    contents: Vec<Content>,
    contexts: Vec<Context>,
}

/// Borrowed view of one context's bunch `R^c`.
#[derive(Debug, Clone, Copy)]
pub struct Bunch<'a> {
    system: &'a System,
    context: ContextId,
}

impl<'a> Bunch<'a> {
    pub fn context(&self) -> ContextId {
        self.context
    }

    pub fn contents(&self) -> &'a [ContentId] {
        &self.system.contexts[self.context.0].contents
    }

    pub fn pmf(&self) -> &'a Pmf {
        &self.system.contexts[self.context.0].pmf
    }

    pub fn position(&self, content: ContentId) -> Option<usize> {
        self.contents().iter().position(|&q| q == content)
    }

    /// Joint distribution of the listed contents, in the listed order.
    pub fn marginal(&self, subset: &[ContentId]) -> Result<Pmf> {
        let positions: Option<Vec<usize>> = subset.iter().map(|&q| self.position(q)).collect();
        match positions {
            Some(positions) => Ok(self.pmf().marginal(&positions)),
            None => Err(Error::NotSubset {
                subset: subset
                    .iter()
                    .map(|&q| {
                        self.system
                            .contents
                            .get(q.0)
                            .map_or_else(|| format!("#{}", q.0), |c| c.id.clone())
                    })
                    .collect(),
                context: self.system.contexts[self.context.0].id.clone(),
            }),
        }
    }
}

impl System {
    /// Validates and canonicalizes a system.
    ///
    /// Each context's content list may be given in any order; the bunch pmf
    /// coordinates must follow that order and are permuted into declaration
    /// order here.
    pub fn new(contents: Vec<Content>, contexts: Vec<Context>) -> Result<Self> {
        let mut seen = HashSet::new();
        for content in &contents {
            if !seen.insert(content.id.as_str()) {
                return Err(Error::DuplicateId { kind: "content", id: content.id.clone() });
            }
            let distinct: HashSet<&String> = content.alphabet.iter().collect();
            if content.alphabet.len() < 2 || distinct.len() != content.alphabet.len() {
                return Err(Error::Alphabet(content.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        let mut measured = vec![false; contents.len()];
        let mut canonical = Vec::with_capacity(contexts.len());
        for context in contexts {
            if !seen.insert(context.id.clone()) {
                return Err(Error::DuplicateId { kind: "context", id: context.id });
            }
            if context.contents.is_empty() {
                return Err(Error::EmptyContext(context.id));
            }
            let mut local = HashSet::new();
            for &q in &context.contents {
                let content = contents
                    .get(q.0)
                    .ok_or_else(|| Error::UnknownContent(format!("#{}", q.0)))?;
                if !local.insert(q) {
                    return Err(Error::DuplicateIncidence {
                        content: content.id.clone(),
                        context: context.id.clone(),
                    });
                }
                measured[q.0] = true;
            }
            let expected: Vec<usize> =
                context.contents.iter().map(|q| contents[q.0].alphabet.len()).collect();
            if context.pmf.shape() != expected.as_slice() {
                return Err(Error::Schema(format!(
                    "context `{}`: pmf shape {:?} does not match alphabets {:?}",
                    context.id,
                    context.pmf.shape(),
                    expected
                )));
            }
            let mut order: Vec<usize> = (0..context.contents.len()).collect();
            order.sort_by_key(|&i| context.contents[i]);
            let sorted_contents = order.iter().map(|&i| context.contents[i]).collect();
            canonical.push(Context {
                pmf: context.pmf.permute(&order),
                contents: sorted_contents,
                id: context.id,
            });
        }
        if let Some(i) = measured.iter().position(|m| !m) {
            return Err(Error::UnmeasuredContent(contents[i].id.clone()));
        }
        Ok(System { contents, contexts: canonical })
    }

    pub fn contents(&self) -> &[Content] {
        &self.contents
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    pub fn content(&self, q: ContentId) -> &Content {
        &self.contents[q.0]
    }

    pub fn context(&self, c: ContextId) -> &Context {
        &self.contexts[c.0]
    }

    pub fn content_ids(&self) -> impl Iterator<Item = ContentId> + '_ {
        (0..self.contents.len()).map(ContentId)
    }

    pub fn context_ids(&self) -> impl Iterator<Item = ContextId> + '_ {
        (0..self.contexts.len()).map(ContextId)
    }

    pub fn find_content(&self, id: &str) -> Result<ContentId> {
        self.contents
            .iter()
            .position(|c| c.id == id)
            .map(ContentId)
            .ok_or_else(|| Error::UnknownContent(id.to_string()))
    }

    pub fn find_context(&self, id: &str) -> Result<ContextId> {
        self.contexts
            .iter()
            .position(|c| c.id == id)
            .map(ContextId)
            .ok_or_else(|| Error::UnknownContext(id.to_string()))
    }

    pub fn alphabet_size(&self, q: ContentId) -> usize {
        self.contents[q.0].alphabet.len()
    }

    pub fn bunch(&self, c: ContextId) -> Bunch<'_> {
        Bunch { system: self, context: c }
    }

    pub fn bunches(&self) -> impl Iterator<Item = Bunch<'_>> + '_ {
        self.context_ids().map(move |c| self.bunch(c))
    }

    pub fn measures(&self, q: ContentId, c: ContextId) -> bool {
        self.contexts[c.0].contents.contains(&q)
    }

    /// Contexts in which `q` is measured, in context order.
    pub fn contexts_of(&self, q: ContentId) -> Vec<ContextId> {
        self.context_ids().filter(|&c| self.measures(q, c)).collect()
    }

    /// All `(q, c)` with `q ≺ c`, grouped by context then by content.
    pub fn incidence(&self) -> Vec<(ContentId, ContextId)> {
        self.context_ids()
            .flat_map(|c| self.contexts[c.0].contents.iter().map(move |&q| (q, c)))
            .collect()
    }

    /// Distribution of the single variable `R_q^c`.
    pub fn variable_marginal(&self, q: ContentId, c: ContextId) -> Result<Pmf> {
        self.bunch(c).marginal(&[q])
    }

    /// Formats a `(q, c)` pair for messages.
    pub fn label(&self, q: ContentId, c: ContextId) -> String {
        format!("({}, {})", self.contents[q.0].id, self.contexts[c.0].id)
    }

    /// Copy of the system with one bunch distribution replaced.
    pub fn with_bunch_pmf(&self, c: ContextId, pmf: Pmf) -> Result<Self> {
        let mut contexts = self.contexts.clone();
        let slot = contexts.get_mut(c.0).ok_or_else(|| Error::UnknownContext(format!("#{}", c.0)))?;
        slot.pmf = pmf;
        System::new(self.contents.clone(), contexts)
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let document: SystemDocument = serde_json::from_str(text)?;
        System::from_document(&document)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("system document serializes")
    }

    pub fn from_document(document: &SystemDocument) -> Result<Self> {
        let contents: Vec<Content> = document
            .contents
            .iter()
            .map(|c| Content { id: c.id.clone(), alphabet: c.alphabet.clone() })
            .collect();
        let index: HashMap<&str, usize> =
            contents.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
        if index.len() != contents.len() {
            let mut seen = HashSet::new();
            let dup = contents.iter().find(|c| !seen.insert(&c.id)).expect("duplicate exists");
            return Err(Error::DuplicateId { kind: "content", id: dup.id.clone() });
        }
        let mut contexts = Vec::with_capacity(document.contexts.len());
        for ctx in &document.contexts {
            let mut ids = Vec::with_capacity(ctx.contents.len());
            for name in &ctx.contents {
                let q = *index.get(name.as_str()).ok_or_else(|| {
                    Error::Schema(format!(
                        "context `{}` lists unknown content `{name}`",
                        ctx.id
                    ))
                })?;
                ids.push(ContentId(q));
            }
            let mut local = HashSet::new();
            for &q in &ids {
                if !local.insert(q) {
                    return Err(Error::DuplicateIncidence {
                        content: contents[q.0].id.clone(),
                        context: ctx.id.clone(),
                    });
                }
            }
            let shape: Vec<usize> = ids.iter().map(|q| contents[q.0].alphabet.len()).collect();
            let mut entries = Vec::with_capacity(ctx.pmf.len());
            for entry in &ctx.pmf {
                if entry.outcome.len() != ids.len() {
                    return Err(Error::Schema(format!(
                        "context `{}`: outcome {:?} has {} labels, expected {}",
                        ctx.id,
                        entry.outcome,
                        entry.outcome.len(),
                        ids.len()
                    )));
                }
                let mut tuple = Vec::with_capacity(ids.len());
                for (label, &q) in entry.outcome.iter().zip(&ids) {
                    let content = &contents[q.0];
                    let x = content.alphabet.iter().position(|a| a == label).ok_or_else(|| {
                        Error::UnknownOutcome {
                            content: content.id.clone(),
                            context: ctx.id.clone(),
                            label: label.clone(),
                        }
                    })?;
                    tuple.push(x);
                }
                entries.push((tuple, parse_rational(&entry.p)?));
            }
            let pmf = Pmf::new(shape, entries)
                .map_err(|source| Error::Pmf { context: ctx.id.clone(), source })?;
            contexts.push(Context { id: ctx.id.clone(), contents: ids, pmf });
        }
        System::new(contents, contexts)
    }

    pub fn to_document(&self) -> SystemDocument {
        SystemDocument {
            contents: self
                .contents
                .iter()
                .map(|c| ContentDocument { id: c.id.clone(), alphabet: c.alphabet.clone() })
                .collect(),
            contexts: self
                .contexts
                .iter()
                .map(|ctx| ContextDocument {
                    id: ctx.id.clone(),
                    contents: ctx.contents.iter().map(|q| self.contents[q.0].id.clone()).collect(),
                    pmf: ctx
                        .pmf
                        .iter()
                        .map(|(tuple, p)| PmfEntryDocument {
                            outcome: self.outcome_labels(&ctx.contents, tuple),
                            p: format_rational(p),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn outcome_labels(&self, contents: &[ContentId], tuple: &[Outcome]) -> Vec<String> {
        contents
            .iter()
            .zip(tuple)
            .map(|(q, &x)| self.contents[q.0].alphabet[x].clone())
            .collect()
    }
}

/// Serialized form of a [`System`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub contents: Vec<ContentDocument>,
    pub contexts: Vec<ContextDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentDocument {
    pub id: String,
    pub alphabet: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextDocument {
    pub id: String,
    pub contents: Vec<String>,
    pub pmf: Vec<PmfEntryDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfEntryDocument {
    pub outcome: Vec<String>,
    pub p: String,
}

/// Context id, content ids and pmf entries, as given to the builder.
type PendingContext = (String, Vec<String>, Vec<(Vec<Outcome>, Rational)>);

/// Convenience builder used by the catalog and tests.
#[derive(Debug, Default, Clone)]
pub struct SystemBuilder {
    contents: Vec<Content>,
    contexts: Vec<PendingContext>,
}

impl SystemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn content(mut self, id: &str, alphabet: &[&str]) -> Self {
        self.contents.push(Content {
            id: id.to_string(),
            alphabet: alphabet.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    /// Binary content with alphabet `["0", "1"]`.
    pub fn binary(self, id: &str) -> Self {
        self.content(id, &["0", "1"])
    }

    /// Adds a context; outcome tuples index the listed contents in order.
    pub fn context<I>(mut self, id: &str, contents: &[&str], pmf: I) -> Self
    where
        I: IntoIterator<Item = (Vec<Outcome>, Rational)>,
    {
        self.contexts.push((
            id.to_string(),
            contents.iter().map(|s| s.to_string()).collect(),
            pmf.into_iter().collect(),
        ));
        self
    }

    pub fn build(self) -> Result<System> {
        let index: HashMap<String, usize> =
            self.contents.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        let mut contexts = Vec::new();
        for (id, names, entries) in self.contexts {
            let ids: Vec<ContentId> = names
                .iter()
                .map(|n| index.get(n).map(|&i| ContentId(i)).ok_or_else(|| Error::UnknownContent(n.clone())))
                .collect::<Result<_>>()?;
            let shape = ids.iter().map(|q| self.contents[q.0].alphabet.len()).collect();
            let pmf = Pmf::new(shape, entries).map_err(|source| Error::Pmf { context: id.clone(), source })?;
            contexts.push(Context { id, contents: ids, pmf });
        }
        System::new(self.contents, contexts)
    }
}

/// One exact marginal comparison between two contexts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarginalCheck {
    pub contents: Vec<ContentId>,
    pub first: ContextId,
    pub second: ContextId,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    /// One entry per `(q, c, c')` with `q` shared by `c < c'`.
    pub single: Vec<MarginalCheck>,
    /// One entry per shared content set `I` with `|I| >= 2`.
    pub subsets: Vec<MarginalCheck>,
    pub consistent: bool,
    pub strongly_consistent: bool,
}

impl ConsistencyReport {
    pub fn violations(&self) -> impl Iterator<Item = &MarginalCheck> + '_ {
        self.single.iter().chain(&self.subsets).filter(|m| !m.equal)
    }
}

/// Largest shared content set examined subset by subset.
const MAX_SUBSET_OVERLAP: usize = 16;

/// Compares, exactly, the distributions of every shared content and every
/// shared content set across each pair of contexts.
pub fn check_connectedness(system: &System) -> ConsistencyReport {
    let mut single = Vec::new();
    let mut subsets = Vec::new();
    let n = system.contexts.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let (ci, cj) = (ContextId(i), ContextId(j));
            let shared: Vec<ContentId> = system.contexts[i]
                .contents
                .iter()
                .copied()
                .filter(|&q| system.measures(q, cj))
                .collect();
            for &q in &shared {
                let equal = system.bunch(ci).marginal(&[q]).expect("shared content")
                    == system.bunch(cj).marginal(&[q]).expect("shared content");
                single.push(MarginalCheck { contents: vec![q], first: ci, second: cj, equal });
            }
            assert!(
                shared.len() <= MAX_SUBSET_OVERLAP,
                "contexts {} and {} share {} contents",
                system.contexts[i].id,
                system.contexts[j].id,
                shared.len()
            );
            for mask in 1u32..(1u32 << shared.len()) {
                if mask.count_ones() < 2 {
                    continue;
                }
                let subset: Vec<ContentId> = shared
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, &q)| q)
                    .collect();
                let equal = system.bunch(ci).marginal(&subset).expect("shared subset")
                    == system.bunch(cj).marginal(&subset).expect("shared subset");
                subsets.push(MarginalCheck { contents: subset, first: ci, second: cj, equal });
            }
        }
    }
    let consistent = single.iter().all(|m| m.equal);
    let strongly_consistent = consistent && subsets.iter().all(|m| m.equal);
    ConsistencyReport { single, subsets, consistent, strongly_consistent }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} contents, {} contexts, {} variables",
            self.contents.len(),
            self.contexts.len(),
            self.incidence().len()
        )?;
        for ctx in &self.contexts {
            let names: Vec<&str> = ctx.contents.iter().map(|q| self.contents[q.0].id.as_str()).collect();
            writeln!(f, "  {} : {{{}}}", ctx.id, names.join(", "))?;
        }
        Ok(())
    }
}
