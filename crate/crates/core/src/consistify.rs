//! The consistified equivalent `R†` of a system.
//!
//! Every variable `R_q^c` becomes a content `ξ = (q, c)` of its own. It is
//! measured in two contexts: `(·, c)`, whose bunch is the source bunch `R^c`,
//! and `(q, ·)`, whose bunch is a multimaximal coupling `T_q` of all
//! variables sharing `q`. Every content then has the same distribution in
//! both of its contexts, so `R†` is consistently connected by construction.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::coupling::{cbd_analyze, multimaximal_coupling, Coupling, MultimaximalClass, MultimaximalResult};
use crate::error::Result;
use crate::lp::VertexLimit;
use crate::pmf::Pmf;
use crate::system::{check_connectedness, Content, Context, ConsistencyReport, ContentId, ContextId, System};

/// What a context of `R†` stands for in the source system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContextKind {
    /// `(·, c)`: a copy of the source bunch `R^c`.
    Bunch(ContextId),
    /// `(q, ·)`: the connection `T_q`.
    Connection(ContentId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistifiedSystem {
    pub system: System,
    pub source: System,
    /// Source variable `(q, c)` behind each content of `system`.
    pub back_map: Vec<(ContentId, ContextId)>,
    /// Kind of each context of `system`; bunch contexts come first.
    pub kinds: Vec<ContextKind>,
    /// The chosen `T_q`, indexed by source content.
    pub connections: Vec<Coupling>,
}

impl ConsistifiedSystem {
    /// Assembles `R†` from a source system and one connection per content.
    ///
    /// Panics if a connection does not list the variables of its content in
    /// context order.
    pub fn assemble(source: &System, connections: Vec<Coupling>) -> Result<Self> {
        let back_map = source.incidence();
        let index: BTreeMap<(ContentId, ContextId), ContentId> =
            back_map.iter().enumerate().map(|(i, &v)| (v, ContentId(i))).collect();

        let contents: Vec<Content> = back_map
            .iter()
            .map(|&(q, c)| Content {
                id: format!("{}@{}", source.content(q).id, source.context(c).id),
                alphabet: source.content(q).alphabet.clone(),
            })
            .collect();

        let mut contexts = Vec::with_capacity(source.contexts().len() + source.contents().len());
        let mut kinds = Vec::with_capacity(contexts.capacity());
        for c in source.context_ids() {
            let context = source.context(c);
            contexts.push(Context {
                id: format!("ctx:{}", context.id),
                contents: context.contents.iter().map(|&q| index[&(q, c)]).collect(),
                pmf: context.pmf.clone(),
            });
            kinds.push(ContextKind::Bunch(c));
        }
        for q in source.content_ids() {
            let t = &connections[q.index()];
            let expected: Vec<(ContentId, ContextId)> =
                source.contexts_of(q).into_iter().map(|c| (q, c)).collect();
            assert_eq!(t.variables, expected, "connection for content #{} is misaligned", q.index());
            contexts.push(Context {
                id: format!("cnt:{}", source.content(q).id),
                contents: t.variables.iter().map(|v| index[v]).collect(),
                pmf: t.joint.clone(),
            });
            kinds.push(ContextKind::Connection(q));
        }
        Ok(ConsistifiedSystem {
            system: System::new(contents, contexts)?,
            source: source.clone(),
            back_map,
            kinds,
            connections,
        })
    }
}

/// A family of consistified systems, one per choice of multimaximal
/// connections for the contents whose class has several members.
#[derive(Debug, Clone)]
pub struct ConsistifiedClass {
    pub source: System,
    /// Per content: the unique connection, or the class to choose from.
    pub choices: Vec<Result<Coupling, MultimaximalClass>>,
}

/// Enumeration of a [`ConsistifiedClass`] stopped at its cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indeterminate {
    pub cap: usize,
}

impl ConsistifiedClass {
    pub fn ambiguous_contents(&self) -> Vec<ContentId> {
        self.choices
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_err())
            .map(|(i, _)| ContentId(i))
            .collect()
    }

    /// Members built from vertex connections. At most `cap` simplex bases
    /// are visited per content and at most `cap` members are produced.
    pub fn members(&self, cap: usize) -> std::result::Result<Vec<ConsistifiedSystem>, Indeterminate> {
        let mut options: Vec<Vec<Coupling>> = Vec::with_capacity(self.choices.len());
        for choice in &self.choices {
            match choice {
                Ok(t) => options.push(vec![t.clone()]),
                Err(class) => options.push(class.vertices(cap).map_err(|VertexLimit { cap }| Indeterminate { cap })?),
            }
        }
        let total = options.iter().try_fold(1usize, |acc, o| acc.checked_mul(o.len()));
        if total.is_none_or(|t| t > cap) {
            return Err(Indeterminate { cap });
        }
        let mut members = Vec::new();
        let mut pick = vec![0usize; options.len()];
        loop {
            let chosen = pick.iter().zip(&options).map(|(&i, o)| o[i].clone()).collect();
            members.push(
                ConsistifiedSystem::assemble(&self.source, chosen).expect("members are valid systems"),
            );
            let Some(k) = (0..pick.len()).rev().find(|&k| pick[k] + 1 < options[k].len()) else {
                break;
            };
            pick[k] += 1;
            pick[k + 1..].iter_mut().for_each(|p| *p = 0);
        }
        Ok(members)
    }

    /// A noncontextual member if the class has one.
    ///
    /// The class has a noncontextual member exactly when some coupling of
    /// the source attains every pairwise maximum at once. Projecting such a
    /// coupling onto each content's variables gives connections lying in
    /// the pinned classes, and the coupling itself is then a reduced
    /// coupling of the assembled member.
    pub fn noncontextual_member(&self) -> Option<ConsistifiedSystem> {
        let verdict = cbd_analyze(&self.source);
        if verdict.contextual {
            return None;
        }
        let s = &verdict.coupling;
        let connections = self
            .source
            .content_ids()
            .map(|q| {
                let variables: Vec<(ContentId, ContextId)> =
                    self.source.contexts_of(q).into_iter().map(|c| (q, c)).collect();
                let positions: Vec<usize> =
                    variables.iter().map(|&(q, c)| s.position(q, c).expect("variable present")).collect();
                Coupling { joint: s.joint.marginal(&positions), variables, provenance: s.provenance }
            })
            .collect();
        Some(ConsistifiedSystem::assemble(&self.source, connections).expect("valid member"))
    }

    pub fn contextual(&self) -> bool {
        self.noncontextual_member().is_none()
    }
}

#[derive(Debug, Clone)]
pub enum ConsistifyOutcome {
    Consistified(ConsistifiedSystem),
    /// No multimaximal coupling exists for this content.
    ClassEmpty(ContentId),
    ClassMultiple(ConsistifiedClass),
}

impl ConsistifyOutcome {
    pub fn consistified(&self) -> Option<&ConsistifiedSystem> {
        match self {
            ConsistifyOutcome::Consistified(r) => Some(r),
            _ => None,
        }
    }
}

pub fn consistify(system: &System) -> ConsistifyOutcome {
    let mut choices = Vec::with_capacity(system.contents().len());
    for q in system.content_ids() {
        match multimaximal_coupling(system, q).expect("content comes from the system") {
            MultimaximalResult::Found(t) => choices.push(Ok(t)),
            MultimaximalResult::NotUnique { class, .. } => choices.push(Err(class)),
            MultimaximalResult::Empty => return ConsistifyOutcome::ClassEmpty(q),
        }
    }
    if choices.iter().all(|c| c.is_ok()) {
        let connections = choices.into_iter().map(|c| c.expect("checked")).collect();
        ConsistifyOutcome::Consistified(
            ConsistifiedSystem::assemble(system, connections).expect("consistified system is valid"),
        )
    } else {
        ConsistifyOutcome::ClassMultiple(ConsistifiedClass { source: system.clone(), choices })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistifiedCheck {
    pub connectedness: ConsistencyReport,
    /// Structural or distributional disagreements with the source system.
    pub mismatches: Vec<String>,
}

impl ConsistifiedCheck {
    pub fn passed(&self) -> bool {
        self.connectedness.strongly_consistent && self.mismatches.is_empty()
    }
}

/// Checks strong consistent connectedness of `R†` and that every content
/// carries two copies of its source variable's distribution.
pub fn verify_consistified(r: &ConsistifiedSystem) -> ConsistifiedCheck {
    let connectedness = check_connectedness(&r.system);
    let mut mismatches = Vec::new();
    let source = &r.source;
    let incidence = source.incidence();
    if r.back_map != incidence {
        mismatches.push("content back-map differs from the source incidence".to_string());
    }
    let expected_contexts = source.contexts().len() + source.contents().len();
    if r.system.contexts().len() != expected_contexts || r.kinds.len() != expected_contexts {
        mismatches.push(format!(
            "expected {} contexts, found {}",
            expected_contexts,
            r.system.contexts().len()
        ));
        return ConsistifiedCheck { connectedness, mismatches };
    }
    for (pi, kind) in r.kinds.iter().enumerate() {
        let context = r.system.context(ContextId(pi));
        match *kind {
            ContextKind::Bunch(c) => {
                if context.pmf != source.context(c).pmf {
                    mismatches.push(format!("{}: bunch differs from source context {}", context.id, source.context(c).id));
                }
            }
            ContextKind::Connection(q) => {
                if context.pmf != r.connections[q.index()].joint {
                    mismatches.push(format!("{}: bunch differs from the chosen connection", context.id));
                }
            }
        }
    }
    for (i, &(q, c)) in r.back_map.iter().enumerate() {
        let xi = ContentId(i);
        let Ok(want) = source.variable_marginal(q, c) else {
            mismatches.push(format!("{}: no such source variable", r.system.content(xi).id));
            continue;
        };
        let homes = r.system.contexts_of(xi);
        if homes.len() != 2 {
            mismatches.push(format!("{}: measured in {} contexts, not 2", r.system.content(xi).id, homes.len()));
        }
        for pi in homes {
            let got: Pmf = r.system.variable_marginal(xi, pi).expect("measured");
            if got != want {
                mismatches.push(format!(
                    "{} in {}: distribution differs from source variable",
                    r.system.content(xi).id,
                    r.system.context(pi).id
                ));
            }
        }
    }
    ConsistifiedCheck { connectedness, mismatches }
}
