//! Emotion-expressing behaviors: activation from the emotion pool,
//! arbitration within groups of mutually inconsistent behaviors, and
//! expansion of the winners into leaf markup directives.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::emotion::{EmotionPool, EmotionStructure, EmotionType};
use crate::seeml::{DirectiveError, MarkupDirective};
use crate::sexpr::{Fact, Term};
use crate::unify::{match_patterns, match_term, Bindings};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BehaviorError {
    #[error("behavior {0} is defined more than once")]
    DuplicateId(String),
    #[error("behavior {parent} names unknown child {child}")]
    DanglingChild { parent: String, child: String },
    #[error("behavior {0} is part of a cycle")]
    Cycle(String),
    #[error("behavior {id}: {source}")]
    Directive {
        id: String,
        #[source]
        source: DirectiveError,
    },
}

/// One emotion a behavior needs, with an optional pattern on its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Motivation {
    pub emotion: EmotionType,
    pub target: Option<Term>,
}

impl Motivation {
    fn matches(&self, s: &EmotionStructure, bindings: &Bindings) -> bool {
        if s.kind != self.emotion {
            return false;
        }
        match &self.target {
            None => true,
            Some(pattern) => {
                let target = s.target.clone().unwrap_or_else(|| Term::symbol("nil"));
                match_term(pattern, &target, &mut bindings.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorBody {
    Children(Vec<String>),
    Directives(Vec<MarkupDirective>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorSpec {
    pub id: String,
    pub group: String,
    pub motivated_by: Vec<Motivation>,
    /// Patterns over the character's static facts.
    pub preconditions: Vec<Fact>,
    pub body: BehaviorBody,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivatedBehavior {
    pub spec: BehaviorSpec,
    pub activation: f64,
    pub motivating: Vec<EmotionStructure>,
}

/// Behaviors whose motivations are all present in the pool and whose
/// static preconditions hold, scored by the summed current intensity of
/// the structures that motivate them.
pub fn activate_behaviors(
    specs: &[BehaviorSpec],
    pool: &EmotionPool,
    statics: &[Fact],
    now: f64,
) -> Vec<ActivatedBehavior> {
    let sources: Vec<&Fact> = statics.iter().collect();
    let mut out = Vec::new();
    for spec in specs {
        if spec.motivated_by.is_empty() {
            continue;
        }
        let mut chosen: BTreeSet<usize> = BTreeSet::new();
        for bindings in match_patterns(&spec.preconditions, &sources) {
            let per_motive: Vec<Vec<usize>> = spec
                .motivated_by
                .iter()
                .map(|m| {
                    pool.structures()
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| m.matches(s, &bindings))
                        .map(|(i, _)| i)
                        .collect()
                })
                .collect();
            if per_motive.iter().all(|m| !m.is_empty()) {
                chosen.extend(per_motive.into_iter().flatten());
            }
        }
        let motivating: Vec<EmotionStructure> = chosen
            .into_iter()
            .map(|i| pool.structures()[i].clone())
            .collect();
        let activation: f64 = motivating
            .iter()
            .map(|s| s.intensity_at(now).unwrap_or(0.0))
            .sum();
        if !motivating.is_empty() && activation > 0.0 {
            out.push(ActivatedBehavior {
                spec: spec.clone(),
                activation,
                motivating,
            });
        }
    }
    out
}

/// Keeps the strongest behavior of each group (smallest id on a tie), in
/// input order.
pub fn arbitrate(activated: Vec<ActivatedBehavior>) -> Vec<ActivatedBehavior> {
    let mut best: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, a) in activated.iter().enumerate() {
        let entry = best.entry(a.spec.group.as_str()).or_insert(i);
        let current = &activated[*entry];
        if a.activation > current.activation
            || (a.activation == current.activation && a.spec.id < current.spec.id)
        {
            *entry = i;
        }
    }
    let keep: BTreeSet<usize> = best.into_values().collect();
    activated
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, a)| a)
        .collect()
}

/// Depth-first expansion of each winner to its leaf directives.
pub fn expand(
    winners: &[ActivatedBehavior],
    specs: &[BehaviorSpec],
) -> Result<Vec<MarkupDirective>, BehaviorError> {
    let by_id: BTreeMap<&str, &BehaviorSpec> = specs.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut out = Vec::new();
    for w in winners {
        let mut path = Vec::new();
        expand_into(&w.spec, &by_id, &mut path, &mut out)?;
    }
    Ok(out)
}

fn expand_into<'a>(
    spec: &'a BehaviorSpec,
    by_id: &BTreeMap<&str, &'a BehaviorSpec>,
    path: &mut Vec<&'a str>,
    out: &mut Vec<MarkupDirective>,
) -> Result<(), BehaviorError> {
    if path.contains(&spec.id.as_str()) {
        return Err(BehaviorError::Cycle(spec.id.clone()));
    }
    match &spec.body {
        BehaviorBody::Directives(d) => out.extend(d.iter().cloned()),
        BehaviorBody::Children(children) => {
            path.push(&spec.id);
            for child in children {
                let c = by_id
                    .get(child.as_str())
                    .ok_or_else(|| BehaviorError::DanglingChild {
                        parent: spec.id.clone(),
                        child: child.clone(),
                    })?;
                expand_into(c, by_id, path, out)?;
            }
            path.pop();
        }
    }
    Ok(())
}

/// Load-time checks on a behavior set: unique ids, resolvable children,
/// no cycles, valid directives. Every problem found is returned.
pub fn check_behaviors(specs: &[BehaviorSpec]) -> Vec<BehaviorError> {
    let mut errors = Vec::new();
    let mut by_id: BTreeMap<&str, &BehaviorSpec> = BTreeMap::new();
    for spec in specs {
        if by_id.insert(&spec.id, spec).is_some() {
            errors.push(BehaviorError::DuplicateId(spec.id.clone()));
        }
    }
    for spec in specs {
        match &spec.body {
            BehaviorBody::Children(children) => {
                for child in children {
                    if !by_id.contains_key(child.as_str()) {
                        errors.push(BehaviorError::DanglingChild {
                            parent: spec.id.clone(),
                            child: child.clone(),
                        });
                    }
                }
            }
            BehaviorBody::Directives(directives) => {
                for d in directives {
                    if let Err(source) = d.validate() {
                        errors.push(BehaviorError::Directive {
                            id: spec.id.clone(),
                            source,
                        });
                    }
                }
            }
        }
    }
    // three-colour DFS over the child graph
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    let mut cyclic: BTreeSet<String> = BTreeSet::new();
    for spec in specs {
        visit(&spec.id, &by_id, &mut state, &mut cyclic);
    }
    errors.extend(cyclic.into_iter().map(BehaviorError::Cycle));
    errors
}

fn visit<'a>(
    id: &'a str,
    by_id: &BTreeMap<&'a str, &'a BehaviorSpec>,
    state: &mut BTreeMap<&'a str, u8>,
    cyclic: &mut BTreeSet<String>,
) {
    match state.get(id) {
        Some(1) => {
            cyclic.insert(id.to_string());
            return;
        }
        Some(_) => return,
        None => {}
    }
    let Some(spec) = by_id.get(id) else { return };
    state.insert(id, 1);
    if let BehaviorBody::Children(children) = &spec.body {
        for child in children {
            visit(child, by_id, state, cyclic);
        }
    }
    state.insert(id, 2);
}
