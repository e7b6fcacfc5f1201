//! Emotion structures, generation rules and the decaying emotion pool.
//!
//! A structure's effective intensity is `base × decay(max(1, elapsed))`
//! with `decay` clamped to at most 1, so every structure starts at its base
//! intensity. Structures whose effective intensity falls below 1 are
//! inactive and leave the pool.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::feed::FactBoard;
use crate::sexpr::{Fact, Term};
use crate::unify::{match_fact, match_patterns, substitute, substitute_fact, Bindings};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmotionError {
    #[error("clock {now} is before the structure's creation time {created_at}")]
    Clock { now: f64, created_at: f64 },
    #[error("unknown emotion type {0:?}")]
    UnknownType(String),
    #[error("unbound variable ?{variable} in {rule}")]
    Unbound { rule: String, variable: String },
}

/// Ekman's six basic emotions plus interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmotionType {
    Fear,
    Anger,
    Sadness,
    Happiness,
    Disgust,
    Surprise,
    Interest,
}

impl EmotionType {
    pub const ALL: [EmotionType; 7] = [
        EmotionType::Fear,
        EmotionType::Anger,
        EmotionType::Sadness,
        EmotionType::Happiness,
        EmotionType::Disgust,
        EmotionType::Surprise,
        EmotionType::Interest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmotionType::Fear => "fear",
            EmotionType::Anger => "anger",
            EmotionType::Sadness => "sadness",
            EmotionType::Happiness => "happiness",
            EmotionType::Disgust => "disgust",
            EmotionType::Surprise => "surprise",
            EmotionType::Interest => "interest",
        }
    }
}

impl FromStr for EmotionType {
    type Err = EmotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EmotionType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EmotionError::UnknownType(s.to_string()))
    }
}

impl fmt::Display for EmotionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How intensity falls off with elapsed seconds `t` (evaluated for t ≥ 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFunction {
    /// `1/t`
    Reciprocal,
    /// `exp(-rate·(t-1))`
    Exponential(f64),
    /// `max(0, 1 - rate·(t-1))`
    Linear(f64),
    Constant,
}

impl DecayFunction {
    /// Decay factor at `t` seconds, clamped to `[0, 1]`.
    pub fn factor(&self, t: f64) -> f64 {
        let t = t.max(1.0);
        let raw = match *self {
            DecayFunction::Reciprocal => 1.0 / t,
            DecayFunction::Exponential(rate) => (-rate * (t - 1.0)).exp(),
            DecayFunction::Linear(rate) => 1.0 - rate * (t - 1.0),
            DecayFunction::Constant => 1.0,
        };
        raw.clamp(0.0, 1.0)
    }

    /// `base × factor(t)`. The reciprocal form divides directly so integral
    /// worked examples stay exact (10/10 is exactly 1).
    pub fn apply(&self, base: f64, t: f64) -> f64 {
        match self {
            DecayFunction::Reciprocal => base / t.max(1.0),
            other => base * other.factor(t),
        }
    }

    pub fn from_term(term: &Term) -> Option<DecayFunction> {
        match term {
            Term::Symbol(s) if s == "1/t" => Some(DecayFunction::Reciprocal),
            Term::Symbol(s) if s == "constant" => Some(DecayFunction::Constant),
            Term::Fact(f) if f.args.len() == 1 => {
                let rate = f.get("rate")?.as_number().filter(|r| *r >= 0.0)?;
                match f.predicate.as_str() {
                    "exp" => Some(DecayFunction::Exponential(rate)),
                    "linear" => Some(DecayFunction::Linear(rate)),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    pub fn to_term(&self) -> Term {
        let rated = |name: &str, rate: f64| {
            Term::Fact(Box::new(Fact::new(name).with("rate", Term::number(rate))))
        };
        match *self {
            DecayFunction::Reciprocal => Term::symbol("1/t"),
            DecayFunction::Constant => Term::symbol("constant"),
            DecayFunction::Exponential(r) => rated("exp", r),
            DecayFunction::Linear(r) => rated("linear", r),
        }
    }
}

impl fmt::Display for DecayFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

/// Identity used for rule re-firing: type, target and cause.
pub type EmotionKey = (EmotionType, Option<Term>, Fact);

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionStructure {
    pub kind: EmotionType,
    pub base_intensity: f64,
    pub target: Option<Term>,
    pub cause: Fact,
    pub decay: DecayFunction,
    pub created_at: f64,
}

impl EmotionStructure {
    pub fn intensity_at(&self, now: f64) -> Result<f64, EmotionError> {
        if now < self.created_at {
            return Err(EmotionError::Clock {
                now,
                created_at: self.created_at,
            });
        }
        Ok(self.decay.apply(self.base_intensity, now - self.created_at))
    }

    pub fn key(&self) -> EmotionKey {
        (self.kind, self.target.clone(), self.cause.clone())
    }

    /// The structure as seen by rule and behavior patterns:
    /// `(emotion type: T target: X cause: C)`, with `nil` for no target.
    pub fn as_fact(&self) -> Fact {
        Fact::new("emotion")
            .with("type", Term::symbol(self.kind.name()))
            .with(
                "target",
                self.target.clone().unwrap_or_else(|| Term::symbol("nil")),
            )
            .with("cause", Term::Fact(Box::new(self.cause.clone())))
    }
}

/// Template for a structure a rule adds; may mention rule variables.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionSchema {
    pub kind: EmotionType,
    pub intensity: f64,
    pub target: Option<Term>,
    pub cause: Fact,
    pub decay: DecayFunction,
}

impl EmotionSchema {
    pub fn instantiate(&self, bindings: &Bindings, now: f64) -> Result<EmotionStructure, String> {
        let target = self
            .target
            .as_ref()
            .map(|t| substitute(t, bindings))
            .transpose()?;
        Ok(EmotionStructure {
            kind: self.kind,
            base_intensity: self.intensity,
            target,
            cause: substitute_fact(&self.cause, bindings)?,
            decay: self.decay,
            created_at: now,
        })
    }

    fn collect_variables(&self, out: &mut Vec<String>) {
        if let Some(t) = &self.target {
            t.collect_variables(out);
        }
        self.cause.collect_variables(out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionRule {
    /// Optional designer label used in diagnostics.
    pub id: Option<String>,
    pub preconditions: Vec<Fact>,
    pub additions: Vec<EmotionSchema>,
    /// Patterns over `(emotion type: … target: … cause: …)`.
    pub deletions: Vec<Fact>,
}

impl EmotionRule {
    pub fn label(&self, index: usize) -> String {
        match &self.id {
            Some(id) => format!("emotion-rule {id}"),
            None => format!("emotion-rule #{}", index + 1),
        }
    }

    /// Variables used by additions or deletions but bound by no
    /// precondition.
    pub fn unbound_variables(&self) -> Vec<String> {
        let mut bound = Vec::new();
        self.preconditions
            .iter()
            .for_each(|p| p.collect_variables(&mut bound));
        let mut used = Vec::new();
        self.additions
            .iter()
            .for_each(|a| a.collect_variables(&mut used));
        self.deletions
            .iter()
            .for_each(|d| d.collect_variables(&mut used));
        used.retain(|v| !bound.contains(v));
        used
    }
}

/// Active emotion structures. Also remembers every (type, target, cause)
/// it has admitted so that a persisting cause does not re-create an
/// emotion that already decayed or was deleted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmotionPool {
    structures: Vec<EmotionStructure>,
    admitted: BTreeSet<EmotionKey>,
}

impl EmotionPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn structures(&self) -> &[EmotionStructure] {
        &self.structures
    }

    pub fn len(&self) -> usize {
        self.structures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structures.is_empty()
    }

    /// Adds a structure unless one with the same key was admitted before.
    /// Returns whether it was added.
    pub fn insert(&mut self, structure: EmotionStructure) -> bool {
        if !self.admitted.insert(structure.key()) {
            return false;
        }
        self.structures.push(structure);
        true
    }

    pub fn as_facts(&self) -> Vec<Fact> {
        self.structures
            .iter()
            .map(EmotionStructure::as_fact)
            .collect()
    }

    /// Runs every rule in order: for each binding, deletions first, then
    /// additions stamped with `now`.
    pub fn apply_rules(
        &mut self,
        facts: &FactBoard,
        statics: &[Fact],
        rules: &[EmotionRule],
        now: f64,
    ) -> Result<(), EmotionError> {
        for (index, rule) in rules.iter().enumerate() {
            let unbound = |variable: String| EmotionError::Unbound {
                rule: rule.label(index),
                variable,
            };
            for bindings in match_rule(rule, facts, statics, self) {
                for pattern in &rule.deletions {
                    let pattern = substitute_fact(pattern, &bindings).map_err(unbound)?;
                    self.structures
                        .retain(|s| match_fact(&pattern, &s.as_fact(), &Bindings::new()).is_none());
                }
                for schema in &rule.additions {
                    let structure = schema.instantiate(&bindings, now).map_err(unbound)?;
                    self.insert(structure);
                }
            }
        }
        Ok(())
    }

    /// Drops every structure whose intensity at `now` is below 1.
    pub fn decay(&mut self, now: f64) {
        self.structures.retain(|s| {
            s.intensity_at(now.max(s.created_at))
                .is_ok_and(|i| i >= 1.0)
        });
    }
}

/// Every binding under which all of the rule's preconditions hold, each
/// precondition matched against board facts, statics or pool structures.
pub fn match_rule(
    rule: &EmotionRule,
    facts: &FactBoard,
    statics: &[Fact],
    pool: &EmotionPool,
) -> Vec<Bindings> {
    let pool_facts = pool.as_facts();
    let sources: Vec<&Fact> = facts
        .facts()
        .chain(statics.iter())
        .chain(pool_facts.iter())
        .collect();
    match_patterns(&rule.preconditions, &sources)
}
