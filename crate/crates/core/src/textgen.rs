//! Template-based text generation with usage-aware template choice.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::feed::GameFact;
use crate::seeml::{Element, Node, SeemlDocument, Tag};
use crate::sexpr::{format_number, Fact, Term};
use crate::unify::{match_patterns_per_source, Bindings};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextgenError {
    #[error("no template covers the {predicate} fact")]
    NoTemplate { predicate: String },
    #[error("template {template}: variable ?{variable} is unbound")]
    Unbound { template: String, variable: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub id: String,
    /// The first pattern must match the reported fact; the rest may match
    /// it or the character's statics. No patterns matches every fact.
    pub preconditions: Vec<Fact>,
    pub body: SeemlDocument,
}

impl Template {
    /// Distinct `?name` slots in the body's text, in order of appearance.
    pub fn body_variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        collect_slots(&self.body.nodes, &mut out);
        out
    }

    pub fn has_phrase(&self) -> bool {
        self.body.elements().iter().any(|e| e.tag == Tag::Seg)
    }

    fn matches(&self, fact: &Fact, statics: &[Fact]) -> Option<Bindings> {
        if self.preconditions.is_empty() {
            return Some(Bindings::new());
        }
        let first = [fact];
        let rest: Vec<&Fact> = std::iter::once(fact).chain(statics).collect();
        let sources: Vec<&[&Fact]> = (0..self.preconditions.len())
            .map(|i| if i == 0 { &first[..] } else { &rest[..] })
            .collect();
        match_patterns_per_source(&self.preconditions, &sources)
            .into_iter()
            .next()
    }
}

fn collect_slots(nodes: &[Node], out: &mut Vec<String>) {
    for node in nodes {
        match node {
            Node::Text(t) => {
                for (_, _, name) in slots(t) {
                    if !out.iter().any(|v| v == name) {
                        out.push(name.to_string());
                    }
                }
            }
            Node::Element(e) => collect_slots(&e.children, out),
        }
    }
}

fn is_slot_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// `(start, end, name)` for each `?name` in `text`.
fn slots(text: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let mut rest = 0;
    while let Some(q) = text[rest..].find('?') {
        let start = rest + q;
        let name_end = text[start + 1..]
            .find(|c: char| !is_slot_char(c))
            .map_or(text.len(), |i| start + 1 + i);
        // a slot name cannot end in '-'
        let name = text[start + 1..name_end].trim_end_matches('-');
        if name.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            out.push((start, start + 1 + name.len(), name));
        }
        rest = start + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Usage {
    pub count: u64,
    pub last_used: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UsageHistory {
    entries: BTreeMap<String, Usage>,
}

impl UsageHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Usage {
        self.entries.get(id).copied().unwrap_or_default()
    }

    pub fn record_usage(&mut self, id: &str, now: f64) {
        let usage = self.entries.entry(id.to_string()).or_default();
        usage.count += 1;
        usage.last_used = Some(now);
    }

    /// `(now - last_used) - lambda * count`, infinite for a template never
    /// used.
    pub fn score(&self, id: &str, lambda: f64, now: f64) -> f64 {
        let usage = self.get(id);
        match usage.last_used {
            None => f64::INFINITY,
            Some(t) => (now - t) - lambda * usage.count as f64,
        }
    }
}

/// The best-scoring template whose preconditions hold for `fact`, with the
/// bindings it matched under. Ties go to the smallest id.
pub fn select_template<'a>(
    fact: &GameFact,
    templates: &'a [Template],
    statics: &[Fact],
    history: &UsageHistory,
    lambda: f64,
    now: f64,
) -> Result<(&'a Template, Bindings), TextgenError> {
    let mut best: Option<(f64, &Template, Bindings)> = None;
    for t in templates {
        let Some(bindings) = t.matches(&fact.fact, statics) else {
            continue;
        };
        let score = history.score(&t.id, lambda, now);
        let better = match &best {
            None => true,
            Some((s, b, _)) => score > *s || (score == *s && t.id < b.id),
        };
        if better {
            best = Some((score, t, bindings));
        }
    }
    best.map(|(_, t, b)| (t, b))
        .ok_or_else(|| TextgenError::NoTemplate {
            predicate: fact.fact.predicate.clone(),
        })
}

/// How a bound term is spoken: symbols through the name table, numbers in
/// canonical form, strings without quotes.
pub fn render_term(term: &Term, names: &BTreeMap<String, String>) -> String {
    match term {
        Term::Symbol(s) => names.get(s).cloned().unwrap_or_else(|| s.clone()),
        Term::Number(n) => format_number(n.0),
        Term::Str(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn instantiate(
    template: &Template,
    bindings: &Bindings,
    names: &BTreeMap<String, String>,
) -> Result<SeemlDocument, TextgenError> {
    let nodes =
        fill(&template.body.nodes, bindings, names).map_err(|variable| TextgenError::Unbound {
            template: template.id.clone(),
            variable,
        })?;
    Ok(SeemlDocument::new(nodes))
}

fn fill(
    nodes: &[Node],
    bindings: &Bindings,
    names: &BTreeMap<String, String>,
) -> Result<Vec<Node>, String> {
    nodes
        .iter()
        .map(|node| match node {
            Node::Text(t) => {
                let mut out = String::with_capacity(t.len());
                let mut last = 0;
                for (start, end, name) in slots(t) {
                    let term = bindings.get(name).ok_or_else(|| name.to_string())?;
                    out.push_str(&t[last..start]);
                    out.push_str(&render_term(term, names));
                    last = end;
                }
                out.push_str(&t[last..]);
                Ok(Node::Text(out))
            }
            Node::Element(e) => Ok(Node::Element(Element {
                children: fill(&e.children, bindings, names)?,
                ..e.clone()
            })),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeml::{parse_seeml, serialize_seeml};
    use crate::sexpr::read_one;

    fn fact(s: &str) -> Fact {
        Fact::from_sexp(&read_one(s).unwrap()).unwrap()
    }

    fn template(id: &str, pre: &[&str], body: &str) -> Template {
        Template {
            id: id.into(),
            preconditions: pre.iter().map(|p| fact(p)).collect(),
            body: parse_seeml(body).unwrap(),
        }
    }

    fn pass() -> GameFact {
        GameFact::new(
            fact("(pass from: a1 to: a2 begintime: 120 endtime: 125)"),
            10.0,
        )
    }

    fn pass_template() -> Template {
        template(
            "pass-1",
            &["(pass from: ?x to: ?y)"],
            "<su><seg>?x passes</seg> <seg>to ?y</seg></su>",
        )
    }

    #[test]
    fn pass_template_binds_players() {
        let templates = [pass_template()];
        let (t, b) =
            select_template(&pass(), &templates, &[], &UsageHistory::new(), 5.0, 120.0).unwrap();
        assert_eq!(t.id, "pass-1");
        assert_eq!(b["x"], Term::symbol("a1"));
        assert_eq!(b["y"], Term::symbol("a2"));
        let doc = instantiate(t, &b, &BTreeMap::new()).unwrap();
        assert_eq!(
            serialize_seeml(&doc),
            "<su><seg>a1 passes</seg> <seg>to a2</seg></su>"
        );
        assert_eq!(parse_seeml(&serialize_seeml(&doc)).unwrap(), doc);
    }

    #[test]
    fn names_table_and_hard_coded_gesture() {
        let t = template(
            "p",
            &["(pass from: ?x)"],
            "<su><seg><AU NUM=\"1\" LEVEL=\"0.4\">?x</AU> again?</seg></su>",
        );
        let (_, b) = select_template(
            &pass(),
            std::slice::from_ref(&t),
            &[],
            &UsageHistory::new(),
            5.0,
            0.0,
        )
        .unwrap();
        let names = [("a1".to_string(), "Andrews".to_string())].into();
        let doc = instantiate(&t, &b, &names).unwrap();
        assert_eq!(
            serialize_seeml(&doc),
            "<su><seg><AU LEVEL=\"0.4\" NUM=\"1\">Andrews</AU> again?</seg></su>"
        );
    }

    #[test]
    fn never_used_beats_recently_used() {
        let templates = [
            template("a", &["(pass)"], "<seg>one</seg>"),
            template("b", &["(pass)"], "<seg>two</seg>"),
        ];
        let mut h = UsageHistory::new();
        h.record_usage("a", 119.0);
        let (t, _) = select_template(&pass(), &templates, &[], &h, 5.0, 120.0).unwrap();
        assert_eq!(t.id, "b");
        h.record_usage("b", 119.5);
        let (t, _) = select_template(&pass(), &templates, &[], &h, 5.0, 120.0).unwrap();
        assert_eq!(t.id, "a");
    }

    #[test]
    fn uncovered_fact_names_predicate() {
        let templates = [pass_template()];
        let goal = GameFact::new(fact("(scores team: a)"), 9.0);
        assert_eq!(
            select_template(&goal, &templates, &[], &UsageHistory::new(), 5.0, 0.0).unwrap_err(),
            TextgenError::NoTemplate {
                predicate: "scores".into()
            }
        );
    }

    #[test]
    fn statics_in_later_preconditions() {
        let t = template(
            "ours",
            &["(scores team: ?t)", "(supports team: ?t)"],
            "<seg>yes</seg>",
        );
        let goal = GameFact::new(fact("(scores team: a)"), 9.0);
        let none = select_template(
            &goal,
            std::slice::from_ref(&t),
            &[],
            &UsageHistory::new(),
            5.0,
            0.0,
        );
        assert!(none.is_err());
        let statics = [fact("(supports team: a)")];
        assert!(select_template(&goal, &[t], &statics, &UsageHistory::new(), 5.0, 0.0).is_ok());
    }

    #[test]
    fn slots_and_unbound() {
        let t = template("q", &[], "<seg>?who scores? ?x-ray ?2 ?</seg>");
        assert_eq!(t.body_variables(), vec!["who", "x-ray"]);
        assert_eq!(
            instantiate(&t, &Bindings::new(), &BTreeMap::new()).unwrap_err(),
            TextgenError::Unbound {
                template: "q".into(),
                variable: "who".into()
            }
        );
        assert!(t.has_phrase());
    }

    #[test]
    fn usage_counts() {
        let mut h = UsageHistory::new();
        h.record_usage("a", 1.0);
        h.record_usage("a", 4.0);
        assert_eq!(
            h.get("a"),
            Usage {
                count: 2,
                last_used: Some(4.0)
            }
        );
        assert_eq!(h.score("a", 5.0, 10.0), -4.0);
        assert_eq!(h.score("zzz", 5.0, 10.0), f64::INFINITY);
    }
}
