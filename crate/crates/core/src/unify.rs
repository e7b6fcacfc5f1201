//! One-way pattern matching of `?variable` patterns against ground facts.
//!
//! Fact patterns match by keyword subset: every argument named in the
//! pattern must be present in the ground fact and match it, while extra
//! ground arguments are ignored. `(scores team: ?t)` therefore matches
//! `(scores team: a time: 125)`.

use std::collections::BTreeMap;

use crate::sexpr::{Fact, Term};

pub type Bindings = BTreeMap<String, Term>;

pub fn match_term(pattern: &Term, ground: &Term, bindings: &mut Bindings) -> bool {
    match (pattern, ground) {
        (Term::Variable(v), _) => match bindings.get(v) {
            Some(bound) => bound == ground,
            None => {
                bindings.insert(v.clone(), ground.clone());
                true
            }
        },
        (Term::Fact(p), Term::Fact(g)) => match_fact_into(p, g, bindings),
        (Term::List(ps), Term::List(gs)) => {
            ps.len() == gs.len() && ps.iter().zip(gs).all(|(p, g)| match_term(p, g, bindings))
        }
        (p, g) => p == g,
    }
}

fn match_fact_into(pattern: &Fact, ground: &Fact, bindings: &mut Bindings) -> bool {
    pattern.predicate == ground.predicate
        && pattern
            .args
            .iter()
            .all(|(key, p)| ground.get(key).is_some_and(|g| match_term(p, g, bindings)))
}

/// Extends `bindings` so that `pattern` matches `ground`, or returns `None`.
pub fn match_fact(pattern: &Fact, ground: &Fact, bindings: &Bindings) -> Option<Bindings> {
    let mut extended = bindings.clone();
    match_fact_into(pattern, ground, &mut extended).then_some(extended)
}

/// All bindings that satisfy every pattern, each pattern matched against
/// any of `sources`. Results are deduplicated and sorted.
pub fn match_patterns(patterns: &[Fact], sources: &[&Fact]) -> Vec<Bindings> {
    let per_pattern: Vec<&[&Fact]> = patterns.iter().map(|_| sources).collect();
    match_patterns_per_source(patterns, &per_pattern)
}

/// Like [`match_patterns`], but pattern `i` only draws from `sources[i]`.
pub fn match_patterns_per_source(patterns: &[Fact], sources: &[&[&Fact]]) -> Vec<Bindings> {
    assert_eq!(patterns.len(), sources.len());
    let mut out = Vec::new();
    solve(patterns, sources, Bindings::new(), &mut out);
    out.sort();
    out.dedup();
    out
}

fn solve(patterns: &[Fact], sources: &[&[&Fact]], bindings: Bindings, out: &mut Vec<Bindings>) {
    let Some((first, rest)) = patterns.split_first() else {
        out.push(bindings);
        return;
    };
    for ground in sources[0] {
        if let Some(extended) = match_fact(first, ground, &bindings) {
            solve(rest, &sources[1..], extended, out);
        }
    }
}

/// Replaces bound variables; the first unbound variable is returned as the
/// error.
pub fn substitute(term: &Term, bindings: &Bindings) -> Result<Term, String> {
    match term {
        Term::Variable(v) => bindings.get(v).cloned().ok_or_else(|| v.clone()),
        Term::List(items) => items
            .iter()
            .map(|t| substitute(t, bindings))
            .collect::<Result<_, _>>()
            .map(Term::List),
        Term::Fact(f) => substitute_fact(f, bindings).map(|f| Term::Fact(Box::new(f))),
        other => Ok(other.clone()),
    }
}

pub fn substitute_fact(fact: &Fact, bindings: &Bindings) -> Result<Fact, String> {
    let args = fact
        .args
        .iter()
        .map(|(k, v)| substitute(v, bindings).map(|v| (k.clone(), v)))
        .collect::<Result<_, _>>()?;
    Ok(Fact {
        predicate: fact.predicate.clone(),
        args,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::read_one;

    fn fact(s: &str) -> Fact {
        Fact::from_sexp(&read_one(s).unwrap()).unwrap()
    }

    #[test]
    fn keyword_subset_match() {
        let p = fact("(scores team: ?t)");
        let g = fact("(scores team: a time: 125)");
        let b = match_fact(&p, &g, &Bindings::new()).unwrap();
        assert_eq!(b["t"], Term::symbol("a"));
        assert!(match_fact(&fact("(scores side: ?t)"), &g, &Bindings::new()).is_none());
    }

    #[test]
    fn shared_variables_join() {
        let statics = fact("(supports team: a)");
        let a = fact("(scores team: a time: 1)");
        let b = fact("(scores team: b time: 2)");
        let pats = [fact("(supports team: ?team)"), fact("(scores team: ?team)")];
        let got = match_patterns(&pats, &[&statics, &a, &b]);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0]["team"], Term::symbol("a"));
    }

    #[test]
    fn repeated_variable_within_fact() {
        let p = fact("(pass from: ?x to: ?x)");
        assert!(match_fact(&p, &fact("(pass from: a1 to: a1)"), &Bindings::new()).is_some());
        assert!(match_fact(&p, &fact("(pass from: a1 to: a2)"), &Bindings::new()).is_none());
    }

    #[test]
    fn substitution_reports_unbound() {
        let t = Term::Fact(Box::new(fact("(scores team: ?team)")));
        assert_eq!(substitute(&t, &Bindings::new()), Err("team".to_string()));
    }

    #[test]
    fn coordinates_match_elementwise() {
        let p = fact("(move toloc: (?x 10))");
        let b = match_fact(&p, &fact("(move toloc: (20 10))"), &Bindings::new()).unwrap();
        assert_eq!(b["x"], Term::number(20.0));
        assert!(match_fact(&p, &fact("(move toloc: (20 11))"), &Bindings::new()).is_none());
    }
}
