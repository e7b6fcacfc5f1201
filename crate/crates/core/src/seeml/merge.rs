//! Tag combination rules.
//!
//! 1. Tags that are not identical are independent and left alone.
//! 2. An element identical to one of its ancestors is redundant; the inner
//!    (smaller-scope) copy is removed and its content spliced in place.
//! 3. Identical tags that carry parameter changes (signed "delta"
//!    attributes such as `SPEED="+10%"`) are additive: the outer tag is
//!    pushed down around the inner one, and the inner span receives the
//!    summed change. Every text position keeps the same total change.
//!
//! Only assigned markup takes part (SABLE prosody, EXPR, AU, AFFECT). GDA
//! structure is never collapsed.

use std::collections::{BTreeMap, BTreeSet};

use super::{Element, Node, SeemlDocument, Tag};

/// Fixed-point scale for delta sums (six decimal places).
const SCALE: i64 = 1_000_000;

/// A signed numeric change with its unit, e.g. `+10%` → (10_000_000, "%").
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delta<'a> {
    pub micros: i64,
    pub unit: &'a str,
}

/// Parses a signed delta value (`+10%`, `-2.5st`, `+1`). Unsigned numbers
/// are absolute settings, not deltas.
pub fn parse_delta(value: &str) -> Option<Delta<'_>> {
    let (sign, body) = match value.as_bytes().first()? {
        b'+' => (1, &value[1..]),
        b'-' => (-1, &value[1..]),
        _ => return None,
    };
    let num_end = body
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(body.len());
    let (number, unit) = body.split_at(num_end);
    if !unit.chars().all(|c| c.is_ascii_alphabetic() || c == '%') {
        return None;
    }
    let (int, frac) = number.split_once('.').unwrap_or((number, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.chars().all(|c| c.is_ascii_digit())
        || !frac.chars().all(|c| c.is_ascii_digit())
        || frac.len() > 6
        || int.len() > 12
    {
        return None;
    }
    let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_micros: i64 = if frac.is_empty() {
        0
    } else {
        format!("{frac:0<6}").parse().ok()?
    };
    Some(Delta {
        micros: sign * (int * SCALE + frac_micros),
        unit,
    })
}

fn format_delta(micros: i64, unit: &str) -> String {
    let sign = if micros < 0 { '-' } else { '+' };
    let abs = micros.unsigned_abs();
    let int = abs / SCALE as u64;
    let frac = abs % SCALE as u64;
    if frac == 0 {
        format!("{sign}{int}{unit}")
    } else {
        let digits = format!("{frac:06}");
        format!("{sign}{int}.{}{unit}", digits.trim_end_matches('0'))
    }
}

pub fn is_mergeable(tag: Tag) -> bool {
    matches!(
        tag,
        Tag::Rate | Tag::Pitch | Tag::Volume | Tag::Emph | Tag::Expr | Tag::Au | Tag::Affect
    )
}

/// What makes two tags "identical": tag, non-delta attributes, and the
/// names and units of delta attributes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MergeIdentity {
    pub tag: Tag,
    pub fixed: Vec<(String, String)>,
    pub deltas: Vec<(String, String)>,
}

pub fn identity_of(e: &Element) -> MergeIdentity {
    let mut fixed = Vec::new();
    let mut deltas = Vec::new();
    for (k, v) in &e.attrs {
        match parse_delta(v) {
            Some(d) => deltas.push((k.clone(), d.unit.to_string())),
            None => fixed.push((k.clone(), v.clone())),
        }
    }
    MergeIdentity {
        tag: e.tag,
        fixed,
        deltas,
    }
}

pub fn merge_tags(doc: &SeemlDocument) -> SeemlDocument {
    let mut active = BTreeSet::new();
    SeemlDocument::new(merge_nodes(doc.nodes.clone(), &mut active))
}

fn merge_nodes(nodes: Vec<Node>, active: &mut BTreeSet<MergeIdentity>) -> Vec<Node> {
    let mut out = Vec::with_capacity(nodes.len());
    for node in nodes {
        let mut e = match node {
            Node::Element(e) => e,
            text => {
                out.push(text);
                continue;
            }
        };
        if !is_mergeable(e.tag) {
            e.children = merge_nodes(e.children, active);
            out.push(Node::Element(e));
            continue;
        }
        let id = identity_of(&e);
        if active.contains(&id) {
            // rule 2: an identical ancestor already covers this span
            out.extend(merge_nodes(e.children, active));
        } else if !id.deltas.is_empty() && contains_identity(&e.children, &id) {
            // rule 3
            let children = std::mem::take(&mut e.children);
            let pushed = push_down(&e, &id, children);
            out.extend(merge_nodes(pushed, active));
        } else {
            active.insert(id.clone());
            e.children = merge_nodes(e.children, active);
            active.remove(&id);
            out.push(Node::Element(e));
        }
    }
    out
}

fn contains_identity(nodes: &[Node], id: &MergeIdentity) -> bool {
    nodes.iter().any(|n| match n {
        Node::Element(e) => {
            (is_mergeable(e.tag) && identity_of(e) == *id) || contains_identity(&e.children, id)
        }
        Node::Text(_) => false,
    })
}

/// Removes `outer` and re-applies it below: identical descendants absorb
/// its deltas, and maximal runs of siblings free of identical descendants
/// are wrapped in a copy of `outer`.
fn push_down(outer: &Element, id: &MergeIdentity, children: Vec<Node>) -> Vec<Node> {
    let mut out = Vec::new();
    let mut run: Vec<Node> = Vec::new();
    let flush = |run: &mut Vec<Node>, out: &mut Vec<Node>| {
        if !run.is_empty() {
            let mut copy = outer.clone();
            copy.children = std::mem::take(run);
            out.push(Node::Element(copy));
        }
    };
    for child in children {
        match child {
            Node::Element(mut e) if is_mergeable(e.tag) && identity_of(&e) == *id => {
                flush(&mut run, &mut out);
                add_deltas(&mut e, outer);
                out.push(Node::Element(e));
            }
            Node::Element(mut e) if contains_identity(&e.children, id) => {
                flush(&mut run, &mut out);
                let grandchildren = std::mem::take(&mut e.children);
                e.children = push_down(outer, id, grandchildren);
                out.push(Node::Element(e));
            }
            other => run.push(other),
        }
    }
    flush(&mut run, &mut out);
    out
}

fn add_deltas(inner: &mut Element, outer: &Element) {
    let mut sums: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in &inner.attrs {
        if let (Some(a), Some(b)) = (
            parse_delta(v),
            outer.attrs.get(k).and_then(|o| parse_delta(o)),
        ) {
            sums.insert(k.clone(), format_delta(a.micros + b.micros, a.unit));
        }
    }
    inner.attrs.extend(sums);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeml::{parse_seeml, serialize_seeml};

    fn merged(text: &str) -> String {
        serialize_seeml(&merge_tags(&parse_seeml(text).unwrap()))
    }

    #[test]
    fn delta_parsing() {
        assert_eq!(
            parse_delta("+10%"),
            Some(Delta {
                micros: 10 * SCALE,
                unit: "%"
            })
        );
        assert_eq!(parse_delta("-2.5st").unwrap().micros, -2_500_000);
        assert_eq!(parse_delta("+.5").unwrap().micros, 500_000);
        assert_eq!(parse_delta("0.8"), None);
        assert_eq!(parse_delta("+"), None);
        assert_eq!(parse_delta("+1e5"), None);
        assert_eq!(parse_delta("+1.2.3"), None);
        assert_eq!(format_delta(15 * SCALE, "%"), "+15%");
        assert_eq!(format_delta(-1_250_000, ""), "-1.25");
        assert_eq!(format_delta(0, "%"), "+0%");
    }

    #[test]
    fn identical_smile_inside_smile_keeps_outer() {
        assert_eq!(
            merged("<EXPR NAME=\"smile\">great <EXPR NAME=\"smile\">pass</EXPR></EXPR>"),
            "<EXPR NAME=\"smile\">great pass</EXPR>"
        );
    }

    #[test]
    fn rate_changes_add_up() {
        assert_eq!(
            merged("<RATE SPEED=\"+10%\">a <RATE SPEED=\"+5%\">b</RATE> c</RATE>"),
            "<RATE SPEED=\"+10%\">a </RATE><RATE SPEED=\"+15%\">b</RATE><RATE SPEED=\"+10%\"> c</RATE>"
        );
    }

    #[test]
    fn rate_pushed_through_structure() {
        assert_eq!(
            merged("<RATE SPEED=\"+10%\"><su><seg>a</seg> <seg><RATE SPEED=\"-4%\">b</RATE></seg></su></RATE>"),
            "<su><RATE SPEED=\"+10%\"><seg>a</seg> </RATE><seg><RATE SPEED=\"+6%\">b</RATE></seg></su>"
        );
    }

    #[test]
    fn independent_tags_untouched() {
        let text = "<EXPR NAME=\"smile\">great <AU NUM=\"9\">pass</AU></EXPR>";
        assert_eq!(merged(text), text);
        let levels = "<EXPR LEVEL=\"0.5\" NAME=\"smile\">a<EXPR LEVEL=\"0.8\" NAME=\"smile\">b</EXPR></EXPR>";
        assert_eq!(merged(levels), levels);
    }

    #[test]
    fn gda_structure_is_never_collapsed() {
        let text = "<seg>a <seg>b</seg></seg>";
        assert_eq!(merged(text), text);
    }

    #[test]
    fn three_level_sum() {
        assert_eq!(
            merged("<PITCH BASE=\"+1\"><PITCH BASE=\"+2\"><PITCH BASE=\"+3\">x</PITCH></PITCH></PITCH>"),
            "<PITCH BASE=\"+6\">x</PITCH>"
        );
    }

    #[test]
    fn idempotent_on_examples() {
        for text in [
            "<RATE SPEED=\"+10%\">a <RATE SPEED=\"+5%\">b</RATE> c</RATE>",
            "<EXPR NAME=\"smile\"><EXPR NAME=\"smile\">x</EXPR><AU NUM=\"4\">y<AU NUM=\"4\">z</AU></AU></EXPR>",
        ] {
            let once = merge_tags(&parse_seeml(text).unwrap());
            assert_eq!(merge_tags(&once), once);
        }
    }
}
