//! Shared generators and brute-force oracles for the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use byrne::seeml::{Element, Node, SeemlDocument, Tag};
use rand::seq::SliceRandom;
use rand::Rng;

pub const STYLE: &str = "\
[expressions]
smile = AU6:0.6 AU12:0.9
sadness = AU1:0.7 AU15:0.6
anger = AU4:0.8 AU23:0.7
fear = AU1:0.6 AU5:0.8
disgust = AU9:0.8 AU10:0.5
surprise = AU1:0.8 AU2:0.8
[aural]
hiccup = sounds/hiccup.wav
[speech]
words_per_minute = 180
";

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

const WORDS: [&str; 10] = [
    "goal", "pass", "Kirk", "ball", "what", "a", "save", "fine", "move", "it's",
];

fn random_element<R: Rng>(rng: &mut R, depth: u32) -> Element {
    let signed = |rng: &mut R, unit: &str| {
        let n: i32 = rng.gen_range(1..=20);
        let sign = if rng.gen_bool(0.5) { '+' } else { '-' };
        format!("{sign}{n}{unit}")
    };
    let pick = rng.gen_range(0..12);
    let mut e = match pick {
        0 => Element::new(Tag::Su),
        1 => Element::new(Tag::Seg),
        2 => Element::new(Tag::Np),
        3 => Element::new(Tag::W).attr("POS", *["NN", "VB"].choose(rng).unwrap()),
        4 => Element::new(Tag::Rate).attr("SPEED", signed(rng, "%")),
        5 => Element::new(Tag::Pitch).attr("BASE", signed(rng, "")),
        6 => Element::new(Tag::Emph),
        7 => Element::new(Tag::Expr)
            .attr("NAME", *["smile", "disgust"].choose(rng).unwrap())
            .attr("LEVEL", *["0.5", "1"].choose(rng).unwrap()),
        8 => Element::new(Tag::Au).attr("NUM", *["4", "9"].choose(rng).unwrap()),
        9 => Element::new(Tag::Volume).attr("LEVEL", signed(rng, "%")),
        10 => return Element::new(Tag::Break),
        _ => return Element::new(Tag::Event).attr("NAME", "hiccup"),
    };
    e.children = random_nodes(rng, depth + 1);
    e
}

fn random_nodes<R: Rng>(rng: &mut R, depth: u32) -> Vec<Node> {
    let n = if depth >= 5 { 1 } else { rng.gen_range(1..=3) };
    (0..n)
        .map(|_| {
            if depth >= 5 || rng.gen_bool(0.4) {
                let word = WORDS.choose(rng).unwrap();
                Node::Text(format!("{word} "))
            } else {
                Node::Element(random_element(rng, depth))
            }
        })
        .collect()
}

/// A random well-formed document over every tag category, biased towards
/// nesting identical prosody and facial tags.
pub fn random_document<R: Rng>(rng: &mut R) -> SeemlDocument {
    SeemlDocument::new(random_nodes(rng, 0))
}

/// A signed number with a unit, as an f64 and its unit.
pub fn signed_value(v: &str) -> Option<(f64, String)> {
    let first = v.chars().next()?;
    if first != '+' && first != '-' {
        return None;
    }
    let num_len = v[1..]
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .map_or(v.len(), |i| i + 1);
    let n: f64 = v[..num_len].parse().ok()?;
    let unit = &v[num_len..];
    unit.chars()
        .all(|c| c.is_ascii_alphabetic() || c == '%')
        .then(|| (n, unit.to_string()))
}

pub fn mergeable(tag: Tag) -> bool {
    matches!(
        tag,
        Tag::Rate | Tag::Pitch | Tag::Volume | Tag::Emph | Tag::Expr | Tag::Au | Tag::Affect
    )
}

/// Identity key for the combination rules: tag, fixed attributes, and the
/// names and units of signed ones.
pub fn key(e: &Element) -> String {
    let mut k = e.tag.name().to_string();
    for (name, v) in &e.attrs {
        match signed_value(v) {
            Some((_, unit)) => k.push_str(&format!(" {name}=Δ{unit}")),
            None => k.push_str(&format!(" {name}={v}")),
        }
    }
    k
}

/// One entry per character of text: the chain of enclosing elements, outermost first.
pub fn char_paths(doc: &SeemlDocument) -> Vec<(char, Vec<Element>)> {
    fn walk(nodes: &[Node], path: &mut Vec<Element>, out: &mut Vec<(char, Vec<Element>)>) {
        for n in nodes {
            match n {
                Node::Text(t) => out.extend(t.chars().map(|c| (c, path.clone()))),
                Node::Element(e) => {
                    path.push(Element {
                        children: vec![],
                        ..e.clone()
                    });
                    walk(&e.children, path, out);
                    path.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(&doc.nodes, &mut Vec::new(), &mut out);
    out
}

/// What the combination rules must preserve at a text position: which
/// mergeable identities cover it, the summed value of each signed
/// attribute, and the chain of structural tags.
#[derive(Debug, PartialEq)]
pub struct Effect {
    pub covering: Vec<String>,
    pub sums: BTreeMap<(String, String), i64>,
    pub structure: Vec<String>,
}

pub fn effect(path: &[Element]) -> Effect {
    let mut covering: Vec<String> = Vec::new();
    let mut sums = BTreeMap::new();
    let mut structure = Vec::new();
    for e in path {
        if !mergeable(e.tag) {
            structure.push(format!("{:?}", e));
            continue;
        }
        let k = key(e);
        if !covering.contains(&k) {
            covering.push(k.clone());
        }
        for (name, v) in &e.attrs {
            if let Some((n, _)) = signed_value(v) {
                *sums.entry((k.clone(), name.clone())).or_insert(0) += (n * 1e6).round() as i64;
            }
        }
    }
    covering.sort();
    Effect {
        covering,
        sums,
        structure,
    }
}

/// Quadratic scan: for every element, compare against every ancestor.
/// Returns the first element with an identical mergeable ancestor.
pub fn redundant_nesting(doc: &SeemlDocument) -> Option<String> {
    fn walk(nodes: &[Node], ancestors: &mut Vec<String>) -> Option<String> {
        for n in nodes {
            if let Node::Element(e) = n {
                let k = mergeable(e.tag).then(|| key(e));
                if let Some(k) = &k {
                    if ancestors.iter().any(|a| a == k) {
                        return Some(k.clone());
                    }
                    ancestors.push(k.clone());
                }
                let found = walk(&e.children, ancestors);
                if k.is_some() {
                    ancestors.pop();
                }
                if found.is_some() {
                    return found;
                }
            }
        }
        None
    }
    walk(&doc.nodes, &mut Vec::new())
}

/// Empty elements in document order.
pub fn empty_elements(doc: &SeemlDocument) -> Vec<String> {
    doc.elements()
        .into_iter()
        .filter(|e| e.tag.is_empty_element())
        .map(|e| format!("{e:?}"))
        .collect()
}

/// Checks one merge against the oracle, describing the first violation.
pub fn check_merge(doc: &SeemlDocument, merged: &SeemlDocument) -> Result<(), String> {
    if merged.text() != doc.text() {
        return Err("text changed".into());
    }
    if let Some(k) = redundant_nesting(merged) {
        return Err(format!("{k} still nested in itself"));
    }
    let before = char_paths(doc);
    let after = char_paths(merged);
    for (i, ((c, p), (_, q))) in before.iter().zip(&after).enumerate() {
        let (a, b) = (effect(p), effect(q));
        if a != b {
            return Err(format!(
                "effect at char {i} ({c:?}) changed: {a:?} vs {b:?}"
            ));
        }
    }
    if empty_elements(doc) != empty_elements(merged) {
        return Err("empty elements changed".into());
    }
    Ok(())
}
