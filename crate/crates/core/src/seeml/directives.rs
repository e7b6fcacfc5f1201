//! Leaf-level markup instructions and their application to a document.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{parse_au, Category, Element, Expression, Node, SeemlDocument, Tag};
use crate::sexpr::format_number;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DirectiveError {
    #[error("unknown facial expression {0:?}")]
    UnknownExpression(String),
    #[error("action unit {0} is outside 1–46")]
    InvalidAu(u32),
    #[error("intensity {0} is outside 0–1")]
    InvalidLevel(String),
    #[error("lexical trigger word is empty")]
    EmptyTrigger,
    #[error("<{0}> is not a speech tag")]
    NotSpeechTag(Tag),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DirectiveKind {
    FacialExpression {
        name: String,
        level: f64,
    },
    ActionUnit {
        au: u32,
        level: f64,
    },
    AuralEvent {
        name: String,
    },
    SpeechTag {
        tag: Tag,
        attrs: BTreeMap<String, String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointPosition {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Utterance,
    EveryPhrase,
    /// Whole-word, case-insensitive.
    LexicalTrigger(String),
    Point(PointPosition),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Utterance => f.write_str("utterance"),
            Scope::EveryPhrase => f.write_str("every-phrase"),
            Scope::LexicalTrigger(w) => write!(f, "(word {w})"),
            Scope::Point(PointPosition::Start) => f.write_str("start"),
            Scope::Point(PointPosition::End) => f.write_str("end"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkupDirective {
    pub kind: DirectiveKind,
    pub scope: Scope,
}

impl MarkupDirective {
    pub fn new(kind: DirectiveKind, scope: Scope) -> Self {
        MarkupDirective { kind, scope }
    }

    pub fn validate(&self) -> Result<(), DirectiveError> {
        let check_level = |level: f64| {
            if (0.0..=1.0).contains(&level) {
                Ok(())
            } else {
                Err(DirectiveError::InvalidLevel(format_number(level)))
            }
        };
        match &self.kind {
            DirectiveKind::FacialExpression { name, level } => {
                name.parse::<Expression>()
                    .map_err(DirectiveError::UnknownExpression)?;
                check_level(*level)?;
            }
            DirectiveKind::ActionUnit { au, level } => {
                parse_au(&au.to_string()).ok_or(DirectiveError::InvalidAu(*au))?;
                check_level(*level)?;
            }
            DirectiveKind::AuralEvent { .. } => {}
            DirectiveKind::SpeechTag { tag, .. } => {
                if !matches!(tag.category(), Category::Sable | Category::Affect)
                    || *tag == Tag::Sable
                {
                    return Err(DirectiveError::NotSpeechTag(*tag));
                }
            }
        }
        if let Scope::LexicalTrigger(w) = &self.scope {
            if w.trim().is_empty() {
                return Err(DirectiveError::EmptyTrigger);
            }
        }
        Ok(())
    }

    /// The (childless) element this directive inserts.
    pub fn element(&self) -> Element {
        match &self.kind {
            DirectiveKind::FacialExpression { name, level } => Element::new(Tag::Expr)
                .attr("NAME", name.to_ascii_lowercase())
                .attr("LEVEL", format_number(*level)),
            DirectiveKind::ActionUnit { au, level } => Element::new(Tag::Au)
                .attr("NUM", au.to_string())
                .attr("LEVEL", format_number(*level)),
            DirectiveKind::AuralEvent { name } => {
                Element::new(Tag::Event).attr("NAME", name.clone())
            }
            DirectiveKind::SpeechTag { tag, attrs } => attrs
                .iter()
                .fold(Element::new(*tag), |e, (k, v)| e.attr(k, v.clone())),
        }
    }
}

/// Adds each directive's markup to `doc`, in order.
pub fn apply_directives(
    doc: &SeemlDocument,
    directives: &[MarkupDirective],
) -> Result<SeemlDocument, DirectiveError> {
    let mut nodes = doc.nodes.clone();
    for directive in directives {
        directive.validate()?;
        let element = directive.element();
        let wraps = !element.tag.is_empty_element();
        nodes = match (&directive.scope, wraps) {
            (Scope::Utterance, true) => vec![Node::Element(Element {
                children: nodes,
                ..element
            })],
            (Scope::Utterance, false) | (Scope::Point(PointPosition::Start), _) => {
                let mut v = vec![Node::Element(element)];
                v.extend(nodes);
                v
            }
            (Scope::Point(PointPosition::End), _) => {
                nodes.push(Node::Element(element));
                nodes
            }
            (Scope::EveryPhrase, _) => each_phrase(nodes, &element, wraps),
            (Scope::LexicalTrigger(word), _) => each_word(nodes, &element, word, wraps),
        };
    }
    Ok(SeemlDocument::new(nodes))
}

fn each_phrase(nodes: Vec<Node>, element: &Element, wraps: bool) -> Vec<Node> {
    nodes
        .into_iter()
        .map(|node| match node {
            Node::Element(mut e) => {
                let children = each_phrase(std::mem::take(&mut e.children), element, wraps);
                e.children = if e.tag != Tag::Seg {
                    children
                } else if wraps {
                    vec![Node::Element(Element {
                        children,
                        ..element.clone()
                    })]
                } else {
                    let mut v = vec![Node::Element(element.clone())];
                    v.extend(children);
                    v
                };
                Node::Element(e)
            }
            text => text,
        })
        .collect()
}

fn each_word(nodes: Vec<Node>, element: &Element, word: &str, wraps: bool) -> Vec<Node> {
    let mut out = Vec::with_capacity(nodes.len());
    for node in nodes {
        match node {
            Node::Element(mut e) => {
                e.children = each_word(std::mem::take(&mut e.children), element, word, wraps);
                out.push(Node::Element(e));
            }
            Node::Text(text) => {
                let mut last = 0;
                let wanted = word.trim().to_lowercase();
                for (start, end) in word_spans(&text) {
                    if text[start..end].to_lowercase() != wanted {
                        continue;
                    }
                    out.push(Node::Text(text[last..start].to_string()));
                    if wraps {
                        out.push(Node::Element(Element {
                            children: vec![Node::Text(text[start..end].to_string())],
                            ..element.clone()
                        }));
                    } else {
                        out.push(Node::Element(element.clone()));
                        out.push(Node::Text(text[start..end].to_string()));
                    }
                    last = end;
                }
                out.push(Node::Text(text[last..].to_string()));
            }
        }
    }
    out
}

/// Byte ranges of maximal alphanumeric runs.
fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}
