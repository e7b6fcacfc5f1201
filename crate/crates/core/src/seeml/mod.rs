//! SEEML: a small superset of GDA (linguistic structure), SABLE (speech)
//! and FACS-as-markup (facial action units and expressions).
//!
//! Documents are parsed into a tag tree, decorated with emotionally
//! motivated markup, merged under the combination rules, and finally split
//! into a SABLE speech script and a timed facial-animation timeline.

mod directives;
mod lipsync;
mod merge;
mod parse;
mod style;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use directives::{
    apply_directives, DirectiveError, DirectiveKind, MarkupDirective, PointPosition, Scope,
};
pub use lipsync::{letter_classes, lip_sync, LetterClass, TimedWord};
pub use merge::{identity_of, is_mergeable, merge_tags, parse_delta, MergeIdentity};
pub use parse::{parse_seeml, serialize_seeml, ParseError};
pub use style::{load_style, SpeechParams, StyleError, StyleFile};
pub use verify::{
    parse_timeline, verify_and_split, write_timeline, FacsEvent, OutputBundle, TimelineEvent,
    VerifyError, VisemeEvent, TIMELINE_HEADER,
};

/// Highest FACS action unit number.
pub const MAX_AU: u32 = 46;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    /// GDA phrase structure and part of speech.
    Gda,
    /// SABLE speech control, including the document root.
    Sable,
    Expression,
    ActionUnit,
    Aural,
    /// Supplementary affect tag passed through to the synthesizer.
    Affect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    Su,
    Seg,
    Np,
    Vp,
    W,
    Sable,
    Rate,
    Pitch,
    Volume,
    Emph,
    Break,
    Audio,
    Expr,
    Au,
    Event,
    Affect,
}

impl Tag {
    pub const ALL: [Tag; 16] = [
        Tag::Su,
        Tag::Seg,
        Tag::Np,
        Tag::Vp,
        Tag::W,
        Tag::Sable,
        Tag::Rate,
        Tag::Pitch,
        Tag::Volume,
        Tag::Emph,
        Tag::Break,
        Tag::Audio,
        Tag::Expr,
        Tag::Au,
        Tag::Event,
        Tag::Affect,
    ];

    /// Canonical spelling: lower-case GDA, upper-case everything else.
    pub fn name(self) -> &'static str {
        match self {
            Tag::Su => "su",
            Tag::Seg => "seg",
            Tag::Np => "np",
            Tag::Vp => "vp",
            Tag::W => "w",
            Tag::Sable => "SABLE",
            Tag::Rate => "RATE",
            Tag::Pitch => "PITCH",
            Tag::Volume => "VOLUME",
            Tag::Emph => "EMPH",
            Tag::Break => "BREAK",
            Tag::Audio => "AUDIO",
            Tag::Expr => "EXPR",
            Tag::Au => "AU",
            Tag::Event => "EVENT",
            Tag::Affect => "AFFECT",
        }
    }

    pub fn category(self) -> Category {
        match self {
            Tag::Su | Tag::Seg | Tag::Np | Tag::Vp | Tag::W => Category::Gda,
            Tag::Sable
            | Tag::Rate
            | Tag::Pitch
            | Tag::Volume
            | Tag::Emph
            | Tag::Break
            | Tag::Audio => Category::Sable,
            Tag::Expr => Category::Expression,
            Tag::Au => Category::ActionUnit,
            Tag::Event => Category::Aural,
            Tag::Affect => Category::Affect,
        }
    }

    /// Elements that never enclose text.
    pub fn is_empty_element(self) -> bool {
        matches!(self, Tag::Break | Tag::Audio | Tag::Event)
    }

    pub fn is_facial(self) -> bool {
        matches!(self.category(), Category::Expression | Category::ActionUnit)
    }

    /// Canonical attribute-name case for this tag.
    pub fn canonical_attr(self, name: &str) -> String {
        if self.category() == Category::Gda {
            name.to_ascii_lowercase()
        } else {
            name.to_ascii_uppercase()
        }
    }

    pub fn from_name(name: &str) -> Option<Tag> {
        Tag::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The six facial expressions, one per basic emotion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expression {
    Smile,
    Sadness,
    Anger,
    Fear,
    Disgust,
    Surprise,
}

impl Expression {
    pub const ALL: [Expression; 6] = [
        Expression::Smile,
        Expression::Sadness,
        Expression::Anger,
        Expression::Fear,
        Expression::Disgust,
        Expression::Surprise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Expression::Smile => "smile",
            Expression::Sadness => "sadness",
            Expression::Anger => "anger",
            Expression::Fear => "fear",
            Expression::Disgust => "disgust",
            Expression::Surprise => "surprise",
        }
    }
}

impl FromStr for Expression {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| s.to_string())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("<{0}> is an empty element and cannot enclose content")]
    EmptyWithChildren(Tag),
    #[error("<{tag}> requires the {attr} attribute")]
    MissingAttr { tag: Tag, attr: &'static str },
    #[error("unknown facial expression {0:?}")]
    UnknownExpression(String),
    #[error("action unit {0:?} is outside 1–46")]
    InvalidAu(String),
    #[error("<{tag}> attribute {attr}={value:?} is not a number")]
    NotNumeric {
        tag: Tag,
        attr: &'static str,
        value: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub tag: Tag,
    /// Attribute names in the tag's canonical case.
    pub attrs: BTreeMap<String, String>,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Text(String),
    Element(Element),
}

impl Element {
    pub fn new(tag: Tag) -> Self {
        Element {
            tag,
            attrs: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(mut self, name: &str, value: impl Into<String>) -> Self {
        self.attrs
            .insert(self.tag.canonical_attr(name), value.into());
        self
    }

    pub fn child(mut self, node: Node) -> Self {
        self.children.push(node);
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.attrs
            .get(&self.tag.canonical_attr(name))
            .map(String::as_str)
    }

    /// Numeric value of `LEVEL`, accepting a leading sign; defaults to 1.
    pub fn level(&self) -> f64 {
        self.get("LEVEL")
            .and_then(|v| v.trim_start_matches('+').parse().ok())
            .unwrap_or(1.0)
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        collect_text(&self.children, &mut out);
        out
    }

    fn validate(&self) -> Result<(), ValidationError> {
        if self.tag.is_empty_element() && !self.children.is_empty() {
            return Err(ValidationError::EmptyWithChildren(self.tag));
        }
        match self.tag {
            Tag::Expr => {
                let name = self.get("NAME").ok_or(ValidationError::MissingAttr {
                    tag: Tag::Expr,
                    attr: "NAME",
                })?;
                name.parse::<Expression>()
                    .map_err(ValidationError::UnknownExpression)?;
                self.check_level()?;
            }
            Tag::Au => {
                let num = self.get("NUM").ok_or(ValidationError::MissingAttr {
                    tag: Tag::Au,
                    attr: "NUM",
                })?;
                parse_au(num).ok_or_else(|| ValidationError::InvalidAu(num.to_string()))?;
                self.check_level()?;
            }
            Tag::Event => {
                self.get("NAME").ok_or(ValidationError::MissingAttr {
                    tag: Tag::Event,
                    attr: "NAME",
                })?;
            }
            _ => {}
        }
        self.children.iter().try_for_each(Node::validate)
    }

    fn check_level(&self) -> Result<(), ValidationError> {
        match self.get("LEVEL") {
            Some(v) if v.trim_start_matches('+').parse::<f64>().is_err() => {
                Err(ValidationError::NotNumeric {
                    tag: self.tag,
                    attr: "LEVEL",
                    value: v.to_string(),
                })
            }
            _ => Ok(()),
        }
    }
}

/// Parses an action-unit number in 1–46.
pub fn parse_au(text: &str) -> Option<u32> {
    text.trim()
        .parse::<u32>()
        .ok()
        .filter(|n| (1..=MAX_AU).contains(n))
}

impl Node {
    pub fn text(s: impl Into<String>) -> Node {
        Node::Text(s.into())
    }

    fn validate(&self) -> Result<(), ValidationError> {
        match self {
            Node::Text(_) => Ok(()),
            Node::Element(e) => e.validate(),
        }
    }
}

impl From<Element> for Node {
    fn from(e: Element) -> Self {
        Node::Element(e)
    }
}

fn collect_text(nodes: &[Node], out: &mut String) {
    for node in nodes {
        match node {
            Node::Text(t) => out.push_str(t),
            Node::Element(e) => collect_text(&e.children, out),
        }
    }
}

/// A SEEML forest. Constructors keep it normalized: no empty text nodes
/// and no two adjacent text nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeemlDocument {
    pub nodes: Vec<Node>,
}

impl SeemlDocument {
    pub fn new(nodes: Vec<Node>) -> Self {
        SeemlDocument {
            nodes: normalize(nodes),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Text with all markup stripped.
    pub fn text(&self) -> String {
        let mut out = String::new();
        collect_text(&self.nodes, &mut out);
        out
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.nodes.iter().try_for_each(Node::validate)
    }

    /// Depth-first, pre-order visit of every element.
    pub fn elements(&self) -> Vec<&Element> {
        fn walk<'a>(nodes: &'a [Node], out: &mut Vec<&'a Element>) {
            for n in nodes {
                if let Node::Element(e) = n {
                    out.push(e);
                    walk(&e.children, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, &mut out);
        out
    }
}

impl fmt::Display for SeemlDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_seeml(self))
    }
}

pub(crate) fn normalize(nodes: Vec<Node>) -> Vec<Node> {
    let mut out: Vec<Node> = Vec::with_capacity(nodes.len());
    for node in nodes {
        match node {
            Node::Text(t) if t.is_empty() => {}
            Node::Text(t) => match out.last_mut() {
                Some(Node::Text(prev)) => prev.push_str(&t),
                _ => out.push(Node::Text(t)),
            },
            Node::Element(mut e) => {
                e.children = normalize(e.children);
                out.push(Node::Element(e));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_lookup_is_case_insensitive() {
        assert_eq!(Tag::from_name("expr"), Some(Tag::Expr));
        assert_eq!(Tag::from_name("SEG"), Some(Tag::Seg));
        assert_eq!(Tag::from_name("blink"), None);
    }

    #[test]
    fn normalization_merges_text() {
        let doc = SeemlDocument::new(vec![
            Node::text("a"),
            Node::text(""),
            Node::text("b"),
            Element::new(Tag::Seg).child(Node::text("")).into(),
        ]);
        assert_eq!(doc.nodes.len(), 2);
        assert_eq!(doc.nodes[0], Node::text("ab"));
        assert_eq!(doc.nodes[1], Element::new(Tag::Seg).into());
    }

    #[test]
    fn validation_catches_bad_elements() {
        let bad_au = SeemlDocument::new(vec![Element::new(Tag::Au).attr("NUM", "47").into()]);
        assert!(matches!(
            bad_au.validate(),
            Err(ValidationError::InvalidAu(_))
        ));
        let bad_expr =
            SeemlDocument::new(vec![Element::new(Tag::Expr).attr("NAME", "smirk").into()]);
        assert!(matches!(
            bad_expr.validate(),
            Err(ValidationError::UnknownExpression(_))
        ));
        let full_break =
            SeemlDocument::new(vec![Element::new(Tag::Break).child(Node::text("x")).into()]);
        assert!(full_break.validate().is_err());
        assert_eq!(parse_au("46"), Some(46));
        assert_eq!(parse_au("0"), None);
    }
}
