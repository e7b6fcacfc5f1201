use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use super::{normalize, Element, Node, SeemlDocument, Tag, ValidationError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unknown tag <{tag}> at byte {offset}")]
    UnknownTag { tag: String, offset: usize },
    #[error("closing </{found}> at byte {offset} does not match open <{expected}>")]
    Mismatched {
        expected: String,
        found: String,
        offset: usize,
    },
    #[error("closing </{found}> at byte {offset} has no open element")]
    UnexpectedClose { found: String, offset: usize },
    #[error("<{tag}> is never closed")]
    Unclosed { tag: String },
    #[error("malformed markup at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Parses SGML-style SEEML. Tag names are case-insensitive; elements that
/// never enclose text (`BREAK`, `AUDIO`, `EVENT`) may be written without a
/// closing tag.
pub fn parse_seeml(text: &str) -> Result<SeemlDocument, ParseError> {
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Vec<Node> = Vec::new();
    let mut pos = 0;
    let bytes = text.as_bytes();

    fn push(stack: &mut [Element], root: &mut Vec<Node>, node: Node) {
        match stack.last_mut() {
            Some(open) => open.children.push(node),
            None => root.push(node),
        }
    }

    while pos < text.len() {
        let Some(rel) = text[pos..].find('<') else {
            push(
                &mut stack,
                &mut root,
                Node::Text(unescape(&text[pos..], pos)?),
            );
            break;
        };
        if rel > 0 {
            push(
                &mut stack,
                &mut root,
                Node::Text(unescape(&text[pos..pos + rel], pos)?),
            );
        }
        let start = pos + rel;
        let rest = &text[start..];
        if rest.starts_with("<!--") {
            let end = rest.find("-->").ok_or_else(|| ParseError::Malformed {
                offset: start,
                message: "unterminated comment".into(),
            })?;
            pos = start + end + 3;
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            let end = rest.find('>').ok_or_else(|| ParseError::Malformed {
                offset: start,
                message: "unterminated declaration".into(),
            })?;
            pos = start + end + 1;
            continue;
        }
        let end = find_tag_end(bytes, start).ok_or_else(|| ParseError::Malformed {
            offset: start,
            message: "unterminated tag".into(),
        })?;
        let inner = &text[start + 1..end];
        pos = end + 1;

        if let Some(name) = inner.strip_prefix('/') {
            let name = name.trim();
            let tag = Tag::from_name(name).ok_or_else(|| ParseError::UnknownTag {
                tag: name.to_string(),
                offset: start,
            })?;
            if tag.is_empty_element() && stack.last().map(|o| o.tag) != Some(tag) {
                // SGML-style `</BREAK>` after an auto-closed `<BREAK>`.
                continue;
            }
            let open = stack.pop().ok_or_else(|| ParseError::UnexpectedClose {
                found: name.to_string(),
                offset: start,
            })?;
            if open.tag != tag {
                return Err(ParseError::Mismatched {
                    expected: open.tag.name().to_string(),
                    found: name.to_string(),
                    offset: start,
                });
            }
            push(&mut stack, &mut root, Node::Element(open));
            continue;
        }

        let (inner, self_closing) = match inner.strip_suffix('/') {
            Some(body) => (body, true),
            None => (inner, false),
        };
        let element = parse_open_tag(inner, start)?;
        if self_closing || element.tag.is_empty_element() {
            push(&mut stack, &mut root, Node::Element(element));
        } else {
            stack.push(element);
        }
    }

    if let Some(open) = stack.pop() {
        return Err(ParseError::Unclosed {
            tag: open.tag.name().to_string(),
        });
    }
    let doc = SeemlDocument {
        nodes: normalize(root),
    };
    doc.validate()?;
    Ok(doc)
}

fn find_tag_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut quote: Option<u8> = None;
    for (i, &b) in bytes.iter().enumerate().skip(start + 1) {
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return Some(i),
            None if b == b'<' => return None,
            None => {}
        }
    }
    None
}

fn parse_open_tag(inner: &str, offset: usize) -> Result<Element, ParseError> {
    let malformed = |message: String| ParseError::Malformed { offset, message };
    let inner = inner.trim();
    let name_end = inner
        .find(|c: char| c.is_whitespace())
        .unwrap_or(inner.len());
    let name = &inner[..name_end];
    if name.is_empty() {
        return Err(malformed("empty tag name".into()));
    }
    let tag = Tag::from_name(name).ok_or_else(|| ParseError::UnknownTag {
        tag: name.to_string(),
        offset,
    })?;
    let mut attrs = BTreeMap::new();
    let mut rest = inner[name_end..].trim_start();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| malformed(format!("attribute without value in <{name}>")))?;
        let key = rest[..eq].trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(malformed(format!("bad attribute name {key:?}")));
        }
        let after = rest[eq + 1..].trim_start();
        let (raw, remaining) = match after.chars().next() {
            Some(q @ ('"' | '\'')) => {
                let close = after[1..]
                    .find(q)
                    .ok_or_else(|| malformed("unterminated attribute value".into()))?;
                (&after[1..1 + close], &after[close + 2..])
            }
            Some(_) => {
                let end = after.find(char::is_whitespace).unwrap_or(after.len());
                (&after[..end], &after[end..])
            }
            None => return Err(malformed(format!("missing value for {key}"))),
        };
        let canonical = tag.canonical_attr(key);
        if attrs
            .insert(canonical.clone(), unescape(raw, offset)?)
            .is_some()
        {
            return Err(malformed(format!("duplicate attribute {canonical}")));
        }
        rest = remaining.trim_start();
    }
    Ok(Element {
        tag,
        attrs,
        children: Vec::new(),
    })
}

fn unescape(s: &str, offset: usize) -> Result<String, ParseError> {
    if !s.contains('&') {
        return Ok(s.to_string());
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let semi = tail.find(';').ok_or_else(|| ParseError::Malformed {
            offset,
            message: "unterminated entity".into(),
        })?;
        let entity = &tail[1..semi];
        let ch = match entity {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            _ => entity
                .strip_prefix('#')
                .and_then(|n| match n.strip_prefix(['x', 'X']) {
                    Some(hex) => u32::from_str_radix(hex, 16).ok(),
                    None => n.parse().ok(),
                })
                .and_then(char::from_u32)
                .ok_or_else(|| ParseError::Malformed {
                    offset,
                    message: format!("unknown entity &{entity};"),
                })?,
        };
        out.push(ch);
        rest = &tail[semi + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("&quot;"),
            c => escape_text(c.encode_utf8(&mut [0; 4]), out),
        }
    }
}

/// Canonical form: canonical tag and attribute case, attributes sorted and
/// double-quoted, childless elements written as `<TAG …/>`.
pub fn serialize_seeml(doc: &SeemlDocument) -> String {
    let mut out = String::new();
    write_nodes(&doc.nodes, &mut out);
    out
}

fn write_nodes(nodes: &[Node], out: &mut String) {
    for node in nodes {
        match node {
            Node::Text(t) => escape_text(t, out),
            Node::Element(e) => {
                let _ = write!(out, "<{}", e.tag.name());
                for (k, v) in &e.attrs {
                    let _ = write!(out, " {k}=\"");
                    escape_attr(v, out);
                    out.push('"');
                }
                if e.children.is_empty() {
                    out.push_str("/>");
                } else {
                    out.push('>');
                    write_nodes(&e.children, out);
                    let _ = write!(out, "</{}>", e.tag.name());
                }
            }
        }
    }
}
