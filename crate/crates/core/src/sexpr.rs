//! S-expression reader shared by game logs, character profiles and rule
//! patterns, plus the term and fact model built on top of it.
//!
//! Facts use keyword arguments, mirroring the notation of analysed game
//! transcripts: `(pass from: a1 to: a2 fromloc: (30 10) toloc: (20 10))`.
//! A list whose head is a plain symbol followed by `key: value` pairs reads
//! as a [`Fact`]; any other list (coordinates, for instance) reads as a
//! plain [`Term::List`].

use std::fmt;

use ordered_float::OrderedFloat;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadError {
    #[error("line {line}: unexpected ')'")]
    UnexpectedClose { line: usize },
    #[error("line {line}: unclosed '('")]
    Unclosed { line: usize },
    #[error("line {line}: unterminated string")]
    UnterminatedString { line: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl ReadError {
    pub fn line(&self) -> usize {
        match self {
            ReadError::UnexpectedClose { line }
            | ReadError::Unclosed { line }
            | ReadError::UnterminatedString { line }
            | ReadError::Malformed { line, .. } => *line,
        }
    }

    pub(crate) fn malformed(line: usize, message: impl Into<String>) -> Self {
        ReadError::Malformed {
            line,
            message: message.into(),
        }
    }
}

/// A raw s-expression with the 1-based line it started on.
#[derive(Debug, Clone, PartialEq)]
pub struct Sexp {
    pub line: usize,
    pub node: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Atom(String),
    Number(f64),
    Str(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn as_atom(&self) -> Option<&str> {
        match &self.node {
            Node::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match &self.node {
            Node::List(items) => Some(items),
            _ => None,
        }
    }

    /// `from:` → `Some("from")`.
    pub fn as_keyword(&self) -> Option<&str> {
        self.as_atom()
            .and_then(|a| a.strip_suffix(':'))
            .filter(|k| !k.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
    Str(String),
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ReadError> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                tokens.push((Token::Open, line));
                chars.next();
            }
            ')' => {
                tokens.push((Token::Close, line));
                chars.next();
            }
            ';' | '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '"' => {
                let start = line;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(ReadError::UnterminatedString { line: start }),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(other) => s.push(other),
                            None => return Err(ReadError::UnterminatedString { line: start }),
                        },
                        Some(ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                        }
                    }
                }
                tokens.push((Token::Str(s), start));
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == '"' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                tokens.push((Token::Atom(atom), line));
            }
        }
    }
    Ok(tokens)
}

fn looks_numeric(atom: &str) -> bool {
    let body = atom.strip_prefix(['+', '-']).unwrap_or(atom);
    let mut seen_digit = false;
    let mut seen_dot = false;
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '0'..='9' => seen_digit = true,
            '.' if !seen_dot => seen_dot = true,
            'e' | 'E' if seen_digit => {
                let rest: String = chars.collect();
                let rest = rest.strip_prefix(['+', '-']).unwrap_or(&rest);
                return !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit());
            }
            _ => return false,
        }
    }
    seen_digit
}

/// Reads every top-level form in `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, ReadError> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<(usize, Vec<Sexp>)> = Vec::new();
    let mut top = Vec::new();
    for (token, line) in tokens {
        let finished = match token {
            Token::Open => {
                stack.push((line, Vec::new()));
                continue;
            }
            Token::Close => {
                let (start, items) = stack.pop().ok_or(ReadError::UnexpectedClose { line })?;
                Sexp {
                    line: start,
                    node: Node::List(items),
                }
            }
            Token::Str(s) => Sexp {
                line,
                node: Node::Str(s),
            },
            Token::Atom(a) => {
                let node = if looks_numeric(&a) {
                    a.parse::<f64>()
                        .map(Node::Number)
                        .map_err(|e| ReadError::malformed(line, format!("bad number {a:?}: {e}")))?
                } else {
                    Node::Atom(a)
                };
                Sexp { line, node }
            }
        };
        match stack.last_mut() {
            Some((_, items)) => items.push(finished),
            None => top.push(finished),
        }
    }
    if let Some((line, _)) = stack.pop() {
        return Err(ReadError::Unclosed { line });
    }
    Ok(top)
}

/// Reads exactly one form.
pub fn read_one(text: &str) -> Result<Sexp, ReadError> {
    let mut forms = read_all(text)?;
    match forms.len() {
        1 => Ok(forms.remove(0)),
        0 => Err(ReadError::malformed(1, "expected one form, found none")),
        _ => Err(ReadError::malformed(
            forms[1].line,
            "expected one form, found several",
        )),
    }
}

/// A ground or pattern term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Symbol(String),
    Number(OrderedFloat<f64>),
    Str(String),
    /// `?name`, stored without the question mark.
    Variable(String),
    List(Vec<Term>),
    Fact(Box<Fact>),
}

/// `(predicate key: value …)`. Argument order is kept as written.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub predicate: String,
    pub args: Vec<(String, Term)>,
}

impl Term {
    pub fn symbol(s: impl Into<String>) -> Self {
        Term::Symbol(s.into())
    }

    pub fn number(n: f64) -> Self {
        Term::Number(OrderedFloat(n))
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Term::Number(n) => Some(n.0),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Term::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Variable(_) => false,
            Term::List(items) => items.iter().all(Term::is_ground),
            Term::Fact(f) => f.is_ground(),
            _ => true,
        }
    }

    pub fn collect_variables(&self, out: &mut Vec<String>) {
        match self {
            Term::Variable(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::List(items) => items.iter().for_each(|t| t.collect_variables(out)),
            Term::Fact(f) => f.collect_variables(out),
            _ => {}
        }
    }

    pub fn from_sexp(sexp: &Sexp) -> Result<Term, ReadError> {
        match &sexp.node {
            Node::Number(n) => Ok(Term::number(*n)),
            Node::Str(s) => Ok(Term::Str(s.clone())),
            Node::Atom(a) => match a.strip_prefix('?') {
                Some("") => Err(ReadError::malformed(sexp.line, "empty variable name")),
                Some(v) => Ok(Term::Variable(v.to_string())),
                None if a.ends_with(':') => Err(ReadError::malformed(
                    sexp.line,
                    format!("keyword {a} where a value was expected"),
                )),
                None => Ok(Term::Symbol(a.clone())),
            },
            Node::List(items) => {
                let head_is_predicate = items
                    .first()
                    .and_then(Sexp::as_atom)
                    .is_some_and(|a| !a.ends_with(':') && !a.starts_with('?'));
                if head_is_predicate {
                    Ok(Term::Fact(Box::new(Fact::from_sexp(sexp)?)))
                } else {
                    items
                        .iter()
                        .map(Term::from_sexp)
                        .collect::<Result<_, _>>()
                        .map(Term::List)
                }
            }
        }
    }
}

impl Fact {
    pub fn new(predicate: impl Into<String>) -> Self {
        Fact {
            predicate: predicate.into(),
            args: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: Term) -> Self {
        self.args.push((key.into(), value));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Term> {
        self.args.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|(_, v)| v.is_ground())
    }

    pub fn collect_variables(&self, out: &mut Vec<String>) {
        self.args.iter().for_each(|(_, v)| v.collect_variables(out));
    }

    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_variables(&mut out);
        out
    }

    /// Removes and returns the argument named `key`.
    pub fn take(&mut self, key: &str) -> Option<Term> {
        let idx = self.args.iter().position(|(k, _)| k == key)?;
        Some(self.args.remove(idx).1)
    }

    pub fn from_sexp(sexp: &Sexp) -> Result<Fact, ReadError> {
        let items = sexp
            .as_list()
            .ok_or_else(|| ReadError::malformed(sexp.line, "expected a fact list"))?;
        let (head, rest) = items
            .split_first()
            .ok_or_else(|| ReadError::malformed(sexp.line, "empty fact"))?;
        let predicate = head
            .as_atom()
            .filter(|a| !a.ends_with(':') && !a.starts_with('?'))
            .ok_or_else(|| ReadError::malformed(head.line, "fact must start with a predicate"))?;
        let args = read_keyword_args(rest, sexp.line)?;
        Ok(Fact {
            predicate: predicate.to_string(),
            args,
        })
    }
}

/// Reads `key: value key: value …` into an ordered list, rejecting
/// duplicate keys.
pub fn read_keyword_args(items: &[Sexp], line: usize) -> Result<Vec<(String, Term)>, ReadError> {
    if !items.len().is_multiple_of(2) {
        return Err(ReadError::malformed(
            line,
            "arguments must come in `key: value` pairs",
        ));
    }
    let mut args: Vec<(String, Term)> = Vec::with_capacity(items.len() / 2);
    for pair in items.chunks(2) {
        let key = pair[0].as_keyword().ok_or_else(|| {
            ReadError::malformed(pair[0].line, format!("expected keyword, found {}", pair[0]))
        })?;
        if args.iter().any(|(k, _)| k == key) {
            return Err(ReadError::malformed(
                pair[0].line,
                format!("duplicate argument {key}:"),
            ));
        }
        args.push((key.to_string(), Term::from_sexp(&pair[1])?));
    }
    Ok(args)
}

/// Canonical rendering of a number: integral values print without a
/// fractional part, everything else uses the shortest round-trip form.
pub fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

pub(crate) fn quote_str(s: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Symbol(s) => f.write_str(s),
            Term::Number(n) => f.write_str(&format_number(n.0)),
            Term::Str(s) => quote_str(s, f),
            Term::Variable(v) => write!(f, "?{v}"),
            Term::List(items) => {
                f.write_str("(")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
            Term::Fact(fact) => write!(f, "{fact}"),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for (k, v) in &self.args {
            write!(f, " {k}: {v}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Atom(a) => f.write_str(a),
            Node::Number(n) => f.write_str(&format_number(*n)),
            Node::Str(s) => quote_str(s, f),
            Node::List(items) => {
                f.write_str("(")?;
                for (i, s) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{s}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_log_style_fact() {
        let s = read_one("(pass from: a1 to: a2 fromloc: (30 10) toloc: (20 10) begintime: 120)")
            .unwrap();
        let fact = Fact::from_sexp(&s).unwrap();
        assert_eq!(fact.predicate, "pass");
        assert_eq!(fact.get("from"), Some(&Term::symbol("a1")));
        assert_eq!(
            fact.get("fromloc"),
            Some(&Term::List(vec![Term::number(30.0), Term::number(10.0)]))
        );
        assert_eq!(
            fact.to_string(),
            "(pass from: a1 to: a2 fromloc: (30 10) toloc: (20 10) begintime: 120)"
        );
    }

    #[test]
    fn nested_fact_and_variables() {
        let s = read_one("(happy cause: (scores team: ?team))").unwrap();
        let fact = Fact::from_sexp(&s).unwrap();
        assert_eq!(fact.variables(), vec!["team".to_string()]);
        assert!(matches!(fact.get("cause"), Some(Term::Fact(_))));
    }

    #[test]
    fn numbers_and_signed_atoms() {
        assert!(looks_numeric("10"));
        assert!(looks_numeric("-2.5"));
        assert!(looks_numeric("1e3"));
        assert!(!looks_numeric("+10%"));
        assert!(!looks_numeric("1/t"));
        assert!(!looks_numeric("a1"));
        assert!(!looks_numeric("."));
    }

    #[test]
    fn comments_and_lines() {
        let forms = read_all("# header\n(a)\n; note\n(b x: 1)\n").unwrap();
        assert_eq!(forms.len(), 2);
        assert_eq!(forms[1].line, 4);
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(
            read_all("(a\n(b)").unwrap_err(),
            ReadError::Unclosed { line: 1 }
        );
        assert_eq!(
            read_all("(a)\n)").unwrap_err(),
            ReadError::UnexpectedClose { line: 2 }
        );
        let err = Fact::from_sexp(&read_one("(a b: 1 c:)").unwrap()).unwrap_err();
        assert_eq!(err.line(), 1);
        let dup = Fact::from_sexp(&read_one("(a b: 1 b: 2)").unwrap()).unwrap_err();
        assert!(dup.to_string().contains("duplicate"));
    }

    #[test]
    fn strings_escape_round_trip() {
        let s = read_one(r#"(names (a1 "Alan \"Al\" Smith"))"#).unwrap();
        assert_eq!(s.to_string(), r#"(names (a1 "Alan \"Al\" Smith"))"#);
    }
}
