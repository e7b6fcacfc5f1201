//! Character profiles: statics, display names, emotion rules, behaviors and
//! templates, all in one s-expression file.
//!
//! ```text
//! (static (supports team: a))
//! (names (a1 "Andrews") (a2 "Baker"))
//! (params lambda: 5)
//! (emotion-rule id: goal-joy
//!   (pre (supports team: ?team) (scores team: ?team))
//!   (add (type: happiness intensity: 8 target: nil
//!         cause: (scores team: ?team) decay: 1/t)))
//! (behavior id: grin group: face (motivated-by happiness)
//!   (directives (expr name: smile level: 0.8 scope: utterance)))
//! (template id: pass-plain (pre (pass from: ?x to: ?y))
//!   (text "<su><seg>?x passes</seg> <seg>to ?y</seg></su>"))
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use thiserror::Error;

use crate::behavior::{check_behaviors, BehaviorBody, BehaviorError, BehaviorSpec, Motivation};
use crate::emotion::{DecayFunction, EmotionRule, EmotionSchema, EmotionType};
use crate::seeml::{
    parse_seeml, serialize_seeml, DirectiveError, DirectiveKind, MarkupDirective, ParseError,
    PointPosition, Scope, Tag, ValidationError,
};
use crate::sexpr::{format_number, read_all, read_keyword_args, Fact, ReadError, Sexp, Term};
use crate::textgen::Template;

pub const DEFAULT_LAMBDA: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{owner}: variable ?{variable} is not bound by any precondition")]
    UnboundVariable { owner: String, variable: String },
    #[error("behavior {parent}: child {child} is not defined")]
    DanglingChild { parent: String, child: String },
    #[error("behavior {0} is part of a cycle")]
    Cycle(String),
    #[error("{owner}: unknown facial expression {name:?}")]
    UnknownExpression { owner: String, name: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{owner}: {message}")]
    Invalid { owner: String, message: String },
}

/// Every problem found while loading a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileErrors(pub Vec<ProfileError>);

impl fmt::Display for ProfileErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ProfileErrors {}

impl From<ProfileError> for ProfileErrors {
    fn from(e: ProfileError) -> Self {
        ProfileErrors(vec![e])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterProfile {
    pub statics: Vec<Fact>,
    pub name_table: BTreeMap<String, String>,
    pub emotion_rules: Vec<EmotionRule>,
    pub behaviors: Vec<BehaviorSpec>,
    pub templates: Vec<Template>,
    pub lambda_use_penalty: f64,
}

impl Default for CharacterProfile {
    fn default() -> Self {
        CharacterProfile {
            statics: Vec::new(),
            name_table: BTreeMap::new(),
            emotion_rules: Vec::new(),
            behaviors: Vec::new(),
            templates: Vec::new(),
            lambda_use_penalty: DEFAULT_LAMBDA,
        }
    }
}

impl CharacterProfile {
    /// Every invariant violation in the profile; empty when valid.
    pub fn diagnostics(&self) -> Vec<ProfileError> {
        let mut out = Vec::new();

        for (i, rule) in self.emotion_rules.iter().enumerate() {
            let owner = rule.label(i);
            for variable in rule.unbound_variables() {
                out.push(ProfileError::UnboundVariable {
                    owner: owner.clone(),
                    variable,
                });
            }
            for add in &rule.additions {
                if !(add.intensity > 0.0 && add.intensity <= 10.0) {
                    out.push(ProfileError::Invalid {
                        owner: owner.clone(),
                        message: format!(
                            "intensity {} is outside (0, 10]",
                            format_number(add.intensity)
                        ),
                    });
                }
            }
        }
        let mut rule_ids = BTreeSet::new();
        for id in self.emotion_rules.iter().filter_map(|r| r.id.as_deref()) {
            if !rule_ids.insert(id) {
                out.push(ProfileError::DuplicateId {
                    kind: "emotion-rule",
                    id: id.to_string(),
                });
            }
        }

        for e in check_behaviors(&self.behaviors) {
            out.push(match e {
                BehaviorError::DuplicateId(id) => ProfileError::DuplicateId {
                    kind: "behavior",
                    id,
                },
                BehaviorError::DanglingChild { parent, child } => {
                    ProfileError::DanglingChild { parent, child }
                }
                BehaviorError::Cycle(id) => ProfileError::Cycle(id),
                BehaviorError::Directive {
                    id,
                    source: DirectiveError::UnknownExpression(name),
                } => ProfileError::UnknownExpression {
                    owner: format!("behavior {id}"),
                    name,
                },
                BehaviorError::Directive { id, source } => ProfileError::Invalid {
                    owner: format!("behavior {id}"),
                    message: source.to_string(),
                },
            });
        }

        let mut template_ids = BTreeSet::new();
        for t in &self.templates {
            let owner = format!("template {}", t.id);
            if !template_ids.insert(t.id.as_str()) {
                out.push(ProfileError::DuplicateId {
                    kind: "template",
                    id: t.id.clone(),
                });
            }
            let mut bound = Vec::new();
            t.preconditions
                .iter()
                .for_each(|p| p.collect_variables(&mut bound));
            for variable in t.body_variables() {
                if !bound.contains(&variable) {
                    out.push(ProfileError::UnboundVariable {
                        owner: owner.clone(),
                        variable,
                    });
                }
            }
            if !t.has_phrase() {
                out.push(ProfileError::Invalid {
                    owner,
                    message: "body has no <seg> phrase".into(),
                });
            }
        }
        for s in &self.statics {
            if !s.is_ground() {
                out.push(ProfileError::Invalid {
                    owner: format!("static {s}"),
                    message: "static facts must be ground".into(),
                });
            }
        }
        out
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ProfileError {
    ProfileError::Syntax {
        line,
        message: message.into(),
    }
}

impl From<ReadError> for ProfileError {
    fn from(e: ReadError) -> Self {
        syntax(e.line(), e.to_string())
    }
}

/// The pieces of a form after its head: `key: value` pairs and nested
/// `(name …)` sub-forms.
struct Form<'a> {
    line: usize,
    keywords: Vec<(&'a str, &'a Sexp)>,
    subforms: Vec<(&'a str, &'a Sexp)>,
}

impl<'a> Form<'a> {
    fn split(sexp: &'a Sexp, items: &'a [Sexp]) -> Result<Form<'a>, ProfileError> {
        let mut form = Form {
            line: sexp.line,
            keywords: Vec::new(),
            subforms: Vec::new(),
        };
        let mut it = items.iter();
        while let Some(item) = it.next() {
            if let Some(key) = item.as_keyword() {
                let value = it
                    .next()
                    .ok_or_else(|| syntax(item.line, format!("{key}: has no value")))?;
                if form.keywords.iter().any(|(k, _)| *k == key) {
                    return Err(syntax(item.line, format!("duplicate {key}:")));
                }
                form.keywords.push((key, value));
            } else if let Some(head) = item
                .as_list()
                .and_then(|l| l.first())
                .and_then(Sexp::as_atom)
            {
                form.subforms.push((head, item));
            } else {
                return Err(syntax(item.line, format!("unexpected {item}")));
            }
        }
        Ok(form)
    }

    fn keyword(&self, key: &str) -> Option<&'a Sexp> {
        self.keywords
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
    }

    fn symbol(&self, key: &str) -> Result<Option<String>, ProfileError> {
        self.keyword(key)
            .map(|v| {
                v.as_atom()
                    .map(str::to_string)
                    .ok_or_else(|| syntax(v.line, format!("{key}: expects a symbol, found {v}")))
            })
            .transpose()
    }

    fn required_symbol(&self, key: &str) -> Result<String, ProfileError> {
        self.symbol(key)?
            .ok_or_else(|| syntax(self.line, format!("missing {key}:")))
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ProfileError> {
        self.keyword(key)
            .map(|v| match Term::from_sexp(v)? {
                Term::Number(n) => Ok(n.0),
                _ => Err(syntax(
                    v.line,
                    format!("{key}: expects a number, found {v}"),
                )),
            })
            .transpose()
    }

    fn only(&self, allowed_keys: &[&str], allowed_forms: &[&str]) -> Result<(), ProfileError> {
        if let Some((k, v)) = self
            .keywords
            .iter()
            .find(|(k, _)| !allowed_keys.contains(k))
        {
            return Err(syntax(v.line, format!("unexpected {k}:")));
        }
        if let Some((h, s)) = self
            .subforms
            .iter()
            .find(|(h, _)| !allowed_forms.contains(h))
        {
            return Err(syntax(s.line, format!("unexpected ({h} …)")));
        }
        Ok(())
    }
}

fn tail(sexp: &Sexp) -> &[Sexp] {
    sexp.as_list().map_or(&[], |l| &l[1..])
}

fn facts(sexp: &Sexp) -> Result<Vec<Fact>, ProfileError> {
    tail(sexp)
        .iter()
        .map(|s| Fact::from_sexp(s).map_err(ProfileError::from))
        .collect()
}

/// Parses and validates a profile. An empty text is a valid, silent
/// character.
pub fn load_profile(text: &str) -> Result<CharacterProfile, ProfileErrors> {
    let profile = parse_profile(text)?;
    let diagnostics = profile.diagnostics();
    if diagnostics.is_empty() {
        Ok(profile)
    } else {
        Err(ProfileErrors(diagnostics))
    }
}

fn parse_profile(text: &str) -> Result<CharacterProfile, ProfileError> {
    let mut profile = CharacterProfile::default();
    for top in read_all(text)? {
        let items = top
            .as_list()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| syntax(top.line, format!("expected a top-level form, found {top}")))?;
        let head = items[0]
            .as_atom()
            .ok_or_else(|| syntax(top.line, "form must start with a name"))?;
        let rest = &items[1..];
        match head {
            "static" => {
                let [fact] = rest else {
                    return Err(syntax(top.line, "static takes exactly one fact"));
                };
                profile.statics.push(Fact::from_sexp(fact)?);
            }
            "names" => {
                for entry in rest {
                    let pair = entry.as_list().unwrap_or_default();
                    let (Some(id), Some(display)) = (
                        pair.first().and_then(Sexp::as_atom),
                        pair.get(1).and_then(|s| match Term::from_sexp(s) {
                            Ok(Term::Str(d)) => Some(d),
                            _ => None,
                        }),
                    ) else {
                        return Err(syntax(
                            entry.line,
                            "names entries look like (id \"Display\")",
                        ));
                    };
                    if pair.len() != 2 {
                        return Err(syntax(
                            entry.line,
                            "names entries look like (id \"Display\")",
                        ));
                    }
                    profile.name_table.insert(id.to_string(), display);
                }
            }
            "params" => {
                for (key, value) in read_keyword_args(rest, top.line)? {
                    match (key.as_str(), value) {
                        ("lambda", Term::Number(n)) if n.0 >= 0.0 => {
                            profile.lambda_use_penalty = n.0
                        }
                        (k, v) => return Err(syntax(top.line, format!("bad parameter {k}: {v}"))),
                    }
                }
            }
            "emotion-rule" => profile.emotion_rules.push(parse_rule(&top, rest)?),
            "behavior" => profile.behaviors.push(parse_behavior(&top, rest)?),
            "template" => profile.templates.push(parse_template(&top, rest)?),
            other => return Err(syntax(top.line, format!("unknown form ({other} …)"))),
        }
    }
    Ok(profile)
}

fn parse_rule(top: &Sexp, rest: &[Sexp]) -> Result<EmotionRule, ProfileError> {
    let form = Form::split(top, rest)?;
    form.only(&["id"], &["pre", "add", "del"])?;
    let mut rule = EmotionRule {
        id: form.symbol("id")?,
        preconditions: Vec::new(),
        additions: Vec::new(),
        deletions: Vec::new(),
    };
    for (head, sub) in &form.subforms {
        match *head {
            "pre" => rule.preconditions.extend(facts(sub)?),
            "del" => rule.deletions.extend(facts(sub)?),
            _ => {
                for schema in tail(sub) {
                    rule.additions.push(parse_schema(schema)?);
                }
            }
        }
    }
    if rule.preconditions.is_empty() {
        return Err(syntax(top.line, "emotion-rule needs (pre …)"));
    }
    Ok(rule)
}

fn parse_schema(sexp: &Sexp) -> Result<EmotionSchema, ProfileError> {
    let items = sexp
        .as_list()
        .ok_or_else(|| syntax(sexp.line, "expected (type: … intensity: … cause: …)"))?;
    let mut args: BTreeMap<String, Term> =
        read_keyword_args(items, sexp.line)?.into_iter().collect();
    let mut take = |key: &str| args.remove(key);
    let kind = match take("type") {
        Some(Term::Symbol(s)) => s
            .parse::<EmotionType>()
            .map_err(|e| syntax(sexp.line, e.to_string()))?,
        _ => return Err(syntax(sexp.line, "emotion needs type: <emotion>")),
    };
    let intensity = take("intensity")
        .and_then(|t| t.as_number())
        .ok_or_else(|| syntax(sexp.line, "emotion needs a numeric intensity:"))?;
    let target = match take("target") {
        None => None,
        Some(Term::Symbol(s)) if s == "nil" => None,
        Some(t) => Some(t),
    };
    let cause = match take("cause") {
        Some(Term::Fact(f)) => *f,
        _ => return Err(syntax(sexp.line, "emotion needs cause: <fact>")),
    };
    let decay = match take("decay") {
        None => DecayFunction::Reciprocal,
        Some(t) => DecayFunction::from_term(&t)
            .ok_or_else(|| syntax(sexp.line, format!("unknown decay {t}")))?,
    };
    if let Some(k) = args.keys().next() {
        return Err(syntax(sexp.line, format!("unexpected {k}: in emotion")));
    }
    Ok(EmotionSchema {
        kind,
        intensity,
        target,
        cause,
        decay,
    })
}

fn parse_behavior(top: &Sexp, rest: &[Sexp]) -> Result<BehaviorSpec, ProfileError> {
    let form = Form::split(top, rest)?;
    form.only(
        &["id", "group"],
        &["motivated-by", "pre", "children", "directives"],
    )?;
    let id = form.required_symbol("id")?;
    let group = form.required_symbol("group")?;
    let mut motivated_by = Vec::new();
    let mut preconditions = Vec::new();
    let mut body = None;
    let mut set_body = |line: usize, b: BehaviorBody| {
        if body.replace(b).is_some() {
            Err(syntax(
                line,
                format!("behavior {id} has more than one body"),
            ))
        } else {
            Ok(())
        }
    };
    for (head, sub) in &form.subforms {
        match *head {
            "motivated-by" => motivated_by.extend(parse_motivations(sub)?),
            "pre" => preconditions.extend(facts(sub)?),
            "children" => {
                let children = tail(sub)
                    .iter()
                    .map(|c| {
                        c.as_atom()
                            .map(str::to_string)
                            .ok_or_else(|| syntax(c.line, format!("child id expected, found {c}")))
                    })
                    .collect::<Result<_, _>>()?;
                set_body(sub.line, BehaviorBody::Children(children))?;
            }
            _ => {
                let directives = tail(sub)
                    .iter()
                    .map(parse_directive)
                    .collect::<Result<_, _>>()?;
                set_body(sub.line, BehaviorBody::Directives(directives))?;
            }
        }
    }
    let body = body.ok_or_else(|| {
        syntax(
            top.line,
            format!("behavior {id} needs (children …) or (directives …)"),
        )
    })?;
    Ok(BehaviorSpec {
        id,
        group,
        motivated_by,
        preconditions,
        body,
    })
}

fn parse_motivations(sexp: &Sexp) -> Result<Vec<Motivation>, ProfileError> {
    let mut out: Vec<Motivation> = Vec::new();
    let mut it = tail(sexp).iter();
    while let Some(item) = it.next() {
        if item.as_keyword() == Some("target") {
            let last = out
                .last_mut()
                .filter(|m| m.target.is_none())
                .ok_or_else(|| syntax(item.line, "target: must follow an emotion type"))?;
            let pattern = it
                .next()
                .ok_or_else(|| syntax(item.line, "target: has no value"))?;
            last.target = Some(Term::from_sexp(pattern)?);
            continue;
        }
        let emotion = item
            .as_atom()
            .ok_or_else(|| syntax(item.line, format!("emotion type expected, found {item}")))?
            .parse::<EmotionType>()
            .map_err(|e| syntax(item.line, e.to_string()))?;
        out.push(Motivation {
            emotion,
            target: None,
        });
    }
    Ok(out)
}

fn text_value(sexp: &Sexp) -> Option<String> {
    match Term::from_sexp(sexp).ok()? {
        Term::Symbol(s) | Term::Str(s) => Some(s),
        Term::Number(n) => Some(format_number(n.0)),
        _ => None,
    }
}

fn parse_scope(sexp: &Sexp) -> Result<Scope, ProfileError> {
    let bad = || syntax(sexp.line, format!("unknown scope {sexp}"));
    if let Some(atom) = sexp.as_atom() {
        return match atom {
            "utterance" => Ok(Scope::Utterance),
            "every-phrase" => Ok(Scope::EveryPhrase),
            "start" => Ok(Scope::Point(PointPosition::Start)),
            "end" => Ok(Scope::Point(PointPosition::End)),
            _ => Err(bad()),
        };
    }
    match sexp.as_list() {
        Some([head, word]) if head.as_atom() == Some("word") => {
            text_value(word).map(Scope::LexicalTrigger).ok_or_else(bad)
        }
        _ => Err(bad()),
    }
}

fn parse_directive(sexp: &Sexp) -> Result<MarkupDirective, ProfileError> {
    let items = sexp.as_list().unwrap_or_default();
    let head = items.first().and_then(Sexp::as_atom).unwrap_or_default();
    let form = Form::split(sexp, items.get(1..).unwrap_or_default())?;
    if let Some((h, s)) = form.subforms.first() {
        return Err(syntax(s.line, format!("unexpected ({h} …) in directive")));
    }
    let scope = form
        .keyword("scope")
        .map(parse_scope)
        .transpose()?
        .unwrap_or(Scope::Utterance);
    let level = || -> Result<f64, ProfileError> { Ok(form.number("level")?.unwrap_or(1.0)) };
    let kind = match head {
        "expr" => {
            form.only(&["name", "level", "scope"], &[])?;
            DirectiveKind::FacialExpression {
                name: form.required_symbol("name")?,
                level: level()?,
            }
        }
        "au" => {
            form.only(&["id", "level", "scope"], &[])?;
            let au = form
                .number("id")?
                .filter(|n| n.fract() == 0.0 && *n >= 0.0 && *n <= u32::MAX as f64)
                .ok_or_else(|| syntax(form.line, "au needs a whole-number id:"))?;
            DirectiveKind::ActionUnit {
                au: au as u32,
                level: level()?,
            }
        }
        "aural" => {
            form.only(&["name", "scope"], &[])?;
            DirectiveKind::AuralEvent {
                name: form.required_symbol("name")?,
            }
        }
        "speech" => {
            let tag_name = form.required_symbol("tag")?;
            let tag = Tag::from_name(&tag_name)
                .ok_or_else(|| syntax(form.line, format!("unknown speech tag {tag_name}")))?;
            let mut attrs = BTreeMap::new();
            for (k, v) in &form.keywords {
                if matches!(*k, "tag" | "scope") {
                    continue;
                }
                let value = text_value(v)
                    .ok_or_else(|| syntax(v.line, format!("attribute {k}: needs a plain value")))?;
                attrs.insert(tag.canonical_attr(k), value);
            }
            DirectiveKind::SpeechTag { tag, attrs }
        }
        other => return Err(syntax(sexp.line, format!("unknown directive ({other} …)"))),
    };
    Ok(MarkupDirective::new(kind, scope))
}

fn parse_template(top: &Sexp, rest: &[Sexp]) -> Result<Template, ProfileError> {
    let form = Form::split(top, rest)?;
    form.only(&["id"], &["pre", "text"])?;
    let id = form.required_symbol("id")?;
    let mut preconditions = Vec::new();
    let mut body = None;
    for (head, sub) in &form.subforms {
        if *head == "pre" {
            preconditions.extend(facts(sub)?);
            continue;
        }
        let text = match tail(sub) {
            [s] => match Term::from_sexp(s)? {
                Term::Str(t) => t,
                _ => return Err(syntax(sub.line, "text takes one string")),
            },
            _ => return Err(syntax(sub.line, "text takes one string")),
        };
        let doc = parse_seeml(&text).map_err(|e| match e {
            ParseError::Invalid(ValidationError::UnknownExpression(name)) => {
                ProfileError::UnknownExpression {
                    owner: format!("template {id}"),
                    name,
                }
            }
            other => syntax(sub.line, format!("template {id}: {other}")),
        })?;
        if body.replace(doc).is_some() {
            return Err(syntax(
                sub.line,
                format!("template {id} has more than one text"),
            ));
        }
    }
    let body = body.ok_or_else(|| syntax(top.line, format!("template {id} needs (text \"…\")")))?;
    Ok(Template {
        id,
        preconditions,
        body,
    })
}

fn fact_list(head: &str, facts: &[Fact]) -> String {
    let mut out = format!("({head}");
    for f in facts {
        let _ = write!(out, " {f}");
    }
    out.push(')');
    out
}

fn quoted(s: &str) -> String {
    Term::Str(s.to_string()).to_string()
}

fn dump_directive(d: &MarkupDirective) -> String {
    let scope = match &d.scope {
        Scope::LexicalTrigger(w) => format!("(word {})", quoted(w)),
        other => other.to_string(),
    };
    match &d.kind {
        DirectiveKind::FacialExpression { name, level } => {
            format!(
                "(expr name: {name} level: {} scope: {scope})",
                format_number(*level)
            )
        }
        DirectiveKind::ActionUnit { au, level } => {
            format!(
                "(au id: {au} level: {} scope: {scope})",
                format_number(*level)
            )
        }
        DirectiveKind::AuralEvent { name } => format!("(aural name: {name} scope: {scope})"),
        DirectiveKind::SpeechTag { tag, attrs } => {
            let mut out = format!("(speech tag: {tag} scope: {scope}");
            for (k, v) in attrs {
                let _ = write!(out, " {k}: {}", quoted(v));
            }
            out.push(')');
            out
        }
    }
}

/// Canonical text for a profile; `load_profile(dump_profile(p)) == p`.
pub fn dump_profile(profile: &CharacterProfile) -> String {
    let mut out = String::new();
    for s in &profile.statics {
        let _ = writeln!(out, "(static {s})");
    }
    if !profile.name_table.is_empty() {
        out.push_str("(names");
        for (id, display) in &profile.name_table {
            let _ = write!(out, " ({id} {})", quoted(display));
        }
        out.push_str(")\n");
    }
    if profile.lambda_use_penalty != DEFAULT_LAMBDA {
        let _ = writeln!(
            out,
            "(params lambda: {})",
            format_number(profile.lambda_use_penalty)
        );
    }
    for rule in &profile.emotion_rules {
        out.push_str("(emotion-rule");
        if let Some(id) = &rule.id {
            let _ = write!(out, " id: {id}");
        }
        let _ = write!(out, "\n  {}", fact_list("pre", &rule.preconditions));
        if !rule.additions.is_empty() {
            out.push_str("\n  (add");
            for a in &rule.additions {
                let target = a.target.as_ref().map_or("nil".to_string(), Term::to_string);
                let _ = write!(
                    out,
                    "\n    (type: {} intensity: {} target: {target} cause: {} decay: {})",
                    a.kind,
                    format_number(a.intensity),
                    a.cause,
                    a.decay
                );
            }
            out.push(')');
        }
        if !rule.deletions.is_empty() {
            let _ = write!(out, "\n  {}", fact_list("del", &rule.deletions));
        }
        out.push_str(")\n");
    }
    for b in &profile.behaviors {
        let _ = write!(out, "(behavior id: {} group: {}", b.id, b.group);
        if !b.motivated_by.is_empty() {
            out.push_str("\n  (motivated-by");
            for m in &b.motivated_by {
                let _ = write!(out, " {}", m.emotion);
                if let Some(t) = &m.target {
                    let _ = write!(out, " target: {t}");
                }
            }
            out.push(')');
        }
        if !b.preconditions.is_empty() {
            let _ = write!(out, "\n  {}", fact_list("pre", &b.preconditions));
        }
        match &b.body {
            BehaviorBody::Children(c) => {
                let _ = write!(out, "\n  (children {})", c.join(" "));
            }
            BehaviorBody::Directives(ds) => {
                out.push_str("\n  (directives");
                for d in ds {
                    let _ = write!(out, "\n    {}", dump_directive(d));
                }
                out.push(')');
            }
        }
        out.push_str(")\n");
    }
    for t in &profile.templates {
        let _ = write!(out, "(template id: {}", t.id);
        if !t.preconditions.is_empty() {
            let _ = write!(out, "\n  {}", fact_list("pre", &t.preconditions));
        }
        let _ = writeln!(out, "\n  (text {}))", quoted(&serialize_seeml(&t.body)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
; a partisan commentator
(static (supports team: a))
(names (a1 "Andrews") (a2 "Baker"))
(params lambda: 3)
(emotion-rule id: goal-joy
  (pre (supports team: ?team) (scores team: ?team))
  (add (type: happiness intensity: 8 target: nil cause: (scores team: ?team) decay: 1/t)))
(emotion-rule
  (pre (supports team: ?team) (scores team: ?other) (emotion type: happiness cause: ?c))
  (add (type: sadness intensity: 6 target: ?other cause: (scores team: ?other) decay: (exp rate: 0.2)))
  (del (emotion type: happiness cause: ?c)))
(behavior id: joy group: face (motivated-by happiness interest target: ?x)
  (children grin lift))
(behavior id: grin group: face (motivated-by happiness)
  (directives (expr name: smile level: 0.8 scope: utterance)
              (aural name: hiccup scope: end)))
(behavior id: lift group: voice (motivated-by happiness) (pre (supports team: a))
  (directives (speech tag: pitch BASE: "+20%" scope: every-phrase)
              (au id: 4 level: 0.6 scope: (word "Kirk"))))
(template id: pass-plain (pre (pass from: ?x to: ?y))
  (text "<su><seg>?x passes</seg> <seg>to ?y</seg></su>"))
"#;

    #[test]
    fn sample_loads() {
        let p = load_profile(SAMPLE).unwrap();
        assert_eq!(p.statics.len(), 1);
        assert_eq!(p.statics[0].to_string(), "(supports team: a)");
        assert_eq!(p.name_table["a1"], "Andrews");
        assert_eq!(p.lambda_use_penalty, 3.0);
        assert_eq!(p.emotion_rules.len(), 2);
        assert_eq!(p.emotion_rules[0].additions[0].intensity, 8.0);
        assert_eq!(
            p.emotion_rules[1].additions[0].decay,
            DecayFunction::Exponential(0.2)
        );
        assert_eq!(p.behaviors[0].motivated_by.len(), 2);
        assert!(p.behaviors[0].motivated_by[1].target.is_some());
        let BehaviorBody::Directives(ds) = &p.behaviors[2].body else {
            panic!("leaf expected")
        };
        assert_eq!(ds[0].element().get("BASE"), Some("+20%"));
        assert_eq!(ds[1].scope, Scope::LexicalTrigger("Kirk".into()));
    }

    #[test]
    fn dump_round_trips() {
        let p = load_profile(SAMPLE).unwrap();
        let text = dump_profile(&p);
        let again = load_profile(&text).unwrap();
        assert_eq!(again, p);
        assert_eq!(dump_profile(&again), text);
    }

    #[test]
    fn empty_profile_is_valid_and_dumps_empty() {
        let p = load_profile("").unwrap();
        assert_eq!(p, CharacterProfile::default());
        assert_eq!(dump_profile(&p), "");
    }

    fn errors(text: &str) -> Vec<ProfileError> {
        load_profile(text).unwrap_err().0
    }

    #[test]
    fn cycle_is_named() {
        let errs = errors(
            "(behavior id: a group: g (children b))\n(behavior id: b group: g (children a))",
        );
        assert!(errs.contains(&ProfileError::Cycle("a".into())), "{errs:?}");
    }

    #[test]
    fn dangling_child_is_named() {
        let errs = errors("(behavior id: a group: g (children ghost))");
        assert_eq!(
            errs,
            vec![ProfileError::DanglingChild {
                parent: "a".into(),
                child: "ghost".into()
            }]
        );
    }

    #[test]
    fn unbound_variables_are_named() {
        let errs = errors(
            "(emotion-rule id: r (pre (scores team: ?t)) \
             (add (type: anger intensity: 5 cause: (scores team: ?u))))",
        );
        assert_eq!(
            errs,
            vec![ProfileError::UnboundVariable {
                owner: "emotion-rule r".into(),
                variable: "u".into()
            }]
        );
        let errs = errors("(template id: t (pre (pass from: ?x)) (text \"<seg>?y</seg>\"))");
        assert!(errs[0].to_string().contains("?y"));
        assert!(errs[0].to_string().contains("template t"));
    }

    #[test]
    fn unknown_expression_is_named() {
        let errs = errors(
            "(behavior id: smirk group: face (motivated-by happiness) \
             (directives (expr name: smirk level: 0.5)))",
        );
        assert_eq!(
            errs,
            vec![ProfileError::UnknownExpression {
                owner: "behavior smirk".into(),
                name: "smirk".into()
            }]
        );
        let errs =
            errors("(template id: t (text \"<seg><EXPR NAME=\\\"leer\\\">x</EXPR></seg>\"))");
        assert!(matches!(&errs[0], ProfileError::UnknownExpression { name, .. } if name == "leer"));
    }

    #[test]
    fn duplicate_ids_are_named() {
        let leaf = "(behavior id: grin group: face (directives (expr name: smile)))";
        let errs = errors(&format!("{leaf}\n{leaf}"));
        assert_eq!(
            errs,
            vec![ProfileError::DuplicateId {
                kind: "behavior",
                id: "grin".into()
            }]
        );
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let errs = errors("(static (a))\n(bogus)");
        assert_eq!(errs[0], syntax(2, "unknown form (bogus …)"));
        let errs = errors("(static (a)\n");
        assert!(matches!(errs[0], ProfileError::Syntax { .. }));
        let errs = errors("\n\n(behavior id: x group: g)");
        assert!(matches!(errs[0], ProfileError::Syntax { line: 3, .. }));
    }
}
