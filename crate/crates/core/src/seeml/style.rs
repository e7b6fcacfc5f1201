//! Style files: face- and voice-specific interpretation of SEEML.
//!
//! ```text
//! [expressions]
//! smile = AU6:0.6 AU12:0.9
//! [aural]
//! hiccup = sounds/hiccup.wav
//! [speech]
//! words_per_minute = 180
//! [visemes]
//! mbp = closed
//! ```

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use super::{lipsync::LetterClass, parse_au, Expression};
use crate::sexpr::format_number;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StyleError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("style file has no [{0}] section")]
    MissingSection(&'static str),
    #[error("style file does not map the {0} expression")]
    MissingExpression(Expression),
    #[error("words_per_minute must be positive, found {0}")]
    NonPositiveRate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechParams {
    pub words_per_minute: f64,
    /// Baseline pitch in Hz, passed to the synthesizer when present.
    pub base_pitch: Option<f64>,
    /// Pitch range in percent, passed to the synthesizer when present.
    pub pitch_range: Option<f64>,
    /// Pause added by a `BREAK` without a `TIME` attribute.
    pub break_ms: f64,
    /// Duration of facial events anchored at a point rather than a span.
    pub point_ms: f64,
}

impl Default for SpeechParams {
    fn default() -> Self {
        SpeechParams {
            words_per_minute: 180.0,
            base_pitch: None,
            pitch_range: None,
            break_ms: 250.0,
            point_ms: 200.0,
        }
    }
}

impl SpeechParams {
    pub fn ms_per_word(&self) -> f64 {
        60_000.0 / self.words_per_minute
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleFile {
    pub expressions: BTreeMap<Expression, Vec<(u32, f64)>>,
    pub aural: BTreeMap<String, String>,
    pub speech: SpeechParams,
    /// Letter class name → viseme symbol.
    pub visemes: BTreeMap<String, String>,
}

impl StyleFile {
    pub fn viseme_for(&self, class: LetterClass) -> String {
        self.visemes
            .get(class.name())
            .cloned()
            .unwrap_or_else(|| class.name().to_ascii_uppercase())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[expressions]\n");
        for (e, aus) in &self.expressions {
            let list: Vec<String> = aus
                .iter()
                .map(|(au, w)| format!("AU{au}:{}", format_number(*w)))
                .collect();
            let _ = writeln!(out, "{e} = {}", list.join(" "));
        }
        out.push_str("[aural]\n");
        for (k, v) in &self.aural {
            let _ = writeln!(out, "{k} = {v}");
        }
        let s = &self.speech;
        out.push_str("[speech]\n");
        let _ = writeln!(
            out,
            "words_per_minute = {}",
            format_number(s.words_per_minute)
        );
        if let Some(p) = s.base_pitch {
            let _ = writeln!(out, "base_pitch = {}", format_number(p));
        }
        if let Some(r) = s.pitch_range {
            let _ = writeln!(out, "pitch_range = {}", format_number(r));
        }
        let _ = writeln!(out, "break_ms = {}", format_number(s.break_ms));
        let _ = writeln!(out, "point_ms = {}", format_number(s.point_ms));
        out.push_str("[visemes]\n");
        for (k, v) in &self.visemes {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Expressions,
    Aural,
    Speech,
    Visemes,
}

pub fn load_style(text: &str) -> Result<StyleFile, StyleError> {
    let mut section = None;
    let mut seen = Vec::new();
    let mut expressions = BTreeMap::new();
    let mut aural = BTreeMap::new();
    let mut visemes = BTreeMap::new();
    let mut speech = SpeechParams::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let syntax = |message: String| StyleError::Syntax { line, message };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let s = match name.trim() {
                "expressions" => Section::Expressions,
                "aural" => Section::Aural,
                "speech" => Section::Speech,
                "visemes" => Section::Visemes,
                other => return Err(syntax(format!("unknown section [{other}]"))),
            };
            if seen.contains(&s) {
                return Err(syntax(format!("section [{}] repeated", name.trim())));
            }
            seen.push(s);
            section = Some(s);
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| syntax("expected key = value".into()))?;
        if key.is_empty() {
            return Err(syntax("empty key".into()));
        }
        let number = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|n| n.is_finite())
                .ok_or_else(|| syntax(format!("{key} must be a number, found {v:?}")))
        };
        match section.ok_or_else(|| syntax("key outside any section".into()))? {
            Section::Expressions => {
                let expr: Expression = key
                    .parse()
                    .map_err(|k| syntax(format!("unknown expression {k:?}")))?;
                let aus = value
                    .split_whitespace()
                    .map(|item| {
                        parse_weighted_au(item).ok_or_else(|| {
                            syntax(format!("expected AU<k>:<weight>, found {item:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if aus.is_empty() {
                    return Err(syntax(format!("{expr} maps to no action units")));
                }
                expressions.insert(expr, aus);
            }
            Section::Aural => {
                aural.insert(key.to_string(), value.to_string());
            }
            Section::Visemes => {
                if LetterClass::from_name(key).is_none() {
                    return Err(syntax(format!("unknown letter class {key:?}")));
                }
                visemes.insert(key.to_string(), value.to_string());
            }
            Section::Speech => match key {
                "words_per_minute" => {
                    let wpm = number(value)?;
                    if wpm <= 0.0 {
                        return Err(StyleError::NonPositiveRate(value.to_string()));
                    }
                    speech.words_per_minute = wpm;
                }
                "base_pitch" => speech.base_pitch = Some(number(value)?),
                "pitch_range" => speech.pitch_range = Some(number(value)?),
                "break_ms" => speech.break_ms = number(value)?.max(0.0),
                "point_ms" => speech.point_ms = number(value)?.max(0.0),
                other => return Err(syntax(format!("unknown speech parameter {other:?}"))),
            },
        }
    }

    if !seen.contains(&Section::Expressions) {
        return Err(StyleError::MissingSection("expressions"));
    }
    if !seen.contains(&Section::Speech) {
        return Err(StyleError::MissingSection("speech"));
    }
    if let Some(missing) = Expression::ALL
        .into_iter()
        .find(|e| !expressions.contains_key(e))
    {
        return Err(StyleError::MissingExpression(missing));
    }
    Ok(StyleFile {
        expressions,
        aural,
        speech,
        visemes,
    })
}

fn parse_weighted_au(item: &str) -> Option<(u32, f64)> {
    let (au, weight) = item.split_once(':')?;
    let au = au.strip_prefix("AU").or_else(|| au.strip_prefix("au"))?;
    let weight: f64 = weight.parse().ok()?;
    (0.0..=1.0)
        .contains(&weight)
        .then_some(())
        .and(parse_au(au).map(|n| (n, weight)))
}
