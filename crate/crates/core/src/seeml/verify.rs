//! The verifier: interprets a merged SEEML document through a style file,
//! assigns word timings, and splits it into a SABLE speech script and a
//! timed FACS / viseme timeline.
//!
//! Timings are a stand-in for synthesizer-reported ones: every word takes
//! `60000 / words_per_minute` ms and each `BREAK` adds a pause.

use std::cmp::Ordering;
use std::fmt::Write;

use thiserror::Error;

use super::lipsync::{lip_sync, TimedWord};
use super::style::StyleFile;
use super::{parse_au, serialize_seeml, Element, Expression, Node, SeemlDocument, Tag};
use crate::sexpr::format_number;

pub const TIMELINE_HEADER: &str = "#byrne-facs v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("style file has no mapping for expression {0:?}")]
    UnknownExpression(String),
    #[error("style file has no sound for aural event {0:?}")]
    UnknownAuralEvent(String),
    #[error("document has facial markup but no words to anchor it")]
    NoWords,
    #[error("timeline line {line}: {message}")]
    Timeline { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacsEvent {
    pub onset_ms: u64,
    pub au: u32,
    pub intensity: f64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisemeEvent {
    pub onset_ms: u64,
    pub viseme: String,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimelineEvent {
    Facs(FacsEvent),
    Viseme(VisemeEvent),
}

impl TimelineEvent {
    pub fn onset_ms(&self) -> u64 {
        match self {
            TimelineEvent::Facs(e) => e.onset_ms,
            TimelineEvent::Viseme(e) => e.onset_ms,
        }
    }

    pub fn duration_ms(&self) -> u64 {
        match self {
            TimelineEvent::Facs(e) => e.duration_ms,
            TimelineEvent::Viseme(e) => e.duration_ms,
        }
    }

    fn order(&self, other: &Self) -> Ordering {
        use TimelineEvent::*;
        self.onset_ms()
            .cmp(&other.onset_ms())
            .then_with(|| match (self, other) {
                (Facs(a), Facs(b)) => {
                    a.au.cmp(&b.au)
                        .then(a.duration_ms.cmp(&b.duration_ms))
                        .then(a.intensity.total_cmp(&b.intensity))
                }
                (Viseme(a), Viseme(b)) => a
                    .viseme
                    .cmp(&b.viseme)
                    .then(a.duration_ms.cmp(&b.duration_ms)),
                (Facs(_), Viseme(_)) => Ordering::Less,
                (Viseme(_), Facs(_)) => Ordering::Greater,
            })
    }
}

/// What the verifier hands to the speech and face systems.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub speech_script: String,
    pub face_timeline: Vec<TimelineEvent>,
    pub total_duration_ms: u64,
    /// Times at which a GDA `seg` closes: the utterance's interrupt markers.
    pub phrase_ends_ms: Vec<u64>,
    pub words: Vec<TimedWord>,
}

impl OutputBundle {
    pub fn timeline_text(&self) -> String {
        write_timeline(&self.face_timeline)
    }
}

struct Span {
    element: Element,
    start: usize,
    end: usize,
}

#[derive(Default)]
struct Flat {
    text: String,
    facial: Vec<Span>,
    seg_ends: Vec<usize>,
    breaks: Vec<(usize, f64)>,
}

fn flatten(nodes: &[Node], style: &StyleFile, flat: &mut Flat) {
    for node in nodes {
        match node {
            Node::Text(t) => flat.text.push_str(t),
            Node::Element(e) => {
                let start = flat.text.len();
                if e.tag == Tag::Break {
                    let pause = e
                        .get("TIME")
                        .and_then(parse_duration_ms)
                        .unwrap_or(style.speech.break_ms);
                    flat.breaks.push((start, pause));
                }
                flatten(&e.children, style, flat);
                let end = flat.text.len();
                if e.tag.is_facial() {
                    flat.facial.push(Span {
                        element: Element {
                            children: Vec::new(),
                            ..e.clone()
                        },
                        start,
                        end,
                    });
                } else if e.tag == Tag::Seg {
                    flat.seg_ends.push(end);
                }
            }
        }
    }
}

/// `500ms`, `0.5s` or a bare number of milliseconds.
fn parse_duration_ms(value: &str) -> Option<f64> {
    let v = value.trim();
    let ms = if let Some(n) = v.strip_suffix("ms") {
        n.trim().parse().ok()?
    } else if let Some(n) = v.strip_suffix('s') {
        n.trim().parse::<f64>().ok()? * 1000.0
    } else {
        v.parse().ok()?
    };
    (ms >= 0.0).then_some(ms)
}

/// Byte ranges of whitespace-separated tokens containing a letter or digit.
fn word_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text
        .char_indices()
        .chain(std::iter::once((text.len(), ' ')))
    {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                if text[s..i].chars().any(char::is_alphanumeric) {
                    out.push((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}

struct Clock {
    /// (byte offset, start ms, end ms) per word.
    words: Vec<(usize, usize, f64, f64)>,
    breaks: Vec<(usize, f64)>,
    ms_per_word: f64,
    total: f64,
}

impl Clock {
    fn new(words: &[(usize, usize)], breaks: &[(usize, f64)], ms_per_word: f64) -> Clock {
        enum Item {
            Break(f64),
            Word(usize, usize),
        }
        let mut items: Vec<(usize, u8, Item)> = breaks
            .iter()
            .map(|&(o, ms)| (o, 0, Item::Break(ms)))
            .chain(words.iter().map(|&(s, e)| (s, 1, Item::Word(s, e))))
            .collect();
        items.sort_by_key(|(o, rank, _)| (*o, *rank));
        let mut t = 0.0;
        let mut timed = Vec::with_capacity(words.len());
        for (_, _, item) in items {
            match item {
                Item::Break(ms) => t += ms,
                Item::Word(s, e) => {
                    timed.push((s, e, t, t + ms_per_word));
                    t += ms_per_word;
                }
            }
        }
        Clock {
            words: timed,
            breaks: breaks.to_vec(),
            ms_per_word,
            total: t,
        }
    }

    /// Time reached once every word and break starting before `offset`
    /// has been spoken.
    fn time_at(&self, offset: usize) -> f64 {
        let words = self.words.iter().filter(|w| w.0 < offset).count() as f64;
        let pauses: f64 = self
            .breaks
            .iter()
            .filter(|(o, _)| *o < offset)
            .map(|(_, ms)| ms)
            .sum();
        words * self.ms_per_word + pauses
    }

    /// Rounded (onset, end) for a byte span, or `None` if no word overlaps.
    fn span(&self, start: usize, end: usize) -> Option<(u64, u64)> {
        let mut inside = self.words.iter().filter(|w| w.0 < end && w.1 > start);
        let first = inside.next()?;
        let last = inside.next_back().unwrap_or(first);
        Some((round_ms(first.2), round_ms(last.3)))
    }
}

fn round_ms(t: f64) -> u64 {
    t.round().max(0.0) as u64
}

fn project_speech(nodes: &[Node], style: &StyleFile) -> Result<Vec<Node>, VerifyError> {
    let mut out = Vec::with_capacity(nodes.len());
    for node in nodes {
        match node {
            Node::Text(_) => out.push(node.clone()),
            Node::Element(e) if e.tag.is_facial() => {
                out.extend(project_speech(&e.children, style)?)
            }
            Node::Element(e) if e.tag == Tag::Event => {
                let name = e.get("NAME").unwrap_or_default();
                let path = style
                    .aural
                    .get(name)
                    .ok_or_else(|| VerifyError::UnknownAuralEvent(name.to_string()))?;
                out.push(Element::new(Tag::Audio).attr("SRC", path.clone()).into());
            }
            Node::Element(e) => out.push(Node::Element(Element {
                children: project_speech(&e.children, style)?,
                ..e.clone()
            })),
        }
    }
    Ok(out)
}

pub fn verify_and_split(
    doc: &SeemlDocument,
    style: &StyleFile,
) -> Result<OutputBundle, VerifyError> {
    let mut flat = Flat::default();
    flatten(&doc.nodes, style, &mut flat);
    let ranges = word_ranges(&flat.text);
    if ranges.is_empty() && !flat.facial.is_empty() {
        return Err(VerifyError::NoWords);
    }
    let clock = Clock::new(&ranges, &flat.breaks, style.speech.ms_per_word());
    let total = round_ms(clock.total);

    let mut timeline = Vec::new();
    for span in &flat.facial {
        let (onset, duration) = match clock.span(span.start, span.end) {
            Some((onset, end)) => (onset, end - onset),
            None => {
                let onset = round_ms(clock.time_at(span.start)).min(total);
                (
                    onset,
                    (style.speech.point_ms.round() as u64).min(total - onset),
                )
            }
        };
        let level = span.element.level();
        let aus: Vec<(u32, f64)> = match span.element.tag {
            Tag::Expr => {
                let name = span.element.get("NAME").unwrap_or_default();
                let expr: Expression = name.parse().map_err(VerifyError::UnknownExpression)?;
                style
                    .expressions
                    .get(&expr)
                    .ok_or_else(|| VerifyError::UnknownExpression(name.to_string()))?
                    .clone()
            }
            _ => {
                let au = span.element.get("NUM").and_then(parse_au).unwrap_or(1);
                vec![(au, 1.0)]
            }
        };
        for (au, weight) in aus {
            timeline.push(TimelineEvent::Facs(FacsEvent {
                onset_ms: onset,
                au,
                intensity: (weight * level).clamp(0.0, 1.0),
                duration_ms: duration,
            }));
        }
    }

    let words: Vec<TimedWord> = clock
        .words
        .iter()
        .map(|&(s, e, start, end)| TimedWord {
            text: flat.text[s..e].to_string(),
            start_ms: round_ms(start),
            end_ms: round_ms(end),
        })
        .collect();
    timeline.extend(
        lip_sync(&words, style)
            .into_iter()
            .map(TimelineEvent::Viseme),
    );
    timeline.sort_by(TimelineEvent::order);

    let mut phrase_ends: Vec<u64> = flat
        .seg_ends
        .iter()
        .map(|&end| round_ms(clock.time_at(end)))
        .collect();
    phrase_ends.sort_unstable();
    phrase_ends.dedup();

    let mut body = project_speech(&doc.nodes, style)?;
    let speech = &style.speech;
    if speech.base_pitch.is_some() || speech.pitch_range.is_some() {
        let mut pitch = Element::new(Tag::Pitch);
        if let Some(base) = speech.base_pitch {
            pitch = pitch.attr("BASE", format!("{}Hz", format_number(base)));
        }
        if let Some(range) = speech.pitch_range {
            pitch = pitch.attr("RANGE", format!("{}%", format_number(range)));
        }
        pitch.children = body;
        body = vec![pitch.into()];
    }
    let root = Element {
        children: body,
        ..Element::new(Tag::Sable)
    };
    let speech_script = serialize_seeml(&SeemlDocument::new(vec![root.into()]));

    Ok(OutputBundle {
        speech_script,
        face_timeline: timeline,
        total_duration_ms: total,
        phrase_ends_ms: phrase_ends,
        words,
    })
}

/// Tab-separated timeline, one event per line after the version header.
pub fn write_timeline(events: &[TimelineEvent]) -> String {
    let mut out = String::new();
    out.push_str(TIMELINE_HEADER);
    out.push('\n');
    for e in events {
        let _ = match e {
            TimelineEvent::Facs(f) => writeln!(
                out,
                "{}\tAU\t{}\t{:.3}\t{}",
                f.onset_ms, f.au, f.intensity, f.duration_ms
            ),
            TimelineEvent::Viseme(v) => {
                writeln!(
                    out,
                    "{}\tVIS\t{}\t-\t{}",
                    v.onset_ms, v.viseme, v.duration_ms
                )
            }
        };
    }
    out
}

pub fn parse_timeline(text: &str) -> Result<Vec<TimelineEvent>, VerifyError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TIMELINE_HEADER => {}
        _ => {
            return Err(VerifyError::Timeline {
                line: 1,
                message: format!("expected header {TIMELINE_HEADER:?}"),
            })
        }
    }
    let mut events = Vec::new();
    for (idx, line) in lines {
        let err = |message: &str| VerifyError::Timeline {
            line: idx + 1,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [onset, kind, id, intensity, duration] = fields[..] else {
            return Err(err("expected five tab-separated fields"));
        };
        let onset_ms = onset.parse().map_err(|_| err("bad onset"))?;
        let duration_ms = duration.parse().map_err(|_| err("bad duration"))?;
        events.push(match kind {
            "AU" => TimelineEvent::Facs(FacsEvent {
                onset_ms,
                au: parse_au(id).ok_or_else(|| err("bad action unit"))?,
                intensity: intensity
                    .parse::<f64>()
                    .ok()
                    .filter(|i| (0.0..=1.0).contains(i))
                    .ok_or_else(|| err("bad intensity"))?,
                duration_ms,
            }),
            "VIS" => TimelineEvent::Viseme(VisemeEvent {
                onset_ms,
                viseme: id.to_string(),
                duration_ms,
            }),
            _ => return Err(err("kind must be AU or VIS")),
        });
    }
    Ok(events)
}
