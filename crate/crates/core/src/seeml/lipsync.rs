//! Cartoon-style lip sync: one mouth shape per obvious letter class.

use super::style::StyleFile;
use super::verify::VisemeEvent;

/// Shortest viseme the face is asked to show.
pub const MIN_VISEME_MS: u64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LetterClass {
    A,
    E,
    I,
    O,
    U,
    /// Lips closed: m, b, p.
    Mbp,
    /// Teeth on lip: f, v.
    Fv,
    /// Rounded: w, q.
    W,
    /// Remaining consonants.
    Wide,
}

impl LetterClass {
    pub const ALL: [LetterClass; 9] = [
        LetterClass::A,
        LetterClass::E,
        LetterClass::I,
        LetterClass::O,
        LetterClass::U,
        LetterClass::Mbp,
        LetterClass::Fv,
        LetterClass::W,
        LetterClass::Wide,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LetterClass::A => "a",
            LetterClass::E => "e",
            LetterClass::I => "i",
            LetterClass::O => "o",
            LetterClass::U => "u",
            LetterClass::Mbp => "mbp",
            LetterClass::Fv => "fv",
            LetterClass::W => "w",
            LetterClass::Wide => "wide",
        }
    }

    pub fn from_name(name: &str) -> Option<LetterClass> {
        LetterClass::ALL.into_iter().find(|c| c.name() == name)
    }

    /// `None` for letters that hold the previous shape (h, l, r) and for
    /// anything that is not an ASCII letter.
    pub fn of(c: char) -> Option<LetterClass> {
        match c.to_ascii_lowercase() {
            'a' => Some(LetterClass::A),
            'e' => Some(LetterClass::E),
            'i' | 'y' => Some(LetterClass::I),
            'o' => Some(LetterClass::O),
            'u' => Some(LetterClass::U),
            'm' | 'b' | 'p' => Some(LetterClass::Mbp),
            'f' | 'v' => Some(LetterClass::Fv),
            'w' | 'q' => Some(LetterClass::W),
            'h' | 'l' | 'r' => None,
            c if c.is_ascii_lowercase() => Some(LetterClass::Wide),
            _ => None,
        }
    }
}

/// Mouth shapes for a word: held letters dropped, repeats collapsed, and at
/// least one shape for any word.
pub fn letter_classes(word: &str) -> Vec<LetterClass> {
    let mut out: Vec<LetterClass> = Vec::new();
    for class in word.chars().filter_map(LetterClass::of) {
        if out.last() != Some(&class) {
            out.push(class);
        }
    }
    if out.is_empty() {
        out.push(LetterClass::Wide);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedWord {
    pub text: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

pub fn lip_sync(words: &[TimedWord], style: &StyleFile) -> Vec<VisemeEvent> {
    let mut events = Vec::new();
    for word in words {
        let span = word.end_ms.saturating_sub(word.start_ms);
        let mut classes = letter_classes(&word.text);
        let cap = ((span / MIN_VISEME_MS) as usize).max(1);
        if classes.len() > cap {
            let n = classes.len();
            classes = (0..cap).map(|i| classes[i * n / cap]).collect();
        }
        let n = classes.len() as u64;
        for (i, class) in classes.into_iter().enumerate() {
            let i = i as u64;
            let onset = word.start_ms + span * i / n;
            let end = word.start_ms + span * (i + 1) / n;
            events.push(VisemeEvent {
                onset_ms: onset,
                viseme: style.viseme_for(class),
                duration_ms: end - onset,
            });
        }
    }
    events
}
