//! The per-tick commentary loop and the file-producing replay driver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::Path;

use log::{debug, info, warn};
use thiserror::Error;

use crate::behavior::{activate_behaviors, arbitrate, expand, BehaviorError};
use crate::emotion::{EmotionError, EmotionPool};
use crate::feed::{parse_game_log, should_interrupt, FactBoard, FeedError, GameFact, TickUpdate};
use crate::profile::{load_profile, CharacterProfile, ProfileErrors};
use crate::seeml::{
    apply_directives, load_style, merge_tags, verify_and_split, DirectiveError, OutputBundle,
    StyleError, StyleFile, VerifyError,
};
use crate::textgen::{instantiate, select_template, TextgenError, UsageHistory};

pub const COMMENTARY_HEADER: &str = "#byrne-commentary v1";
pub const EMOTIONS_HEADER: &str = "#byrne-emotions v1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error(transparent)]
    Emotion(#[from] EmotionError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Directive(#[from] DirectiveError),
    #[error(transparent)]
    Textgen(#[from] TextgenError),
    #[error("verifying utterance for {fact}: {source}")]
    Verify {
        fact: String,
        #[source]
        source: VerifyError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    UtteranceStart,
    UtteranceEnd,
    Interrupted,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::UtteranceStart => "START",
            EventKind::UtteranceEnd => "END",
            EventKind::Interrupted => "INTERRUPTED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommentaryEvent {
    /// Game time in seconds.
    pub time: f64,
    pub kind: EventKind,
    /// 1-based utterance number.
    pub utterance: usize,
    /// Identity of the fact being reported.
    pub fact: String,
    pub template: Option<String>,
    /// Offset into the utterance, in ms, at which it stopped.
    pub cut_ms: Option<u64>,
    /// Present on `UtteranceStart`.
    pub bundle: Option<OutputBundle>,
}

impl CommentaryEvent {
    pub fn trace_line(&self) -> String {
        let mut line = format!(
            "{:.3}\t{}\tutt-{}",
            self.time,
            self.kind.label(),
            self.utterance
        );
        match (&self.bundle, self.cut_ms) {
            (Some(b), _) => {
                let template = self.template.as_deref().unwrap_or("-");
                let _ = write!(line, "\t{template}\t{}ms", b.total_duration_ms);
            }
            (None, Some(cut)) => {
                let _ = write!(line, "\tat {cut}ms");
            }
            (None, None) => {}
        }
        let _ = write!(line, "\t{}", self.fact);
        line
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InProgress {
    pub utterance: usize,
    pub fact: GameFact,
    pub started_at: f64,
    pub total_ms: u64,
    pub phrase_ends_ms: Vec<u64>,
    /// Set once a more relevant fact arrives: the phrase boundary at which
    /// the utterance stops.
    pub cut_ms: Option<u64>,
}

impl InProgress {
    fn stop_ms(&self) -> u64 {
        self.cut_ms.unwrap_or(self.total_ms)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineState {
    pub board: FactBoard,
    pub pool: EmotionPool,
    pub history: UsageHistory,
    pub in_progress: Option<InProgress>,
    pub clock: Option<f64>,
    pub seed: u64,
    /// Facts already uttered or skipped.
    pub reported: BTreeSet<String>,
    pub utterances: usize,
}

impl PipelineState {
    pub fn new(seed: u64) -> Self {
        PipelineState {
            seed,
            ..Self::default()
        }
    }

    /// The board without facts that were already dealt with, except the
    /// one currently being uttered.
    fn fresh_board(&self) -> FactBoard {
        let current = self.in_progress.as_ref().map(|u| u.fact.identity());
        self.board.filtered(|f| {
            let id = f.identity();
            current.as_deref() == Some(id.as_str()) || !self.reported.contains(&id)
        })
    }
}

fn elapsed_ms(started_at: f64, now: f64) -> u64 {
    ((now - started_at) * 1000.0).round().max(0.0) as u64
}

/// One clock tick: board, emotions, then commentary.
pub fn step(
    state: &mut PipelineState,
    update: &TickUpdate,
    profile: &CharacterProfile,
    style: &StyleFile,
) -> Result<Vec<CommentaryEvent>, PipelineError> {
    let now = update.tick_time;
    state.board.apply_tick(update)?;
    state.clock = Some(now);
    state
        .pool
        .apply_rules(&state.board, &profile.statics, &profile.emotion_rules, now)?;
    state.pool.decay(now);

    let mut events = Vec::new();
    if let Some(current) = &mut state.in_progress {
        let elapsed = elapsed_ms(current.started_at, now);
        if current.cut_ms.is_none() && elapsed < current.total_ms {
            let candidates = {
                let reported = &state.reported;
                let id = current.fact.identity();
                state
                    .board
                    .filtered(|f| f.identity() == id || !reported.contains(&f.identity()))
            };
            if should_interrupt(&current.fact, &candidates) {
                let cut = current
                    .phrase_ends_ms
                    .iter()
                    .copied()
                    .find(|&end| end >= elapsed && end < current.total_ms);
                if let Some(cut) = cut {
                    debug!("utt-{} will stop at {cut}ms", current.utterance);
                    current.cut_ms = Some(cut);
                }
            }
        }
        if elapsed >= current.stop_ms() {
            let stop = current.stop_ms();
            events.push(CommentaryEvent {
                time: current.started_at + stop as f64 / 1000.0,
                kind: if current.cut_ms.is_some() {
                    EventKind::Interrupted
                } else {
                    EventKind::UtteranceEnd
                },
                utterance: current.utterance,
                fact: current.fact.identity(),
                template: None,
                cut_ms: Some(stop),
                bundle: None,
            });
            state.in_progress = None;
        }
    }

    if state.in_progress.is_none() {
        if let Some(event) = start_utterance(state, profile, style, now)? {
            events.push(event);
        }
    }
    Ok(events)
}

fn start_utterance(
    state: &mut PipelineState,
    profile: &CharacterProfile,
    style: &StyleFile,
    now: f64,
) -> Result<Option<CommentaryEvent>, PipelineError> {
    loop {
        let board = state.fresh_board();
        let Some(fact) = board.select_fact().cloned() else {
            return Ok(None);
        };
        let identity = fact.identity();
        state.reported.insert(identity.clone());
        let (template, bindings) = match select_template(
            &fact,
            &profile.templates,
            &profile.statics,
            &state.history,
            profile.lambda_use_penalty,
            now,
        ) {
            Ok(found) => found,
            Err(e @ TextgenError::NoTemplate { .. }) => {
                warn!("skipping {identity}: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let doc = instantiate(template, &bindings, &profile.name_table)?;
        let winners = arbitrate(activate_behaviors(
            &profile.behaviors,
            &state.pool,
            &profile.statics,
            now,
        ));
        let directives = expand(&winners, &profile.behaviors)?;
        let doc = merge_tags(&apply_directives(&doc, &directives)?);
        let bundle = verify_and_split(&doc, style).map_err(|source| PipelineError::Verify {
            fact: identity.clone(),
            source,
        })?;
        state.history.record_usage(&template.id, now);
        state.utterances += 1;
        info!(
            "utt-{} {} via {} ({} behaviors)",
            state.utterances,
            identity,
            template.id,
            winners.len()
        );
        state.in_progress = Some(InProgress {
            utterance: state.utterances,
            fact,
            started_at: now,
            total_ms: bundle.total_duration_ms,
            phrase_ends_ms: bundle.phrase_ends_ms.clone(),
            cut_ms: None,
        });
        return Ok(Some(CommentaryEvent {
            time: now,
            kind: EventKind::UtteranceStart,
            utterance: state.utterances,
            fact: identity,
            template: Some(template.id.clone()),
            cut_ms: None,
            bundle: Some(bundle),
        }));
    }
}

/// The pool as one trace block: a line per structure, or a single
/// placeholder line when empty.
pub fn emotions_snapshot(pool: &EmotionPool, now: f64) -> String {
    let mut out = String::new();
    if pool.is_empty() {
        let _ = writeln!(out, "{now:.3}\t-");
    }
    for s in pool.structures() {
        let target = s
            .target
            .as_ref()
            .map_or("nil".to_string(), ToString::to_string);
        let _ = writeln!(
            out,
            "{now:.3}\t{}\t{target}\t{}\t{:.3}",
            s.kind,
            s.cause,
            s.intensity_at(now).unwrap_or(0.0)
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayConfig {
    pub tick_seconds: f64,
    pub seed: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            tick_seconds: 1.0,
            seed: 0,
        }
    }
}

/// Everything a replay produces, keyed by output file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub events: Vec<CommentaryEvent>,
    pub files: BTreeMap<String, String>,
}

/// Hard limit on filler ticks after the log ends.
const MAX_TRAILING_TICKS: usize = 100_000;

fn round_time(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// Runs the loop over a parsed log, inserting empty ticks every
/// `tick_seconds` between log ticks and after the last one until the
/// commentator falls silent.
pub fn replay(
    ticks: &[TickUpdate],
    profile: &CharacterProfile,
    style: &StyleFile,
    config: ReplayConfig,
) -> Result<Replay, PipelineError> {
    let mut state = PipelineState::new(config.seed);
    let mut events = Vec::new();
    let mut emotions = format!("{EMOTIONS_HEADER}\n");
    let dt = if config.tick_seconds > 0.0 {
        config.tick_seconds
    } else {
        1.0
    };

    let mut run = |state: &mut PipelineState, update: &TickUpdate| -> Result<(), PipelineError> {
        events.extend(step(state, update, profile, style)?);
        emotions.push_str(&emotions_snapshot(&state.pool, update.tick_time));
        Ok(())
    };

    for update in ticks {
        if let Some(mut t) = state.clock {
            loop {
                t = round_time(t + dt);
                if t >= update.tick_time - 1e-9 {
                    break;
                }
                run(&mut state, &TickUpdate::empty(t))?;
            }
        }
        run(&mut state, update)?;
    }
    let mut trailing = 0;
    while let (Some(t), Some(_)) = (state.clock, &state.in_progress) {
        if trailing >= MAX_TRAILING_TICKS {
            break;
        }
        trailing += 1;
        run(&mut state, &TickUpdate::empty(round_time(t + dt)))?;
    }

    let mut files = BTreeMap::new();
    let mut commentary = format!("{COMMENTARY_HEADER} seed={}\n", config.seed);
    for e in &events {
        commentary.push_str(&e.trace_line());
        commentary.push('\n');
        if let Some(b) = &e.bundle {
            files.insert(
                format!("utt-{}.sable", e.utterance),
                format!("{}\n", b.speech_script),
            );
            files.insert(format!("utt-{}.facs", e.utterance), b.timeline_text());
        }
    }
    files.insert("commentary.trace".into(), commentary);
    files.insert("emotions.trace".into(), emotions);
    Ok(Replay { events, files })
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("game log {path}: {source}")]
    Log {
        path: String,
        #[source]
        source: FeedError,
    },
    #[error("character {path}:\n{source}")]
    Profile {
        path: String,
        #[source]
        source: ProfileErrors,
    },
    #[error("style {path}: {source}")]
    Style {
        path: String,
        #[source]
        source: StyleError,
    },
    #[error(transparent)]
    Runtime(#[from] PipelineError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ReplayError {
    /// 1 for input that fails to load, 2 for failures during the replay.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReplayError::Read { .. }
            | ReplayError::Log { .. }
            | ReplayError::Profile { .. }
            | ReplayError::Style { .. } => 1,
            ReplayError::Runtime(_) | ReplayError::Write { .. } => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, ReplayError> {
    std::fs::read_to_string(path).map_err(|source| ReplayError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Loads the three inputs, replays, and writes every output file into
/// `out_dir`.
pub fn run_replay(
    log_path: &Path,
    profile_path: &Path,
    style_path: &Path,
    out_dir: &Path,
    config: ReplayConfig,
) -> Result<Replay, ReplayError> {
    let ticks = parse_game_log(&read(log_path)?).map_err(|source| ReplayError::Log {
        path: log_path.display().to_string(),
        source,
    })?;
    let profile = load_profile(&read(profile_path)?).map_err(|source| ReplayError::Profile {
        path: profile_path.display().to_string(),
        source,
    })?;
    let style = load_style(&read(style_path)?).map_err(|source| ReplayError::Style {
        path: style_path.display().to_string(),
        source,
    })?;
    let result = replay(&ticks, &profile, &style, config)?;
    let write_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReplayError::Write { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(write_err(out_dir))?;
    for (name, content) in &result.files {
        let path = out_dir.join(name);
        std::fs::write(&path, content).map_err(write_err(&path))?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeml::load_style;

    const STYLE: &str = "\
[expressions]
smile = AU6:0.6 AU12:0.9
sadness = AU1:0.7 AU15:0.6
anger = AU4:0.8 AU23:0.7
fear = AU1:0.6 AU5:0.8
disgust = AU9:0.8 AU10:0.5
surprise = AU1:0.8 AU2:0.8
[speech]
words_per_minute = 180
";

    const PROFILE: &str = r#"
(static (supports team: a))
(emotion-rule (pre (supports team: ?t) (pass from: ?p))
  (add (type: interest intensity: 5 cause: (pass from: ?p) decay: 1/t)))
(behavior id: grin group: face (motivated-by interest)
  (directives (expr name: smile level: 0.8 scope: utterance)))
(template id: pass (pre (pass from: ?x to: ?y))
  (text "<su><seg>?x finds ?y</seg> <seg>with a lovely ball</seg></su>"))
(template id: ball (pre (has-ball player: ?x))
  (text "<su><seg>?x has it</seg> <seg>and looks up</seg> <seg>for options</seg></su>"))
"#;

    fn run(log: &str) -> Replay {
        replay(
            &parse_game_log(log).unwrap(),
            &load_profile(PROFILE).unwrap(),
            &load_style(STYLE).unwrap(),
            ReplayConfig::default(),
        )
        .unwrap()
    }

    fn kinds(r: &Replay) -> Vec<(EventKind, usize)> {
        r.events.iter().map(|e| (e.kind, e.utterance)).collect()
    }

    #[test]
    fn sample_tick_starts_with_the_pass() {
        let r = run("(tick 120)\n\
            (fact (pass from: a1 to: a2 begintime: 120 endtime: 125) relevance: 10)\n\
            (fact (has-ball player: a2) relevance: 5)\n\
            (fact (move player: b1) relevance: 3)\n");
        let first = &r.events[0];
        assert_eq!(first.kind, EventKind::UtteranceStart);
        assert!(first.fact.starts_with("(pass"));
        let script = &r.files["utt-1.sable"];
        assert!(script.contains("a1 finds a2"));
        assert!(!script.contains("EXPR"));
        assert!(r.files["utt-1.facs"].contains("\tAU\t12\t"));
        // the move fact has no template and is skipped
        assert_eq!(
            r.events
                .iter()
                .filter(|e| e.kind == EventKind::UtteranceStart)
                .count(),
            2
        );
    }

    #[test]
    fn quiet_tick_has_no_events() {
        let mut state = PipelineState::new(0);
        let profile = load_profile(PROFILE).unwrap();
        let style = load_style(STYLE).unwrap();
        let events = step(&mut state, &TickUpdate::empty(3.0), &profile, &style).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn more_relevant_fact_interrupts_at_phrase_end() {
        let r = run("(tick 10)\n(fact (has-ball player: a2) relevance: 5)\n\
                     (tick 11)\n(fact (pass from: a2 to: a3) relevance: 10)\n");
        assert_eq!(
            kinds(&r),
            vec![
                (EventKind::UtteranceStart, 1),
                (EventKind::Interrupted, 1),
                (EventKind::UtteranceStart, 2),
                (EventKind::UtteranceEnd, 2),
            ]
        );
        let cut = &r.events[1];
        // three words per phrase at 333 ms a word
        // the first phrase (three words at 333 ms each) has just finished
        assert_eq!(cut.cut_ms, Some(1000));
        assert_eq!(cut.time, 11.0);
        assert_eq!(r.events[2].time, 11.0);
    }

    #[test]
    fn traces_have_headers_and_seed() {
        let r = replay(
            &parse_game_log("(tick 1)\n(fact (has-ball player: a2) relevance: 5)\n").unwrap(),
            &load_profile(PROFILE).unwrap(),
            &load_style(STYLE).unwrap(),
            ReplayConfig {
                tick_seconds: 0.5,
                seed: 42,
            },
        )
        .unwrap();
        assert!(r.files["commentary.trace"].starts_with("#byrne-commentary v1 seed=42\n"));
        assert!(r.files["emotions.trace"].starts_with("#byrne-emotions v1\n1.000\t-\n1.500\t-\n"));
        let end = r.events.last().unwrap();
        assert_eq!(end.kind, EventKind::UtteranceEnd);
        assert!((end.time - 3.667).abs() < 1e-9);
    }
}
