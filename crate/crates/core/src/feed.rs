//! The fact board: pre-analysed game facts with relevance scores, updated
//! once per clock tick.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::sexpr::{read_one, Fact, ReadError, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ReadError },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: fact appears before any (tick …) header")]
    FactBeforeTick { line: usize },
    #[error("tick {got} does not follow {previous}")]
    NonIncreasingTick { previous: f64, got: f64 },
}

/// A ground fact about play and its current relevance.
#[derive(Debug, Clone, PartialEq)]
pub struct GameFact {
    pub fact: Fact,
    pub relevance: f64,
}

impl GameFact {
    pub fn new(fact: Fact, relevance: f64) -> Self {
        GameFact { fact, relevance }
    }

    /// Canonical text of the fact without its relevance; re-scored facts
    /// keep the same identity.
    pub fn identity(&self) -> String {
        self.fact.to_string()
    }

    pub fn begin_time(&self) -> Option<f64> {
        self.fact.get("begintime").and_then(Term::as_number)
    }

    pub fn end_time(&self) -> Option<f64> {
        self.fact.get("endtime").and_then(Term::as_number)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickUpdate {
    pub tick_time: f64,
    pub facts: Vec<GameFact>,
}

impl TickUpdate {
    pub fn empty(tick_time: f64) -> Self {
        TickUpdate {
            tick_time,
            facts: Vec::new(),
        }
    }
}

/// Parses a game log. Lines are `(tick <seconds>)` or
/// `(fact <fact> relevance: <n>)`; `#` starts a comment line.
pub fn parse_game_log(text: &str) -> Result<Vec<TickUpdate>, FeedError> {
    let mut ticks: Vec<TickUpdate> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let form = read_one(trimmed).map_err(|source| FeedError::Parse { line, source })?;
        let malformed = |message: &str| FeedError::Malformed {
            line,
            message: message.to_string(),
        };
        let items = form
            .as_list()
            .ok_or_else(|| malformed("expected (tick …) or (fact …)"))?;
        match items.first().and_then(|s| s.as_atom()) {
            Some("tick") => {
                let time = match items {
                    [_, t] => Term::from_sexp(t)
                        .ok()
                        .and_then(|t| t.as_number())
                        .ok_or_else(|| malformed("tick time must be a number"))?,
                    _ => return Err(malformed("expected (tick <seconds>)")),
                };
                if let Some(prev) = ticks.last() {
                    if time <= prev.tick_time {
                        return Err(FeedError::NonIncreasingTick {
                            previous: prev.tick_time,
                            got: time,
                        });
                    }
                }
                ticks.push(TickUpdate::empty(time));
            }
            Some("fact") => {
                let current = ticks.last_mut().ok_or(FeedError::FactBeforeTick { line })?;
                current.facts.push(parse_fact_line(items, line)?);
            }
            _ => return Err(malformed("expected (tick …) or (fact …)")),
        }
    }
    Ok(ticks)
}

fn parse_fact_line(items: &[crate::sexpr::Sexp], line: usize) -> Result<GameFact, FeedError> {
    let malformed = |message: String| FeedError::Malformed { line, message };
    let (body, trailer) = match items {
        [_, body, rest @ ..] => (body, rest),
        _ => return Err(malformed("expected (fact <fact> relevance: <n>)".into())),
    };
    let mut fact = Fact::from_sexp(body).map_err(|source| FeedError::Parse { line, source })?;
    let inline = fact.take("relevance");
    let outer = match trailer {
        [] => None,
        [k, v] if k.as_keyword() == Some("relevance") => {
            Some(Term::from_sexp(v).map_err(|source| FeedError::Parse { line, source })?)
        }
        _ => {
            return Err(malformed(
                "trailing content after fact; expected relevance: <n>".into(),
            ))
        }
    };
    let relevance = match (inline, outer) {
        (Some(_), Some(_)) => return Err(malformed("relevance given twice".into())),
        (Some(t), None) | (None, Some(t)) => t,
        (None, None) => return Err(malformed("fact has no relevance".into())),
    };
    let relevance = relevance
        .as_number()
        .ok_or_else(|| malformed("relevance must be a number".into()))?;
    if !fact.is_ground() {
        return Err(malformed("game facts may not contain variables".into()));
    }
    Ok(GameFact::new(fact, relevance))
}

/// Facts currently worth talking about, keyed by identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactBoard {
    entries: BTreeMap<String, GameFact>,
    clock: Option<f64>,
}

impl FactBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> Option<f64> {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, identity: &str) -> Option<&GameFact> {
        self.entries.get(identity)
    }

    /// Entries in identity order.
    pub fn iter(&self) -> impl Iterator<Item = &GameFact> {
        self.entries.values()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.entries.values().map(|g| &g.fact)
    }

    /// Inserts or re-scores the update's facts, purges anything below
    /// relevance 1 and advances the clock.
    pub fn apply_tick(&mut self, update: &TickUpdate) -> Result<(), FeedError> {
        if let Some(clock) = self.clock {
            if update.tick_time <= clock {
                return Err(FeedError::NonIncreasingTick {
                    previous: clock,
                    got: update.tick_time,
                });
            }
        }
        for fact in &update.facts {
            self.entries.insert(fact.identity(), fact.clone());
        }
        self.entries.retain(|_, f| f.relevance >= 1.0);
        self.clock = Some(update.tick_time);
        Ok(())
    }

    /// A copy holding only the entries that satisfy `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&GameFact) -> bool) -> FactBoard {
        FactBoard {
            entries: self
                .entries
                .iter()
                .filter(|(_, f)| keep(f))
                .map(|(k, f)| (k.clone(), f.clone()))
                .collect(),
            clock: self.clock,
        }
    }

    /// The most relevant fact. Ties go to the latest end time (facts
    /// without one sort earliest), then to the smallest identity.
    pub fn select_fact(&self) -> Option<&GameFact> {
        self.entries.values().max_by(|a, b| selection_order(a, b))
    }
}

fn selection_order(a: &GameFact, b: &GameFact) -> Ordering {
    let end = |f: &GameFact| f.end_time().unwrap_or(f64::NEG_INFINITY);
    a.relevance
        .total_cmp(&b.relevance)
        .then_with(|| end(a).total_cmp(&end(b)))
        .then_with(|| b.identity().cmp(&a.identity()))
}

/// True when some board entry is strictly more relevant than the current
/// relevance of `reported`. A reported fact that has dropped off the board
/// counts as relevance 0.
pub fn should_interrupt(reported: &GameFact, board: &FactBoard) -> bool {
    let current = board.get(&reported.identity()).map_or(0.0, |f| f.relevance);
    board.iter().any(|f| f.relevance > current)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_TICK: &str = "(tick 120)\n\
        (fact (pass from: a1 to: a2 fromloc: (30 10) toloc: (20 10) begintime: 120 endtime: 125) relevance: 10)\n\
        (fact (has-ball player: a2 location: (20 10)) relevance: 5)\n\
        (fact (move player: b1 fromloc: (5 10) toloc: (10 10) begintime: 115 endtime: 120) relevance: 3)\n";

    fn gf(text: &str, rel: f64) -> GameFact {
        GameFact::new(Fact::from_sexp(&read_one(text).unwrap()).unwrap(), rel)
    }

    fn sample_board() -> FactBoard {
        let ticks = parse_game_log(SAMPLE_TICK).unwrap();
        let mut board = FactBoard::new();
        board.apply_tick(&ticks[0]).unwrap();
        board
    }

    #[test]
    fn parses_single_pass_fact() {
        let ticks = parse_game_log(
            "(tick 120)\n(fact (pass from: a1 to: a2 fromloc: (30 10) toloc: (20 10) begintime: 120 endtime: 125) relevance: 10)",
        )
        .unwrap();
        assert_eq!(ticks.len(), 1);
        assert_eq!(ticks[0].tick_time, 120.0);
        let f = &ticks[0].facts[0];
        assert_eq!(f.fact.predicate, "pass");
        assert_eq!(f.relevance, 10.0);
        assert_eq!(f.begin_time(), Some(120.0));
        assert_eq!(f.end_time(), Some(125.0));
    }

    #[test]
    fn empty_log() {
        assert!(parse_game_log("").unwrap().is_empty());
        assert!(parse_game_log("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn inline_relevance_accepted() {
        let ticks = parse_game_log("(tick 1)\n(fact (has-ball player: a2 relevance: 5))").unwrap();
        assert_eq!(ticks[0].facts[0].relevance, 5.0);
        assert_eq!(ticks[0].facts[0].identity(), "(has-ball player: a2)");
    }

    #[test]
    fn log_errors() {
        assert_eq!(
            parse_game_log("(fact (a) relevance: 1)").unwrap_err(),
            FeedError::FactBeforeTick { line: 1 }
        );
        assert!(matches!(
            parse_game_log("(tick 2)\n(tick 2)").unwrap_err(),
            FeedError::NonIncreasingTick { .. }
        ));
        match parse_game_log("(tick 1)\n\n(fact (a x: 1) relevance: 1").unwrap_err() {
            FeedError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_game_log("(tick 1)\n(fact (a x: 1))").is_err());
        assert!(parse_game_log("(tick 1)\n(fact (a x: ?v) relevance: 2)").is_err());
    }

    #[test]
    fn rescoring_below_one_purges() {
        let mut board = sample_board();
        let mut update = TickUpdate::empty(121.0);
        let mut pass = board.select_fact().unwrap().clone();
        pass.relevance = 0.5;
        update.facts.push(pass.clone());
        board.apply_tick(&update).unwrap();
        assert!(board.get(&pass.identity()).is_none());
        assert_eq!(board.len(), 2);
    }

    #[test]
    fn empty_update_only_moves_clock() {
        let mut board = sample_board();
        let before: Vec<_> = board.iter().cloned().collect();
        board.apply_tick(&TickUpdate::empty(130.0)).unwrap();
        assert_eq!(board.clock(), Some(130.0));
        assert_eq!(board.iter().cloned().collect::<Vec<_>>(), before);
    }

    #[test]
    fn non_monotonic_apply_rejected() {
        let mut board = sample_board();
        assert!(board.apply_tick(&TickUpdate::empty(120.0)).is_err());
    }

    #[test]
    fn selects_pass_from_sample_board() {
        let board = sample_board();
        assert_eq!(board.select_fact().unwrap().fact.predicate, "pass");
        assert!(FactBoard::new().select_fact().is_none());
    }

    #[test]
    fn tie_breaks() {
        let mut board = FactBoard::new();
        let mut u = TickUpdate::empty(1.0);
        u.facts.push(gf("(kick player: a1 endtime: 10)", 4.0));
        u.facts.push(gf("(kick player: a2 endtime: 12)", 4.0));
        u.facts.push(gf("(kick player: a0)", 4.0));
        board.apply_tick(&u).unwrap();
        assert_eq!(
            board.select_fact().unwrap().identity(),
            "(kick player: a2 endtime: 12)"
        );

        let mut board = FactBoard::new();
        let mut u = TickUpdate::empty(1.0);
        u.facts.push(gf("(kick player: b)", 4.0));
        u.facts.push(gf("(kick player: a)", 4.0));
        board.apply_tick(&u).unwrap();
        assert_eq!(board.select_fact().unwrap().identity(), "(kick player: a)");
    }

    #[test]
    fn interruption() {
        let board = sample_board();
        let has_ball = board
            .iter()
            .find(|f| f.fact.predicate == "has-ball")
            .unwrap()
            .clone();
        assert!(should_interrupt(&has_ball, &board));
        let pass = board.select_fact().unwrap().clone();
        assert!(!should_interrupt(&pass, &board));

        let alone = board.filtered(|f| f.identity() == has_ball.identity());
        assert!(!should_interrupt(&has_ball, &alone));
    }

    #[test]
    fn interruption_uses_current_relevance() {
        let mut board = sample_board();
        let has_ball = board
            .iter()
            .find(|f| f.fact.predicate == "has-ball")
            .unwrap()
            .clone();
        let only = board.filtered(|f| f.fact.predicate != "pass");
        assert!(!should_interrupt(&has_ball, &only));
        let mut decayed = has_ball.clone();
        decayed.relevance = 2.0;
        let mut u = TickUpdate::empty(121.0);
        u.facts.push(decayed);
        board.apply_tick(&u).unwrap();
        let without_pass = board.filtered(|f| f.fact.predicate != "pass");
        // move (3) now outranks the decayed has-ball (2)
        assert!(should_interrupt(&has_ball, &without_pass));
    }
}
