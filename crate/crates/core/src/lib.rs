//! A character-driven soccer commentator.
//!
//! Pre-analysed game facts arrive once per clock tick. The character's
//! emotion rules turn them into decaying emotions, emotions activate
//! expressive behaviors, and templates verbalize the most relevant fact.
//! Each utterance leaves as a SABLE speech script plus a timed FACS and
//! viseme timeline for a talking head.

pub mod behavior;
pub mod emotion;
pub mod feed;
pub mod pipeline;
pub mod profile;
pub mod seeml;
pub mod sexpr;
pub mod textgen;
pub mod unify;

pub use behavior::{activate_behaviors, arbitrate, expand, ActivatedBehavior, BehaviorSpec};
pub use emotion::{DecayFunction, EmotionPool, EmotionRule, EmotionStructure, EmotionType};
pub use feed::{parse_game_log, should_interrupt, FactBoard, GameFact, TickUpdate};
pub use pipeline::{
    replay, run_replay, step, CommentaryEvent, EventKind, PipelineState, ReplayConfig,
};
pub use profile::{dump_profile, load_profile, CharacterProfile};
pub use seeml::{
    load_style, merge_tags, parse_seeml, serialize_seeml, verify_and_split, SeemlDocument,
    StyleFile,
};
pub use textgen::{instantiate, select_template, Template, UsageHistory};
