//! Completion candidates from code and data contexts.

mod item;
mod model;
mod multi;
mod prompt;
mod rank;
mod single;

pub use item::{apply_text, CompletionItem, ItemKind, Provenance, Target};
pub use model::{
    client_from_config, generate_with_timeout, Fixture, HttpModel, MockModel, ModelClient, ModelError, ENDPOINT_VAR, KEY_VAR,
};
pub use multi::{multi_token_candidates, parse_continuations, unknown_names, MultiOutcome};
pub use prompt::{build_prompt, Prompt, NO_TABLES, PROMPT_VERSION};
pub use rank::rank;
pub use single::{single_token_candidates, text_segments, DataView};
