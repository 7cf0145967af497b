//! Data contexts: profiles of live tables and their selection per statement.

mod profile;
mod sample;
mod select;
mod store;

use thiserror::Error;

pub use profile::{
    profile_column, profile_table, sortedness, value_format, ColumnProfile, Frequency, ProfileOptions, RowSample,
    Sortedness, TableContexts, TableProfile, ValueRange, SAMPLE_POINTS,
};
pub use sample::{distinct_values, sample_ordered, sample_values, stream_seed, DEFAULT_SAMPLE_CAP};
pub use select::{select_contexts, select_with, ContextLevel, ContextMatrix, DataContextBundle, Rationale, Supplement};
pub use store::{refresh, ProfileStore};

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("invalid context matrix: {0}")]
    Matrix(String),
}
