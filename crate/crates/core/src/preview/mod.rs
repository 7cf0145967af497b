//! Data-view highlights and transformation previews for the statement being edited.

mod form;
mod highlight;

pub use form::{
    classify_form, completed_statement, compute_preview, preview_ready, preview_statement, sample_env, ErrorTag, MatchSpan,
    PreviewBody, PreviewForm, PreviewResult, DEFAULT_PREVIEW_ROWS,
};
pub use highlight::{compute_highlight, HighlightSpec, Style};
