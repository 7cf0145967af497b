use serde::Serialize;

use crate::script::ColumnRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    SingleToken,
    MultiToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Rule,
    Model,
}

/// What a single-token item names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Column,
    Table,
    Value,
    Text,
    Choice,
    Comparator,
    Keyword,
    Code,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionItem {
    /// Inserted at the cursor in place of the last `replace_len` characters.
    pub text: String,
    pub replace_len: usize,
    pub label: String,
    pub kind: ItemKind,
    pub target: Target,
    pub score: f64,
    pub provenance: Provenance,
    pub mentioned_tables: Vec<String>,
    pub mentioned_columns: Vec<ColumnRef>,
    /// Accepting the item leaves an executable statement.
    pub completes_operation: bool,
    /// Every table and column the item names exists.
    pub verified: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unverified_names: Vec<String>,
}

impl CompletionItem {
    pub fn rule(text: impl Into<String>, label: impl Into<String>, target: Target, replace_len: usize) -> Self {
        Self {
            text: text.into(),
            replace_len,
            label: label.into(),
            kind: ItemKind::SingleToken,
            target,
            score: 0.0,
            provenance: Provenance::Rule,
            mentioned_tables: Vec::new(),
            mentioned_columns: Vec::new(),
            completes_operation: false,
            verified: true,
            unverified_names: Vec::new(),
        }
    }

    /// The partial statement with this item accepted.
    pub fn apply(&self, partial: &str) -> String {
        apply_text(partial, &self.text, self.replace_len)
    }
}

pub fn apply_text(partial: &str, text: &str, replace_len: usize) -> String {
    let keep = partial.chars().count().saturating_sub(replace_len);
    let cut = partial.char_indices().nth(keep).map_or(partial.len(), |(i, _)| i);
    format!("{}{text}", &partial[..cut])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_replaces_the_prefix() {
        let it = CompletionItem::rule("Country\"", "Country", Target::Column, 1);
        assert_eq!(it.apply("df.sort_values(by=\"C"), "df.sort_values(by=\"Country\"");
        assert_eq!(apply_text("é", "x", 1), "x");
        assert_eq!(apply_text("ab", "c", 0), "abc");
    }
}
