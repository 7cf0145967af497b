use std::collections::BTreeMap;

use serde::Serialize;

use crate::completion::CompletionItem;
use crate::frame::Environment;
use crate::script::{detect_with, CodeContext, ColumnRef, RuleSet};

/// Style names the client maps to its palette.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Relevant,
    Preview,
    Deleted,
}

/// What the data view shows for the statement being edited.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct HighlightSpec {
    /// Tables to unfold, in order of first mention.
    pub expand_tables: Vec<String>,
    pub collapse_others: bool,
    pub show_sample_rows: BTreeMap<String, bool>,
    pub highlight_columns: Vec<ColumnRef>,
    /// Highlighted columns past the client's visible width.
    pub anchored_columns: Vec<ColumnRef>,
    /// Mentioned names the environment does not have, spelled as in code.
    pub missing: Vec<String>,
    pub style: Option<Style>,
}

impl HighlightSpec {
    pub fn is_empty(&self) -> bool {
        self.expand_tables.is_empty() && self.missing.is_empty()
    }
}

#[derive(Debug, Default)]
struct Mentions {
    tables: Vec<String>,
    columns: Vec<ColumnRef>,
}

impl Mentions {
    fn add_table(&mut self, t: &str) {
        if !self.tables.iter().any(|x| x == t) {
            self.tables.push(t.to_string());
        }
    }

    fn add_column(&mut self, c: &ColumnRef) {
        if !self.columns.contains(c) {
            self.columns.push(c.clone());
        }
    }
}

/// Highlight for the partial statement plus, if any, the focused item.
///
/// `visible_columns` is the number of grid columns the client shows without
/// scrolling.
pub fn compute_highlight(
    ctx: &CodeContext,
    focused: Option<&CompletionItem>,
    env: &Environment,
    visible_columns: usize,
) -> HighlightSpec {
    let mut m = Mentions::default();
    let typing = ctx.inside_string_literal.then_some(ctx.prefix.as_str());
    for t in &ctx.mentioned_tables {
        m.add_table(t);
    }
    for c in &ctx.mentioned_columns {
        // The literal under the cursor is a prefix, not yet a name.
        if typing == Some(c.column.as_str()) && !has_column(env, c) {
            continue;
        }
        m.add_column(c);
    }
    if let Some(item) = focused {
        for t in &item.mentioned_tables {
            m.add_table(t);
        }
        for c in &item.mentioned_columns {
            m.add_column(c);
        }
        let accepted = detect_with(&item.apply(&ctx.partial_statement), RuleSet::builtin());
        for t in &accepted.mentioned_tables {
            m.add_table(t);
        }
        for c in &accepted.mentioned_columns {
            m.add_column(c);
        }
    }
    build(m, env, visible_columns)
}

fn has_column(env: &Environment, c: &ColumnRef) -> bool {
    env.get(&c.table).is_some_and(|t| t.column(&c.column).is_some())
}

fn build(m: Mentions, env: &Environment, visible_columns: usize) -> HighlightSpec {
    let mut spec = HighlightSpec {
        collapse_others: true,
        ..HighlightSpec::default()
    };
    let expand = |t: &str, spec: &mut HighlightSpec| {
        if !spec.expand_tables.iter().any(|x| x == t) {
            spec.expand_tables.push(t.to_string());
        }
    };
    for t in &m.tables {
        if env.contains(t) {
            expand(t, &mut spec);
        } else if !spec.missing.contains(t) {
            spec.missing.push(t.clone());
        }
    }
    for c in &m.columns {
        let Some(table) = env.get(&c.table) else {
            continue;
        };
        match table.column_index(&c.column) {
            Some(i) => {
                expand(&c.table, &mut spec);
                spec.highlight_columns.push(c.clone());
                if i >= visible_columns {
                    spec.anchored_columns.push(c.clone());
                }
            }
            None => spec.missing.push(format!("{}[\"{}\"]", c.table, c.column)),
        }
    }
    for t in &spec.expand_tables {
        let shown = spec.highlight_columns.iter().any(|c| &c.table == t);
        spec.show_sample_rows.insert(t.clone(), shown);
    }
    if !spec.highlight_columns.is_empty() {
        spec.style = Some(Style::Relevant);
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::Target;
    use crate::frame::{DataTable, Value};

    fn table(name: &str, cols: &[&str]) -> DataTable {
        DataTable::from_columns(name, cols.iter().map(|c| (*c, vec![Value::from(1i64)]))).unwrap()
    }

    fn env() -> Environment {
        let mut env = Environment::new();
        for t in ["df1", "df2", "df3"] {
            env.bind(t, table(t, &["a", "b"]));
        }
        let wide: Vec<String> = (0..12).map(|i| format!("c{i}")).collect();
        let mut cols: Vec<&str> = vec!["netflixTitle"];
        cols.extend(wide.iter().map(String::as_str));
        cols.push("durationOfTime");
        env.bind("joined", table("joined", &cols));
        env.bump();
        env
    }

    fn spec(partial: &str, focused: Option<(&str, usize)>) -> HighlightSpec {
        let env = env();
        let ctx = detect_with(partial, RuleSet::builtin());
        let item = focused.map(|(t, r)| CompletionItem::rule(t, t, Target::Code, r));
        compute_highlight(&ctx, item.as_ref(), &env, 8)
    }

    #[test]
    fn concat_expands_schemas_only() {
        let s = spec("pd.concat([df1", Some((", df2, df3]", 0)));
        assert_eq!(s.expand_tables, ["df1", "df2", "df3"]);
        assert!(s.show_sample_rows.values().all(|v| !v));
        assert!(s.collapse_others);
        assert!(s.highlight_columns.is_empty());
    }

    #[test]
    fn focused_column_is_anchored_when_off_screen() {
        let s = spec("joined2 = joined[[\"netflixTitle\", \"", Some(("durationOfTime\"", 0)));
        assert_eq!(
            s.highlight_columns,
            [ColumnRef::new("joined", "netflixTitle"), ColumnRef::new("joined", "durationOfTime")]
        );
        assert_eq!(s.anchored_columns, [ColumnRef::new("joined", "durationOfTime")]);
        assert_eq!(s.show_sample_rows["joined"], true);
    }

    #[test]
    fn empty_partial_gives_empty_spec() {
        let s = spec("", None);
        assert!(s.is_empty());
        assert!(s.highlight_columns.is_empty());
    }

    #[test]
    fn unknown_names_are_missing_not_highlighted() {
        let s = spec("df1.merge(dfx", Some((", on=\"zz\")", 0)));
        assert_eq!(s.expand_tables, ["df1"]);
        assert!(s.missing.contains(&"dfx".to_string()));
        assert!(s.highlight_columns.is_empty());
    }

    #[test]
    fn prefix_under_cursor_is_not_missing() {
        let s = spec("df1.sort_values(by=\"a\"", None);
        assert_eq!(s.highlight_columns, [ColumnRef::new("df1", "a")]);
        let s = spec("df1.sort_values(by=\"x", None);
        assert!(s.missing.is_empty());
    }
}
