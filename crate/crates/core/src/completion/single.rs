//! Rule-based completion of the token under the cursor.

use crate::context::{sample_values, stream_seed, ProfileStore};
use crate::frame::{quote, Environment, OpKind, Value};
use crate::script::{tokenize, CodeContext, ColumnRef, Mode, RuleSet, SlotKind, TokenKind};

use super::item::{CompletionItem, Target};

/// Live data the rules draw names and values from.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    pub env: &'a Environment,
    pub store: &'a ProfileStore,
    pub seed: u64,
    pub cap: usize,
}

const COMPARATORS: [(&str, &str); 8] = [
    ("==", " == "),
    ("!=", " != "),
    (">", " > "),
    (">=", " >= "),
    ("<", " < "),
    ("<=", " <= "),
    ("isin", ".isin(["),
    ("str.contains", ".str.contains("),
];

pub fn single_token_candidates(ctx: &CodeContext, view: &DataView<'_>) -> Vec<CompletionItem> {
    let mut out = Vec::new();
    let replace = ctx.prefix.chars().count();
    match ctx.active_kind {
        Some(SlotKind::Column | SlotKind::Columns | SlotKind::Expr) => columns(ctx, view, replace, &mut out),
        Some(SlotKind::Table | SlotKind::Tables) if !ctx.inside_string_literal => tables(ctx, view, replace, &mut out),
        Some(SlotKind::Value) => values(ctx, view, replace, &mut out),
        Some(SlotKind::Text) => texts(ctx, view, replace, &mut out),
        Some(SlotKind::Choice) => choices(ctx, replace, &mut out),
        Some(SlotKind::Comparator) if ctx.prefix.is_empty() && !ctx.inside_string_literal => {
            let spaced = ctx.partial_statement.ends_with(' ');
            for (label, text) in COMPARATORS {
                let text = if spaced { text.trim_start() } else { text };
                out.push(CompletionItem::rule(text, label, Target::Comparator, 0));
            }
        }
        _ => {}
    }
    if !ctx.inside_string_literal && ctx.mode == Mode::InSignature {
        for k in ctx.keyword_candidates.iter().filter(|k| k.starts_with(&ctx.prefix)) {
            out.push(CompletionItem::rule(format!("{k}="), k.clone(), Target::Keyword, replace));
        }
    }
    out
}

/// Table whose columns the active slot draws from.
fn focal_table<'a>(ctx: &'a CodeContext, view: &DataView<'_>) -> Option<&'a str> {
    ctx.slot_table
        .as_deref()
        .filter(|t| view.store.get(t).is_some())
        .or_else(|| ctx.mentioned_tables.iter().map(String::as_str).find(|t| view.store.get(t).is_some()))
}

/// Remainder of a string literal: escaped content plus the closing text.
fn inside_literal(s: &str, quote_char: char, close_with: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c == quote_char => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push_str(close_with);
    out
}

fn close_with(ctx: &CodeContext) -> String {
    if ctx.close_with.is_empty() {
        ctx.quote.unwrap_or('"').to_string()
    } else {
        ctx.close_with.clone()
    }
}

fn columns(ctx: &CodeContext, view: &DataView<'_>, replace: usize, out: &mut Vec<CompletionItem>) {
    let Some(table) = focal_table(ctx, view) else { return };
    let profile = view.store.get(table).expect("focal table has a profile");
    // An empty mask starts with a column access, not a bare name.
    let access = ctx.operator == Some(OpKind::Filter) && matches!(ctx.rule.as_deref(), Some("empty_mask" | "boolean_operand"))
        || ctx.active_kind == Some(SlotKind::Expr);
    for name in profile.table.column_names.iter().filter(|c| c.starts_with(&ctx.prefix)) {
        let text = if ctx.inside_string_literal {
            inside_literal(name, ctx.quote.unwrap_or('"'), &close_with(ctx))
        } else if access {
            format!("{table}[{}]", quote(name))
        } else {
            quote(name)
        };
        let mut item = CompletionItem::rule(text, name.clone(), Target::Column, replace);
        item.mentioned_tables.push(table.to_string());
        item.mentioned_columns.push(ColumnRef::new(table, name));
        out.push(item);
    }
}

fn tables(ctx: &CodeContext, view: &DataView<'_>, replace: usize, out: &mut Vec<CompletionItem>) {
    for name in view.env.names().filter(|n| n.starts_with(&ctx.prefix)) {
        let filled = ctx.filled_slots.0.iter().any(|(_, v)| v == name);
        if filled || view.store.get(name).is_none() {
            continue;
        }
        let mut item = CompletionItem::rule(name, name, Target::Table, replace);
        item.mentioned_tables.push(name.to_string());
        out.push(item);
    }
}

/// Values of the column behind the active slot, if it is live.
fn slot_values<'v>(ctx: &CodeContext, view: &DataView<'v>) -> Option<(String, String, &'v [Value])> {
    let table = ctx.slot_table.as_deref()?;
    let column = ctx.slot_column.as_deref()?;
    let t = view.env.get(table)?;
    let c = t.column(column)?;
    Some((table.to_string(), column.to_string(), c.values()))
}

/// Closing `]` when the innermost open bracket is a subscript or list.
fn bracket_closer(partial: &str) -> &'static str {
    let mut stack = Vec::new();
    for t in tokenize(partial) {
        if t.kind == TokenKind::Bracket {
            if t.is_open_bracket() {
                stack.push(t.text.clone());
            } else {
                stack.pop();
            }
        }
    }
    if stack.last().is_some_and(|b| b == "[") {
        "]"
    } else {
        ""
    }
}

fn values(ctx: &CodeContext, view: &DataView<'_>, replace: usize, out: &mut Vec<CompletionItem>) {
    let Some((table, column, cells)) = slot_values(ctx, view) else { return };
    let seed = stream_seed(view.seed, &format!("{table}\u{1f}{column}"));
    let closer = if ctx.mode == Mode::Pattern { bracket_closer(&ctx.partial_statement) } else { "" };
    for v in sample_values(cells, &ctx.prefix, view.cap, seed) {
        let text = match (&v, ctx.inside_string_literal) {
            (Value::Str(s), true) => inside_literal(s, ctx.quote.unwrap_or('"'), &ctx.quote.unwrap_or('"').to_string()),
            (_, true) => continue,
            (other, false) => other.literal(),
        };
        let mut item = CompletionItem::rule(format!("{text}{closer}"), v.render(), Target::Value, replace);
        item.mentioned_tables.push(table.clone());
        item.mentioned_columns.push(ColumnRef::new(&table, &column));
        out.push(item);
    }
}

/// Non-digit runs of the column's values, e.g. `" minutes"` of `"90 minutes"`.
pub fn text_segments(values: &[Value]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values.iter().filter_map(Value::as_str) {
        let mut cur = String::new();
        for ch in v.chars().chain(std::iter::once('0')) {
            if ch.is_ascii_digit() {
                if !cur.trim().is_empty() && !out.contains(&cur) {
                    out.push(cur.clone());
                }
                cur.clear();
            } else {
                cur.push(ch);
            }
        }
    }
    out
}

fn texts(ctx: &CodeContext, view: &DataView<'_>, replace: usize, out: &mut Vec<CompletionItem>) {
    let Some((table, column, cells)) = slot_values(ctx, view) else { return };
    let seed = stream_seed(view.seed, &format!("{table}\u{1f}{column}"));
    let segments: Vec<Value> = text_segments(cells).into_iter().map(Value::Str).collect();
    for seg in sample_values(&segments, &ctx.prefix, view.cap, seed) {
        let s = seg.as_str().expect("segments are text");
        let text = if ctx.inside_string_literal {
            inside_literal(s, ctx.quote.unwrap_or('"'), &ctx.quote.unwrap_or('"').to_string())
        } else {
            quote(s)
        };
        let mut item = CompletionItem::rule(text, s, Target::Text, replace);
        item.mentioned_tables.push(table.clone());
        item.mentioned_columns.push(ColumnRef::new(&table, &column));
        out.push(item);
    }
}

fn choices(ctx: &CodeContext, replace: usize, out: &mut Vec<CompletionItem>) {
    let (Some(op), Some(slot)) = (ctx.operator, ctx.active_slot.as_deref()) else { return };
    let Some(decl) = RuleSet::builtin().slot(op, slot) else { return };
    for choice in &decl.choices {
        let bare = choice.trim_matches('"');
        if !bare.starts_with(&ctx.prefix) {
            continue;
        }
        let quoted = choice.starts_with('"');
        let text = if ctx.after_dot {
            format!("{bare}()")
        } else if ctx.inside_string_literal {
            inside_literal(bare, ctx.quote.unwrap_or('"'), &close_with(ctx))
        } else {
            choice.clone()
        };
        if ctx.after_dot && !quoted {
            continue;
        }
        out.push(CompletionItem::rule(text, bare, Target::Choice, replace));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{refresh, ProfileOptions};
    use crate::frame::{read_csv_str, CsvOptions};
    use crate::script::detect_with;

    fn view_of(env: &Environment) -> ProfileStore {
        refresh(env, &ProfileStore::new(), &ProfileOptions::default())
    }

    fn env() -> Environment {
        let mut env = Environment::new();
        let csv = "Country,ConfirmedCases,Deaths,durationOfTime\nUnited States,1,0,90 minutes\nUS,2,1,85 minutes\nUnified,3,0,1 minutes\n";
        env.bind("df", read_csv_str(csv, "df", &CsvOptions::default()).unwrap());
        env.bump();
        env
    }

    fn run(src: &str) -> Vec<CompletionItem> {
        let env = env();
        let store = view_of(&env);
        let view = DataView {
            env: &env,
            store: &store,
            seed: 1,
            cap: 50,
        };
        single_token_candidates(&detect_with(src, RuleSet::builtin()), &view)
    }

    fn texts_of(items: &[CompletionItem]) -> Vec<&str> {
        items.iter().map(|i| i.text.as_str()).collect()
    }

    #[test]
    fn c_prefixed_columns() {
        assert_eq!(texts_of(&run("df.sort_values(by=\"C")), ["Country\"", "ConfirmedCases\""]);
    }

    #[test]
    fn empty_prefix_lists_all_columns() {
        assert_eq!(run("df.sort_values(by=\"").len(), 4);
    }

    #[test]
    fn value_prefix() {
        let items = run("df[df[\"Country\"] == \"Un");
        let got = texts_of(&items);
        assert_eq!(got, ["United States\"]", "Unified\"]"]);
    }

    #[test]
    fn replace_pattern_from_segments() {
        assert_eq!(texts_of(&run("df[\"durationOfTime\"].str.replace(\" min")), [" minutes\""]);
    }

    #[test]
    fn groupby_methods_after_dot() {
        let items = run("df.groupby(\"Country\").");
        let got = texts_of(&items);
        assert_eq!(got, ["sum()", "mean()", "min()", "max()", "count()"]);
    }

    #[test]
    fn mask_start_offers_column_access() {
        assert_eq!(run("df[")[0].text, "df[\"Country\"]");
        assert_eq!(run("df[df[\"Country\"]")[0].text, " == ");
    }
}
