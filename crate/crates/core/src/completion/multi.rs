//! Model continuations, parsed under format control and validated.

use std::sync::Arc;

use crate::context::ProfileStore;
use crate::frame::Environment;
use crate::script::{detect_with, parse_partial, tokenize, CodeContext, ColumnRef, NodeKind, RuleSet, Stmt, TokenKind};

use super::item::{CompletionItem, ItemKind, Provenance, Target};
use super::model::{generate_with_timeout, ModelClient};
use super::prompt::Prompt;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultiOutcome {
    pub items: Vec<CompletionItem>,
    pub diagnostics: Vec<String>,
}

/// Lines of the first fenced block; prose without a fence is rejected.
pub fn parse_continuations(raw: &str) -> Result<Vec<String>, String> {
    let mut lines = raw.lines();
    if !lines.by_ref().any(|l| l.trim_start().starts_with("```")) {
        return Err("model output has no code block".into());
    }
    Ok(lines
        .take_while(|l| !l.trim_start().starts_with("```"))
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

/// Why a continuation cannot extend the statement, if it cannot.
fn reject_reason(partial: &str, line: &str, ctx: &CodeContext) -> Option<String> {
    let combined = format!("{partial}{line}");
    if let Err(e) = parse_partial(&combined) {
        return Some(e.to_string());
    }
    // A continuation may leave the statement open, but not a new literal half-typed.
    let open = |s: &str| tokenize(s).iter().filter(|t| t.kind == TokenKind::String && !t.terminated).count();
    if open(&combined) > open(partial) {
        return Some("continuation leaves a string open".into());
    }
    let next = detect_with(&combined, RuleSet::builtin());
    if next.operator.is_some() && next.operator == ctx.operator && next.filled_slots.len() < ctx.filled_slots.len() {
        return Some("continuation drops filled slots".into());
    }
    None
}

/// Names in `statement` that no live table provides.
pub fn unknown_names(statement: &str, env: &Environment, store: &ProfileStore) -> Vec<String> {
    let ctx = detect_with(statement, RuleSet::builtin());
    let created = assigned_column(statement);
    let mut out = Vec::new();
    for t in &ctx.mentioned_tables {
        if !env.contains(t) {
            out.push(t.clone());
        }
    }
    for c in &ctx.mentioned_columns {
        if created.as_ref() == Some(c) || !env.contains(&c.table) {
            continue;
        }
        if !store.has_column(&c.table, &c.column) {
            out.push(format!("{}[\"{}\"]", c.table, c.column));
        }
    }
    out
}

/// `t["c"]` on the left of an assignment names a column that may not exist yet.
fn assigned_column(statement: &str) -> Option<ColumnRef> {
    let Ok(Stmt::Assign { target, .. }) = parse_partial(statement) else {
        return None;
    };
    let NodeKind::Subscript { value, index: Some(ix), .. } = &target.kind else {
        return None;
    };
    Some(ColumnRef::new(value.name()?, ix.str_value()?))
}

pub fn multi_token_candidates(
    prompt: &Prompt,
    client: &Arc<dyn ModelClient>,
    ctx: &CodeContext,
    env: &Environment,
    store: &ProfileStore,
    max_items: usize,
    max_tokens: u32,
) -> MultiOutcome {
    let mut outcome = MultiOutcome::default();
    let raw = match generate_with_timeout(client, prompt, max_tokens) {
        Ok(r) => r,
        Err(e) => {
            outcome.diagnostics.push(e.to_string());
            return outcome;
        }
    };
    let lines = match parse_continuations(&raw) {
        Ok(l) => l,
        Err(e) => {
            outcome.diagnostics.push(e);
            return outcome;
        }
    };
    let partial = &ctx.partial_statement;
    for line in lines {
        if outcome.items.len() >= max_items {
            break;
        }
        if let Some(why) = reject_reason(partial, &line, ctx) {
            outcome.diagnostics.push(format!("dropped `{line}`: {why}"));
            continue;
        }
        let combined = format!("{partial}{line}");
        let mentions = detect_with(&combined, RuleSet::builtin());
        let unknown = unknown_names(&combined, env, store);
        outcome.items.push(CompletionItem {
            label: line.trim().to_string(),
            text: line,
            replace_len: 0,
            kind: ItemKind::MultiToken,
            target: Target::Code,
            score: 0.0,
            provenance: Provenance::Model,
            mentioned_tables: mentions.mentioned_tables,
            mentioned_columns: mentions.mentioned_columns,
            completes_operation: false,
            verified: unknown.is_empty(),
            unverified_names: unknown,
        });
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::model::MockModel;
    use crate::context::{refresh, ProfileOptions};
    use crate::frame::{read_csv_str, CsvOptions};
    use crate::script::Mode;

    fn setup() -> (Environment, ProfileStore) {
        let mut env = Environment::new();
        let o = CsvOptions::default();
        env.bind("movies", read_csv_str("netflixTitle,kind\nA,x\n", "movies", &o).unwrap());
        env.bind("ratings", read_csv_str("title,votes\nA,10\n", "ratings", &o).unwrap());
        env.bump();
        let store = refresh(&env, &ProfileStore::new(), &ProfileOptions::default());
        (env, store)
    }

    fn run(partial: &str, response: &str) -> MultiOutcome {
        let (env, store) = setup();
        let ctx = detect_with(partial, RuleSet::builtin());
        let client: Arc<dyn ModelClient> = Arc::new(MockModel::new(vec![super::super::model::Fixture {
            partial: partial.into(),
            response: response.into(),
            delay_ms: 0,
        }]));
        let prompt = Prompt {
            code_context: "c".into(),
            data_context: "d".into(),
            task_instruction: "t".into(),
            format_control: "f".into(),
            statement: partial.into(),
        };
        multi_token_candidates(&prompt, &client, &ctx, &env, &store, 2, 64)
    }

    #[test]
    fn merge_continuation_is_accepted() {
        let out = run("joined = movies.merge(ratings", "```\n, left_on=\"netflixTitle\", right_on=\"title\")\n```");
        assert_eq!(out.items.len(), 1);
        assert!(out.items[0].verified);
        assert_eq!(detect_with("joined = movies.merge(ratings", RuleSet::builtin()).mode, Mode::InSignature);
    }

    #[test]
    fn prose_is_rejected() {
        let out = run("movies.merge(ratings", "You could merge on the title.");
        assert!(out.items.is_empty());
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn unknown_columns_are_flagged_not_dropped() {
        let out = run("movies.merge(ratings", "```\n, left_on=\"nope\", right_on=\"title\")\n```");
        assert_eq!(out.items.len(), 1);
        assert!(!out.items[0].verified);
        assert_eq!(out.items[0].unverified_names, ["movies[\"nope\"]"]);
    }

    #[test]
    fn invalid_lines_are_dropped() {
        let out = run("movies.merge(ratings", "```\n))\n, on=\"title\")\n, how=\"left\", on=\"title\")\n, on=\"x\")\n```");
        assert_eq!(out.items.len(), 2);
        assert!(out.diagnostics[0].contains("dropped `))`"));
    }
}
