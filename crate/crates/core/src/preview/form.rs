use std::sync::Arc;

use serde::Serialize;

use crate::completion::CompletionItem;
use crate::context::RowSample;
use crate::frame::{apply_transform, eval_predicate, DataTable, Environment, FrameError, OpKind, Operand, Predicate, Source, TransformOp, Value};
use crate::script::{parse_statement, render_source, CodeContext, ScriptError, Statement};

use super::highlight::Style;

pub const DEFAULT_PREVIEW_ROWS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PreviewForm {
    ColumnDiff,
    RowFilter,
    TablePair,
}

/// How an op's effect is best shown.
///
/// Ops that rewrite one existing column are a column diff; assigning a new
/// column changes the table's shape and is shown as a pair.
pub fn classify_form(op: &TransformOp, env: &Environment) -> PreviewForm {
    match op {
        TransformOp::StrReplace { .. } | TransformOp::Astype { .. } => PreviewForm::ColumnDiff,
        TransformOp::Fillna { column: Some(_), .. } => PreviewForm::ColumnDiff,
        TransformOp::AssignColumn { source, column, .. } => {
            if source_columns(source, env).is_some_and(|cols| cols.iter().any(|c| c == column)) {
                PreviewForm::ColumnDiff
            } else {
                PreviewForm::TablePair
            }
        }
        TransformOp::Filter { .. } => PreviewForm::RowFilter,
        TransformOp::Merge { .. }
        | TransformOp::Concat { .. }
        | TransformOp::SelectColumns { .. }
        | TransformOp::SortValues { .. }
        | TransformOp::GroupbyAgg { .. }
        | TransformOp::Fillna { column: None, .. }
        | TransformOp::Rename { .. }
        | TransformOp::DropDuplicates { .. }
        | TransformOp::Head { .. } => PreviewForm::TablePair,
    }
}

fn source_columns(source: &Source, env: &Environment) -> Option<Vec<String>> {
    match source {
        Source::Table(t) => env.get(t).map(|t| t.column_names().into_iter().map(String::from).collect()),
        Source::Op(op) => apply_transform(op, env)
            .ok()
            .map(|t| t.column_names().into_iter().map(String::from).collect()),
    }
}

/// The statement that accepting `focused` would produce.
pub fn completed_statement(ctx: &CodeContext, focused: Option<&CompletionItem>) -> String {
    match focused {
        Some(item) => item.apply(&ctx.partial_statement),
        None => ctx.partial_statement.clone(),
    }
}

fn completed_op(text: &str) -> Result<(Option<String>, TransformOp), ScriptError> {
    let stmt = parse_statement(text)?;
    let target = stmt.target().map(str::to_string);
    match stmt {
        Statement::Assign { op, .. } | Statement::Expr(op) => Ok((target, op)),
        _ => Err(ScriptError::Unsupported("statement is not a transformation".into())),
    }
}

/// True when the statement, with the focused item accepted, is a complete op.
pub fn preview_ready(ctx: &CodeContext, focused: Option<&CompletionItem>) -> bool {
    completed_op(&completed_statement(ctx, focused)).is_ok()
}

/// Character range of a matched literal inside a rendered cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchSpan {
    pub row: usize,
    pub column: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PreviewBody {
    ColumnDiff {
        column: String,
        original: Vec<Value>,
        new: Vec<Value>,
        changed: Vec<bool>,
        /// Rows of the source, for context around the diffed column.
        rows: RowSample,
    },
    RowFilter {
        /// Sample rows the filter removes.
        deleted: Vec<usize>,
        matched: Vec<MatchSpan>,
        rows: RowSample,
        kept: usize,
    },
    TablePair {
        original: RowSample,
        result: RowSample,
        /// Result rows before truncation to the sample size.
        result_rows: usize,
    },
    Diagnostic {
        /// `grammar_error` for statements that fail to parse, `data_error` otherwise.
        tag: ErrorTag,
        message: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        intended: Option<PreviewForm>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTag {
    GrammarError,
    DataError,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreviewResult {
    pub statement: String,
    /// Name the result would be bound to, or the rendered source.
    pub table: String,
    pub style: Option<Style>,
    /// The op reads whole tables, so a truncated input changes more than the row count.
    pub sample_based: bool,
    pub sample_rows: usize,
    /// The result has no rows.
    pub empty: bool,
    #[serde(flatten)]
    pub body: PreviewBody,
}

impl PreviewResult {
    pub fn form(&self) -> Option<PreviewForm> {
        match self.body {
            PreviewBody::ColumnDiff { .. } => Some(PreviewForm::ColumnDiff),
            PreviewBody::RowFilter { .. } => Some(PreviewForm::RowFilter),
            PreviewBody::TablePair { .. } => Some(PreviewForm::TablePair),
            PreviewBody::Diagnostic { .. } => None,
        }
    }

    pub fn is_diagnostic(&self) -> bool {
        matches!(self.body, PreviewBody::Diagnostic { .. })
    }

    fn diagnostic(statement: &str, tag: ErrorTag, message: String, intended: Option<PreviewForm>) -> Self {
        Self {
            statement: statement.to_string(),
            table: String::new(),
            style: None,
            sample_based: false,
            sample_rows: 0,
            empty: true,
            body: PreviewBody::Diagnostic { tag, message, intended },
        }
    }
}

/// First `rows` rows of every table the op reads, under the same names.
pub fn sample_env(op: &TransformOp, env: &Environment, rows: usize) -> (Environment, bool) {
    let mut sample = Environment::new();
    let mut truncated = false;
    for name in op.referenced_tables() {
        if let Some(t) = env.get(&name) {
            truncated |= t.n_rows() > rows;
            sample.bind(&name, t.head(rows));
        }
    }
    (sample, truncated)
}

fn row_sample(table: &DataTable, name: &str, limit: usize) -> RowSample {
    RowSample {
        table: name.to_string(),
        columns: table.column_names().into_iter().map(String::from).collect(),
        rows: (0..table.n_rows().min(limit)).map(|i| table.row(i)).collect(),
    }
}

fn eval_source(source: &Source, env: &Environment) -> Result<Arc<DataTable>, FrameError> {
    match source {
        Source::Table(n) => env.get(n).cloned().ok_or_else(|| FrameError::UnknownTable(n.clone())),
        Source::Op(op) => apply_transform(op, env).map(Arc::new),
    }
}

fn is_whole_table(kind: OpKind) -> bool {
    matches!(
        kind,
        OpKind::Merge | OpKind::Concat | OpKind::SortValues | OpKind::GroupbyAgg | OpKind::DropDuplicates
    )
}

/// Preview of the completed statement, computed on the first `rows` rows
/// of each input. Failures come back as a diagnostic body.
pub fn compute_preview(ctx: &CodeContext, focused: Option<&CompletionItem>, env: &Environment, rows: usize) -> PreviewResult {
    preview_statement(&completed_statement(ctx, focused), env, rows)
}

pub fn preview_statement(statement: &str, env: &Environment, rows: usize) -> PreviewResult {
    let (target, op) = match completed_op(statement) {
        Ok(x) => x,
        Err(e) => return PreviewResult::diagnostic(statement, ErrorTag::GrammarError, e.to_string(), None),
    };
    let form = classify_form(&op, env);
    match build(&op, form, env, rows) {
        Ok((body, truncated, empty)) => PreviewResult {
            statement: statement.to_string(),
            table: target.unwrap_or_else(|| render_source(op.primary_source())),
            style: Some(match form {
                PreviewForm::RowFilter => Style::Deleted,
                _ => Style::Preview,
            }),
            sample_based: truncated && is_whole_table(op.kind()),
            sample_rows: rows,
            empty,
            body,
        },
        Err(e) => {
            let tag = if e.is_data_error() { ErrorTag::DataError } else { ErrorTag::GrammarError };
            PreviewResult::diagnostic(statement, tag, e.to_string(), Some(form))
        }
    }
}

fn build(op: &TransformOp, form: PreviewForm, env: &Environment, rows: usize) -> Result<(PreviewBody, bool, bool), FrameError> {
    let (sample, truncated) = sample_env(op, env, rows);
    let source_name = render_source(op.primary_source());
    let source = eval_source(op.primary_source(), &sample)?;
    let result = apply_transform(op, &sample)?;
    let empty = result.n_rows() == 0;
    let body = match form {
        PreviewForm::ColumnDiff => {
            let column = diffed_column(op).expect("column forms name their column");
            let original = source.require(column)?.values().to_vec();
            let new = result.require(column)?.values().to_vec();
            let changed = original.iter().zip(&new).map(|(a, b)| a != b).collect();
            PreviewBody::ColumnDiff {
                column: column.to_string(),
                original,
                new,
                changed,
                rows: row_sample(&source, &source_name, rows),
            }
        }
        PreviewForm::RowFilter => {
            let TransformOp::Filter { predicate, .. } = op else {
                unreachable!("row filter form is only given to filters")
            };
            let mask = eval_predicate(predicate, &source)?;
            let deleted = mask.iter().enumerate().filter(|(_, m)| !**m).map(|(i, _)| i).collect();
            let mut matched = Vec::new();
            match_spans(predicate, &source, false, &mut matched)?;
            matched.sort_by(|a, b| (a.row, &a.column, a.start).cmp(&(b.row, &b.column, b.start)));
            matched.dedup();
            PreviewBody::RowFilter {
                deleted,
                matched,
                rows: row_sample(&source, &source_name, rows),
                kept: result.n_rows(),
            }
        }
        PreviewForm::TablePair => PreviewBody::TablePair {
            original: row_sample(&source, &source_name, rows),
            result: row_sample(&result, &source_name, rows),
            result_rows: result.n_rows(),
        },
    };
    Ok((body, truncated, empty))
}

fn diffed_column(op: &TransformOp) -> Option<&str> {
    match op {
        TransformOp::StrReplace { column, .. }
        | TransformOp::Astype { column, .. }
        | TransformOp::AssignColumn { column, .. }
        | TransformOp::Fillna { column: Some(column), .. } => Some(column),
        _ => None,
    }
}

/// Cells where a literal-bearing condition holds. Negated conditions mark nothing.
fn match_spans(p: &Predicate, table: &DataTable, negated: bool, out: &mut Vec<MatchSpan>) -> Result<(), FrameError> {
    let whole = |column: &str, out: &mut Vec<MatchSpan>| -> Result<(), FrameError> {
        let col = table.require(column)?;
        for (row, hit) in eval_predicate(p, table)?.into_iter().enumerate() {
            if hit {
                let end = col.values()[row].render().chars().count();
                out.push(MatchSpan {
                    row,
                    column: column.to_string(),
                    start: 0,
                    end,
                });
            }
        }
        Ok(())
    };
    match p {
        Predicate::And(a, b) | Predicate::Or(a, b) => {
            match_spans(a, table, negated, out)?;
            match_spans(b, table, negated, out)
        }
        Predicate::Not(inner) => match_spans(inner, table, !negated, out),
        _ if negated => Ok(()),
        Predicate::Compare { lhs, rhs, .. } => match (lhs, rhs) {
            (Operand::Column(c), Operand::Literal(_)) | (Operand::Literal(_), Operand::Column(c)) => whole(c, out),
            _ => Ok(()),
        },
        Predicate::IsIn { column, .. } => whole(column, out),
        Predicate::StrContains { column, pattern } => {
            let col = table.require(column)?;
            for (row, v) in col.values().iter().enumerate() {
                let Some(s) = v.as_str() else { continue };
                if let Some(at) = s.find(pattern.as_str()) {
                    let start = s[..at].chars().count();
                    out.push(MatchSpan {
                        row,
                        column: column.clone(),
                        start,
                        end: start + pattern.chars().count(),
                    });
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{read_csv_str, CsvOptions};
    use crate::script::{detect_with, RuleSet};

    fn env() -> Environment {
        let mut env = Environment::new();
        let o = CsvOptions::default();
        env.bind(
            "j",
            read_csv_str("t,d\nA,90 minutes\nB,85 minutes\n", "j", &o).unwrap(),
        );
        env.bind(
            "df",
            read_csv_str("Country,n\nUS,1\nUK,2\nUS,3\nFR,4\nUSA,5\n", "df", &o).unwrap(),
        );
        env.bump();
        env
    }

    fn preview(src: &str) -> PreviewResult {
        preview_statement(src, &env(), DEFAULT_PREVIEW_ROWS)
    }

    #[test]
    fn replace_marks_changed_cells() {
        let p = preview("j[\"d\"] = j[\"d\"].str.replace(\" minutes\", \"\")");
        let PreviewBody::ColumnDiff { new, changed, .. } = &p.body else { panic!("{p:?}") };
        assert_eq!(new, &[Value::str("90"), Value::str("85")]);
        assert_eq!(changed, &[true, true]);
        assert_eq!(p.table, "j");
    }

    #[test]
    fn identity_replace_changes_nothing() {
        let p = preview("j[\"d\"] = j[\"d\"].str.replace(\"x\", \"x\")");
        let PreviewBody::ColumnDiff { changed, .. } = &p.body else { panic!() };
        assert!(changed.iter().all(|c| !c));
    }

    #[test]
    fn filter_deletes_complement() {
        let p = preview("df[df[\"Country\"] == \"US\"]");
        let PreviewBody::RowFilter { deleted, matched, kept, .. } = &p.body else { panic!() };
        assert_eq!(deleted, &[1, 3, 4]);
        assert_eq!(*kept, 2);
        assert_eq!(matched.iter().map(|m| m.row).collect::<Vec<_>>(), [0, 2]);
        assert_eq!(p.style, Some(Style::Deleted));
    }

    #[test]
    fn contains_spans_the_pattern() {
        let p = preview("df[df[\"Country\"].str.contains(\"S\")]");
        let PreviewBody::RowFilter { matched, .. } = &p.body else { panic!() };
        assert_eq!(matched[0], MatchSpan { row: 0, column: "Country".into(), start: 1, end: 2 });
    }

    #[test]
    fn forms() {
        let env = env();
        let form = |s: &str| classify_form(&completed_op(s).unwrap().1, &env);
        assert_eq!(form("df.sort_values(by=\"n\")"), PreviewForm::TablePair);
        assert_eq!(form("df[\"n\"] = df[\"n\"] + 1"), PreviewForm::ColumnDiff);
        assert_eq!(form("df[\"m\"] = df[\"n\"] + 1"), PreviewForm::TablePair);
        assert_eq!(form("df.fillna(0)"), PreviewForm::TablePair);
    }

    #[test]
    fn readiness() {
        let ctx = detect_with("df.merge(", RuleSet::builtin());
        assert!(!preview_ready(&ctx, None));
        let ctx = detect_with("df[df[\"n\"] > ", RuleSet::builtin());
        let item = CompletionItem::rule("2]", "2", crate::completion::Target::Value, 0);
        assert!(!preview_ready(&ctx, None));
        assert!(preview_ready(&ctx, Some(&item)));
    }

    #[test]
    fn failures_are_diagnostics() {
        let p = preview("df[df[\"nope\"] > 1]");
        assert!(matches!(p.body, PreviewBody::Diagnostic { tag: ErrorTag::DataError, .. }));
        let p = preview("df[df[");
        assert!(matches!(p.body, PreviewBody::Diagnostic { tag: ErrorTag::GrammarError, .. }));
    }

    #[test]
    fn env_is_untouched() {
        let env = env();
        let before = env.version();
        let names: Vec<String> = env.names().map(String::from).collect();
        preview_statement("df.sort_values(by=\"n\")", &env, 2);
        assert_eq!(env.version(), before);
        assert_eq!(env.names().map(String::from).collect::<Vec<_>>(), names);
    }

    #[test]
    fn truncated_sort_is_sample_based() {
        let p = preview_statement("df.sort_values(by=\"n\")", &env(), 2);
        assert!(p.sample_based);
        let p = preview_statement("df.head(1)", &env(), 2);
        assert!(!p.sample_based);
    }
}
