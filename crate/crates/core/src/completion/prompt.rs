//! Prompt assembly for multi-token completion.
//!
//! The task instruction and format control wording is original to this
//! project; [`PROMPT_VERSION`] changes whenever it does.

use std::fmt::Write;

use serde::Serialize;

use crate::context::{ColumnProfile, DataContextBundle, RowSample, Sortedness, TableProfile};
use crate::frame::Value;
use crate::script::CodeContext;

pub const PROMPT_VERSION: u32 = 1;

/// Marker used when no data context applies.
pub const NO_TABLES: &str = "(no tables)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prompt {
    pub code_context: String,
    pub data_context: String,
    pub task_instruction: String,
    pub format_control: String,
    /// The statement being completed; not rendered, used to match fixtures.
    pub statement: String,
}

impl Prompt {
    /// The four parts in order, each under a heading.
    pub fn render(&self) -> String {
        format!(
            "## Code\n{}\n\n## Data\n{}\n\n## Task\n{}\n\n## Output format\n{}\n",
            self.code_context, self.data_context, self.task_instruction, self.format_control
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Detail {
    rows: bool,
    frequencies: bool,
}

pub fn build_prompt(complete_code: &str, ctx: &CodeContext, bundle: &DataContextBundle, budget: usize, max_items: usize) -> Prompt {
    let code_context = code_context(complete_code, &ctx.partial_statement);
    let task_instruction = task_instruction(ctx);
    let format_control = format_control(max_items);
    let fixed = code_context.len() + task_instruction.len() + format_control.len();
    // Trim in order: row samples first, then frequency lists; names always stay.
    let mut data_context = String::new();
    for detail in [
        Detail { rows: true, frequencies: true },
        Detail { rows: false, frequencies: true },
        Detail { rows: false, frequencies: false },
    ] {
        data_context = render_bundle(bundle, detail);
        if fixed + data_context.len() <= budget {
            break;
        }
    }
    Prompt {
        code_context,
        data_context,
        task_instruction,
        format_control,
        statement: ctx.partial_statement.clone(),
    }
}

fn code_context(complete_code: &str, partial: &str) -> String {
    let mut out = String::from("Script so far; the cursor is at the end of the last line.\n```\n");
    out.push_str(complete_code);
    out.push_str(partial);
    out.push_str("\n```");
    out
}

fn task_instruction(ctx: &CodeContext) -> String {
    let mut out = String::from("Complete the statement at the cursor in this pandas-like dialect.\n");
    match ctx.operator {
        Some(op) => {
            let _ = write!(out, "The statement is a `{op}` operation ({:?} class).", ctx.operator_class);
            if !ctx.filled_slots.is_empty() {
                let filled: Vec<String> = ctx.filled_slots.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let _ = write!(out, " Already given: {}.", filled.join(", "));
            }
            if !ctx.missing_slots.is_empty() {
                let _ = write!(out, " Still needed: {}.", ctx.missing_slots.join(", "));
            }
            out.push('\n');
        }
        None => out.push_str("The kind of operation is not known yet.\n"),
    }
    out.push_str(
        "Work in steps before answering:\n\
         1. Decide what the statement still needs.\n\
         2. Pick table and column names only from the data section.\n\
         3. Use the value formats and value lists to write literals.\n\
         4. Write the continuation that completes the statement.",
    );
    out
}

fn format_control(max_items: usize) -> String {
    format!(
        "Answer with a single fenced code block and nothing else. Each line in the block is one \
         alternative continuation, inserted at the cursor as is. Do not repeat the code before the \
         cursor. Give at most {max_items} lines."
    )
}

fn render_bundle(bundle: &DataContextBundle, detail: Detail) -> String {
    if bundle.is_empty() {
        return NO_TABLES.to_string();
    }
    let mut out = String::new();
    // Table and row level entries grouped by table, in bundle order.
    let mut tables: Vec<&str> = bundle.table_contexts.iter().map(|t| t.name.as_str()).collect();
    for r in &bundle.row_contexts {
        if !tables.contains(&r.table.as_str()) {
            tables.push(&r.table);
        }
    }
    for name in tables {
        let table = bundle.table_contexts.iter().find(|t| t.name == name);
        let rows = bundle.row_contexts.iter().find(|r| r.table == name).filter(|_| detail.rows);
        table_block(&mut out, name, table, rows);
    }
    for c in &bundle.column_contexts {
        column_block(&mut out, c, detail);
    }
    out.trim_end().to_string()
}

fn table_block(out: &mut String, name: &str, table: Option<&TableProfile>, rows: Option<&RowSample>) {
    let _ = writeln!(out, "Table {name}");
    if let Some(t) = table {
        let _ = writeln!(out, "  shape: {} rows x {} columns", t.shape[0], t.shape[1]);
        let _ = writeln!(out, "  columns: {}", t.column_names.join(", "));
    }
    if let Some(r) = rows {
        let _ = writeln!(out, "  first {} rows:", r.rows.len());
        let _ = writeln!(out, "    {}", r.columns.join(" | "));
        for row in &r.rows {
            let cells: Vec<String> = row.iter().map(cell).collect();
            let _ = writeln!(out, "    {}", cells.join(" | "));
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "<null>".into(),
        other => other.render(),
    }
}

fn column_block(out: &mut String, c: &ColumnProfile, detail: Detail) {
    let sorted = match c.sortedness {
        Sortedness::Ascending => "ascending",
        Sortedness::Descending => "descending",
        Sortedness::None => "unsorted",
    };
    let _ = writeln!(
        out,
        "Column {}[\"{}\"]\n  {}, {} nulls, {} distinct, {sorted}",
        c.table, c.name, c.dtype, c.null_count, c.cardinality
    );
    if let Some(f) = &c.value_format {
        let _ = writeln!(out, "  format: {f}");
    }
    if let Some(r) = &c.value_range {
        let _ = writeln!(out, "  range: {} to {}", r.min.render(), r.max.render());
    }
    if !c.sample_points.is_empty() {
        let pts: Vec<String> = c.sample_points.iter().map(Value::render).collect();
        let _ = writeln!(out, "  sample: {}", pts.join(", "));
    }
    if !c.unique_values.is_empty() {
        let vals: Vec<String> = c.unique_values.iter().map(Value::literal).collect();
        let _ = writeln!(out, "  values: {}", vals.join(", "));
    }
    if detail.frequencies && !c.value_frequency.is_empty() {
        let f: Vec<String> = c.value_frequency.iter().map(|f| format!("{} x{}", f.value.literal(), f.count)).collect();
        let _ = writeln!(out, "  frequency: {}", f.join(", "));
    }
}
