use serde::{Deserialize, Serialize};

use super::token::{tokenize, TokenKind};

/// Position of the editing cursor: a cell index and a character offset in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cursor {
    pub cell: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitResult {
    /// Every statement before the one being edited, earlier cells included.
    pub complete_code: String,
    /// The statement containing the cursor, up to the cursor.
    pub partial_statement: String,
    /// Character offset of the cursor within `partial_statement`.
    pub cursor_offset: usize,
}

impl SplitResult {
    /// `complete_code + partial_statement`, the text before the cursor.
    pub fn source(&self) -> String {
        format!("{}{}", self.complete_code, self.partial_statement)
    }
}

/// Byte index of the `chars`-th character of `s`, clamped to the end.
pub fn char_to_byte(s: &str, chars: usize) -> usize {
    s.char_indices().nth(chars).map_or(s.len(), |(i, _)| i)
}

/// Joins cells into one source, each cell followed by a newline.
pub fn join_cells<S: AsRef<str>>(cells: &[S]) -> String {
    let mut out = String::new();
    for c in cells {
        out.push_str(c.as_ref());
        out.push('\n');
    }
    out
}

/// Splits the text before the cursor into complete code and the partial
/// statement. Statements end at newlines outside brackets; each cell starts
/// a fresh statement. Text after the cursor is not part of either half.
pub fn split_at_cursor<S: AsRef<str>>(cells: &[S], cursor: Cursor) -> SplitResult {
    if cells.is_empty() {
        return SplitResult {
            complete_code: String::new(),
            partial_statement: String::new(),
            cursor_offset: 0,
        };
    }
    let cell_idx = cursor.cell.min(cells.len() - 1);
    let cell = cells[cell_idx].as_ref();
    let before = &cell[..char_to_byte(cell, cursor.offset)];
    let start = last_statement_start(before);

    let mut complete_code = join_cells(&cells[..cell_idx]);
    complete_code.push_str(&before[..start]);
    let partial_statement = before[start..].to_string();
    SplitResult {
        complete_code,
        cursor_offset: partial_statement.chars().count(),
        partial_statement,
    }
}

/// Byte offset just past the last top-level newline of `text`.
fn last_statement_start(text: &str) -> usize {
    let mut depth = 0usize;
    let mut start = 0;
    for tok in tokenize(text) {
        if tok.is_open_bracket() {
            depth += 1;
        } else if tok.is_close_bracket() {
            depth = depth.saturating_sub(1);
        } else if tok.kind == TokenKind::Newline && depth == 0 {
            start = tok.end;
        }
    }
    start
}

/// Top-level statements of a complete source as (byte offset, text), blank
/// and comment-only lines skipped.
pub fn split_statements<'a>(source: &'a str) -> Vec<(usize, &'a str)> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let push = |from: usize, to: usize, out: &mut Vec<(usize, &'a str)>| {
        let text = &source[from..to];
        if tokenize(text).iter().any(|t| t.kind != TokenKind::Newline) {
            let lead = text.len() - text.trim_start().len();
            out.push((from + lead, text.trim()));
        }
    };
    for tok in tokenize(source) {
        if tok.is_open_bracket() {
            depth += 1;
        } else if tok.is_close_bracket() {
            depth = depth.saturating_sub(1);
        } else if tok.kind == TokenKind::Newline && depth == 0 {
            push(start, tok.start, &mut out);
            start = tok.end;
        }
    }
    push(start, source.len(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cursor_at_end_of_third_line_of_second_cell() {
        let cells = ["a = pd.read_csv(\"a.csv\")", "b = a.head()\nc = b.head()\nd = c.sort_values(by=\"C"];
        let cell2 = cells[1];
        let split = split_at_cursor(&cells, Cursor { cell: 1, offset: cell2.chars().count() });
        assert_eq!(split.complete_code, "a = pd.read_csv(\"a.csv\")\nb = a.head()\nc = b.head()\n");
        assert_eq!(split.partial_statement, "d = c.sort_values(by=\"C");
        assert_eq!(split.cursor_offset, split.partial_statement.chars().count());
    }

    #[test]
    fn empty_notebook() {
        let cells: [&str; 1] = [""];
        let split = split_at_cursor(&cells, Cursor { cell: 0, offset: 0 });
        assert!(split.complete_code.is_empty());
        assert!(split.partial_statement.is_empty());
        let none: [&str; 0] = [];
        assert_eq!(split_at_cursor(&none, Cursor { cell: 0, offset: 0 }).source(), "");
    }

    #[test]
    fn bracket_spanning_lines_stays_together() {
        let cells = ["x = 1\ny = pd.merge(a,\n    b, on="];
        let split = split_at_cursor(&cells, Cursor { cell: 0, offset: 100 });
        assert_eq!(split.partial_statement, "y = pd.merge(a,\n    b, on=");
        assert_eq!(split.complete_code, "x = 1\n");
    }

    #[test]
    fn reassembly_is_exact() {
        let cells = ["p = 1", "q = (2,\n3)\nr = q["];
        for off in 0..=cells[1].chars().count() {
            let split = split_at_cursor(&cells, Cursor { cell: 1, offset: off });
            let expected = format!("{}\n{}", cells[0], &cells[1][..char_to_byte(cells[1], off)]);
            assert_eq!(split.source(), expected);
        }
    }

    #[test]
    fn statements_of_a_cell() {
        let stmts = split_statements("a = 1\n\n# c\nb = f(1,\n 2)\n");
        assert_eq!(stmts, vec![(0, "a = 1"), (11, "b = f(1,\n 2)")]);
    }
}
