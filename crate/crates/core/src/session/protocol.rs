//! Newline-delimited JSON messages exchanged with a client.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::completion::apply_text;
use crate::preview::ErrorTag;
use crate::script::{char_to_byte, Cursor};

use super::{Completion, ExecReport, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    ExecuteCell,
    CompletionRequest,
    FocusChanged,
    AcceptItem,
    StateSnapshot,
    CompletionResponse,
    HighlightUpdate,
    PreviewUpdate,
    Error,
}

impl MessageType {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::ExecuteCell => "execute_cell",
            MessageType::CompletionRequest => "completion_request",
            MessageType::FocusChanged => "focus_changed",
            MessageType::AcceptItem => "accept_item",
            MessageType::StateSnapshot => "state_snapshot",
            MessageType::CompletionResponse => "completion_response",
            MessageType::HighlightUpdate => "highlight_update",
            MessageType::PreviewUpdate => "preview_update",
            MessageType::Error => "error",
        }
    }
}

/// One incoming frame.
#[derive(Debug, Clone, Deserialize)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: MessageType,
    #[serde(default)]
    pub seq: u64,
    #[serde(default)]
    pub payload: Json,
}

/// One outgoing frame; `seq` is the seq of the request it answers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outgoing {
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub seq: u64,
    pub superseded: bool,
    pub payload: Json,
}

impl Outgoing {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("outgoing frames serialize")
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    Frame(#[from] serde_json::Error),
    #[error("{0} is a response type")]
    NotARequest(&'static str),
}

#[derive(Debug, Deserialize)]
struct ExecutePayload {
    cell: usize,
    source: Option<String>,
}

#[derive(Debug, Deserialize)]
struct CompletionPayload {
    /// Current editor text; the session's cells when absent.
    cells: Option<Vec<String>>,
    cursor: Cursor,
    visible_columns: Option<usize>,
    #[serde(default = "yes")]
    model: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct IndexPayload {
    index: usize,
}

/// The last completion list and what it was computed from.
#[derive(Debug, Clone)]
pub(crate) struct LastCompletion {
    seq: u64,
    cells: Vec<String>,
    cursor: Cursor,
    visible_columns: usize,
    completion: Completion,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct ProtocolState {
    /// Newest completion request seen, handled or still queued.
    latest_completion: u64,
    last: Option<LastCompletion>,
}

fn error(seq: u64, tag: &str, message: impl Into<String>, extra: Json) -> Outgoing {
    let mut payload = json!({ "tag": tag, "message": message.into() });
    if let (Json::Object(p), Json::Object(e)) = (&mut payload, extra) {
        p.extend(e);
    }
    Outgoing {
        kind: MessageType::Error,
        seq,
        superseded: false,
        payload,
    }
}

fn tag_name(tag: ErrorTag) -> &'static str {
    match tag {
        ErrorTag::GrammarError => "grammar_error",
        ErrorTag::DataError => "data_error",
    }
}

impl Session {
    /// Records that a request exists before it is handled, so earlier
    /// completion requests still in the queue can be marked superseded.
    pub fn note_incoming(&mut self, env: &Envelope) {
        if env.kind == MessageType::CompletionRequest {
            self.state.latest_completion = self.state.latest_completion.max(env.seq);
        }
    }

    /// Parses and handles one line, returning the response lines.
    pub fn handle_line(&mut self, line: &str) -> Vec<String> {
        self.handle_lines(&[line])
    }

    /// Handles frames read together; completion requests overtaken by a
    /// newer one in the same batch are answered as superseded.
    pub fn handle_lines<S: AsRef<str>>(&mut self, lines: &[S]) -> Vec<String> {
        let parsed: Vec<Result<Envelope, ProtocolError>> = lines
            .iter()
            .filter(|l| !l.as_ref().trim().is_empty())
            .flat_map(|l| parse_frame(l.as_ref()))
            .collect();
        for env in parsed.iter().flatten() {
            self.note_incoming(env);
        }
        let mut out = Vec::new();
        for p in parsed {
            let frames = match p {
                Ok(env) => self.handle(&env),
                Err(e) => vec![error(0, "protocol_error", e.to_string(), json!({}))],
            };
            out.extend(frames.iter().map(Outgoing::to_line));
        }
        out
    }

    pub fn handle(&mut self, env: &Envelope) -> Vec<Outgoing> {
        self.note_incoming(env);
        let bad = |e: serde_json::Error| vec![error(env.seq, "protocol_error", format!("bad payload: {e}"), json!({}))];
        match env.kind {
            MessageType::ExecuteCell => match serde_json::from_value::<ExecutePayload>(env.payload.clone()) {
                Ok(p) => self.on_execute(env.seq, p),
                Err(e) => bad(e),
            },
            MessageType::CompletionRequest => match serde_json::from_value::<CompletionPayload>(env.payload.clone()) {
                Ok(p) => self.on_completion(env.seq, p),
                Err(e) => bad(e),
            },
            MessageType::FocusChanged => match serde_json::from_value::<IndexPayload>(env.payload.clone()) {
                Ok(p) => self.on_focus(env.seq, p.index),
                Err(e) => bad(e),
            },
            MessageType::AcceptItem => match serde_json::from_value::<IndexPayload>(env.payload.clone()) {
                Ok(p) => self.on_accept(env.seq, p.index),
                Err(e) => bad(e),
            },
            MessageType::StateSnapshot => vec![self.snapshot(env.seq, None, None)],
            other => vec![error(
                env.seq,
                "protocol_error",
                ProtocolError::NotARequest(other.as_str()).to_string(),
                json!({}),
            )],
        }
    }

    /// Current cells, bindings and profiles.
    pub fn snapshot(&self, seq: u64, report: Option<&ExecReport>, cursor: Option<Cursor>) -> Outgoing {
        let mut payload = json!({
            "session": self.id,
            "cells": self.cells,
            "tables": self.env.names().collect::<Vec<_>>(),
            "env_version": self.env.version(),
            "profiles_version": self.profiles.version(),
            "profiles": &*self.profiles,
            "view": {
                "display_rows": self.config.display_rows,
                "visible_columns": self.config.visible_columns,
                "debounce_ms": self.config.model.debounce_ms,
            },
        });
        if let Some(r) = report {
            payload["report"] = json!(r);
        }
        if let Some(c) = cursor {
            payload["cursor"] = json!(c);
        }
        Outgoing {
            kind: MessageType::StateSnapshot,
            seq,
            superseded: false,
            payload,
        }
    }

    fn on_execute(&mut self, seq: u64, p: ExecutePayload) -> Vec<Outgoing> {
        let source = match p.source {
            Some(s) => s,
            None => match self.cells.get(p.cell) {
                Some(s) => s.clone(),
                None => return vec![error(seq, "protocol_error", format!("no cell {}", p.cell), json!({}))],
            },
        };
        // Data changed or may have; the old list no longer applies.
        self.state.last = None;
        match self.execute_cell(p.cell, &source) {
            Ok(report) => vec![self.snapshot(seq, Some(&report), None)],
            Err(e) => vec![error(
                seq,
                tag_name(e.tag),
                e.message.clone(),
                json!({ "cell": e.cell, "statement": e.statement }),
            )],
        }
    }

    fn superseded(&self, seq: u64) -> bool {
        seq < self.state.latest_completion
    }

    fn on_completion(&mut self, seq: u64, p: CompletionPayload) -> Vec<Outgoing> {
        if self.superseded(seq) {
            // Cancelled before any work: a newer request is already queued.
            return vec![Outgoing {
                kind: MessageType::CompletionResponse,
                seq,
                superseded: true,
                payload: json!({ "items": [], "cancelled": true }),
            }];
        }
        let cells = p.cells.unwrap_or_else(|| self.cells.clone());
        let visible_columns = p.visible_columns.unwrap_or(self.config.visible_columns);
        let completion = self.complete(&cells, p.cursor, p.model);
        let focus = (!completion.items.is_empty()).then_some(0);
        let mut out = vec![Outgoing {
            kind: MessageType::CompletionResponse,
            seq,
            superseded: false,
            payload: completion.payload(),
        }];
        self.state.last = Some(LastCompletion {
            seq,
            cells,
            cursor: p.cursor,
            visible_columns,
            completion,
        });
        out.extend(self.focus_frames(seq, focus));
        out
    }

    fn focus_frames(&self, seq: u64, focus: Option<usize>) -> Vec<Outgoing> {
        let last = self.state.last.as_ref().expect("called with a current list");
        let spec = last.completion.highlight(focus, &self.env, last.visible_columns);
        let mut out = vec![Outgoing {
            kind: MessageType::HighlightUpdate,
            seq,
            superseded: false,
            payload: json!({ "focus": focus, "highlight": spec }),
        }];
        if let Some(preview) = last.completion.preview(focus, &self.env, self.config.preview_rows) {
            out.push(Outgoing {
                kind: MessageType::PreviewUpdate,
                seq,
                superseded: false,
                payload: json!({ "focus": focus, "preview": preview }),
            });
        }
        out
    }

    fn current(&self, seq: u64, index: usize) -> Result<&LastCompletion, Outgoing> {
        let last = match &self.state.last {
            Some(l) if !self.superseded(l.seq) => l,
            _ => return Err(error(seq, "stale_list", "no current completion list", json!({}))),
        };
        if index >= last.completion.items.len() {
            return Err(error(
                seq,
                "stale_list",
                format!("item {index} is outside the list of {}", last.completion.items.len()),
                json!({}),
            ));
        }
        Ok(last)
    }

    fn on_focus(&mut self, seq: u64, index: usize) -> Vec<Outgoing> {
        match self.current(seq, index) {
            Ok(_) => self.focus_frames(seq, Some(index)),
            Err(e) => vec![e],
        }
    }

    /// Inserts the item at the request's cursor and stores the edited cells.
    fn on_accept(&mut self, seq: u64, index: usize) -> Vec<Outgoing> {
        let last = match self.current(seq, index) {
            Ok(l) => l.clone(),
            Err(e) => return vec![e],
        };
        let item = &last.completion.items[index];
        let mut cells = last.cells;
        if cells.is_empty() {
            cells.push(String::new());
        }
        let ci = last.cursor.cell.min(cells.len() - 1);
        let cell = &cells[ci];
        let cut = char_to_byte(cell, last.cursor.offset);
        let (before, after) = cell.split_at(cut);
        let edited = apply_text(before, &item.text, item.replace_len);
        let cursor = Cursor {
            cell: ci,
            offset: edited.chars().count(),
        };
        cells[ci] = format!("{edited}{after}");
        self.cells = cells;
        self.state.last = None;
        vec![self.snapshot(seq, None, Some(cursor))]
    }
}

pub fn parse_envelope(line: &str) -> Result<Envelope, ProtocolError> {
    let env: Envelope = serde_json::from_str(line)?;
    Ok(env)
}

/// One line: a single message, or a JSON array of messages sent as one batch.
pub fn parse_frame(line: &str) -> Vec<Result<Envelope, ProtocolError>> {
    if !line.trim_start().starts_with('[') {
        return vec![parse_envelope(line)];
    }
    match serde_json::from_str::<Vec<Json>>(line) {
        Ok(items) => items
            .into_iter()
            .map(|v| serde_json::from_value(v).map_err(ProtocolError::from))
            .collect(),
        Err(e) => vec![Err(e.into())],
    }
}
