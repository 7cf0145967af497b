//! Session state, cell execution and the completion pipeline.

mod protocol;

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::completion::{
    build_prompt, client_from_config, multi_token_candidates, rank, single_token_candidates, CompletionItem, DataView,
    ModelClient, ModelError,
};
use crate::config::EngineConfig;
use crate::context::{refresh, select_contexts, DataContextBundle, ProfileOptions, ProfileStore};
use crate::frame::{apply_transform, load_csv, CsvOptions, DataTable, Environment, FrameError};
use crate::preview::{compute_highlight, compute_preview, preview_ready, ErrorTag, HighlightSpec, PreviewResult};
use crate::script::{detect_code_context, parse_statement, split_at_cursor, split_statements, CodeContext, Cursor, SplitResult, Statement};

pub use protocol::{parse_envelope, parse_frame, Envelope, MessageType, Outgoing, ProtocolError};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("model client: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Why a cell did not run. The environment is as it was before the cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[error("cell {cell}, statement {statement}: {message}")]
pub struct ExecError {
    pub cell: usize,
    /// 0-based index among the cell's statements.
    pub statement: usize,
    pub tag: ErrorTag,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecReport {
    pub cell: usize,
    pub statements: usize,
    /// Names bound for the first time.
    pub bound: Vec<String>,
    /// Names rebound to a new table.
    pub updated: Vec<String>,
    pub deleted: Vec<String>,
    pub env_version: u64,
    pub profiles_version: u64,
}

/// Result of one run of the completion pipeline. Immutable once built.
#[derive(Debug, Clone, Serialize)]
pub struct Completion {
    #[serde(skip)]
    pub split: SplitResult,
    pub context: CodeContext,
    pub bundle: DataContextBundle,
    pub items: Vec<CompletionItem>,
    pub diagnostics: Vec<String>,
}

impl Completion {
    pub fn focused(&self, focus: Option<usize>) -> Option<&CompletionItem> {
        focus.and_then(|i| self.items.get(i))
    }

    /// Body of a `completion_response`, shared by the protocol and the CLI.
    pub fn payload(&self) -> serde_json::Value {
        serde_json::json!({
            "items": self.items,
            "no_candidates": self.items.is_empty(),
            "code_context": self.context,
            "data_context": self.bundle,
            "diagnostics": self.diagnostics,
        })
    }

    pub fn highlight(&self, focus: Option<usize>, env: &Environment, visible_columns: usize) -> HighlightSpec {
        compute_highlight(&self.context, self.focused(focus), env, visible_columns)
    }

    /// The preview for the focused item, when accepting it completes an op.
    pub fn preview(&self, focus: Option<usize>, env: &Environment, rows: usize) -> Option<PreviewResult> {
        let item = self.focused(focus);
        preview_ready(&self.context, item).then(|| compute_preview(&self.context, item, env, rows))
    }
}

pub struct Session {
    id: String,
    cells: Vec<String>,
    env: Environment,
    profiles: Arc<ProfileStore>,
    config: EngineConfig,
    model: Option<Arc<dyn ModelClient>>,
    pub(crate) state: protocol::ProtocolState,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("cells", &self.cells.len())
            .field("env_version", &self.env.version())
            .field("model", &self.model.as_ref().map(|m| m.identity()))
            .finish()
    }
}

impl Session {
    /// A session whose model client is built from `config.model`.
    pub fn new(id: impl Into<String>, config: EngineConfig) -> Result<Self, SessionError> {
        let model = if config.model.enabled {
            Some(client_from_config(&config.model)?)
        } else {
            None
        };
        Ok(Self::with_model(id, config, model))
    }

    pub fn with_model(id: impl Into<String>, config: EngineConfig, model: Option<Arc<dyn ModelClient>>) -> Self {
        Self {
            id: id.into(),
            cells: Vec::new(),
            env: Environment::new(),
            profiles: Arc::new(ProfileStore::new()),
            config,
            model,
            state: protocol::ProtocolState::default(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn cells(&self) -> &[String] {
        &self.cells
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn profiles(&self) -> &Arc<ProfileStore> {
        &self.profiles
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            categorical_threshold: self.config.categorical_threshold,
            ..CsvOptions::default()
        }
    }

    fn refresh(&mut self) {
        let opts = ProfileOptions::from(&self.config);
        self.profiles = Arc::new(refresh(&self.env, &self.profiles, &opts));
    }

    /// Binds a CSV file outside any cell, as one run.
    pub fn load_table(&mut self, name: &str, path: impl AsRef<Path>) -> Result<(), SessionError> {
        let table = load_csv(path, name, &self.csv_options())?;
        self.bind_table(name, table);
        Ok(())
    }

    /// Binds an in-memory table as one run.
    pub fn bind_table(&mut self, name: &str, table: DataTable) {
        self.env.bind(name, table);
        self.env.bump();
        self.refresh();
    }

    /// Stores `source` as cell `index` and runs its statements in order.
    ///
    /// A failing statement rolls the environment back to its state before
    /// the cell. A cell without statements changes nothing.
    pub fn execute_cell(&mut self, index: usize, source: &str) -> Result<ExecReport, ExecError> {
        if self.cells.len() <= index {
            self.cells.resize(index + 1, String::new());
        }
        self.cells[index] = source.to_string();
        let statements = split_statements(source);
        let before = self.env.clone();
        let mut report = ExecReport {
            cell: index,
            statements: statements.len(),
            bound: Vec::new(),
            updated: Vec::new(),
            deleted: Vec::new(),
            env_version: self.env.version(),
            profiles_version: self.profiles.version(),
        };
        if statements.is_empty() {
            return Ok(report);
        }
        for (i, (_, text)) in statements.iter().enumerate() {
            if let Err((tag, message)) = self.run_statement(text) {
                self.env = before;
                return Err(ExecError {
                    cell: index,
                    statement: i,
                    tag,
                    message,
                });
            }
        }
        self.env.bump();
        self.refresh();
        for (name, binding) in self.env.bindings() {
            if binding.bound_at == self.env.version() {
                if before.contains(name) {
                    report.updated.push(name.to_string());
                } else {
                    report.bound.push(name.to_string());
                }
            }
        }
        report.deleted = before.names().filter(|n| !self.env.contains(n)).map(String::from).collect();
        report.env_version = self.env.version();
        report.profiles_version = self.profiles.version();
        Ok(report)
    }

    fn run_statement(&mut self, text: &str) -> Result<(), (ErrorTag, String)> {
        let stmt = parse_statement(text).map_err(|e| (ErrorTag::GrammarError, e.to_string()))?;
        let data = |e: FrameError| (ErrorTag::DataError, e.to_string());
        match stmt {
            Statement::Import { .. } => {}
            Statement::Load { target, path } => {
                let full = if Path::new(&path).is_relative() {
                    self.config.data_dir.join(&path)
                } else {
                    path.into()
                };
                let table = load_csv(&full, &target, &self.csv_options()).map_err(data)?;
                self.env.bind(&target, table);
            }
            Statement::Alias { target, source } => {
                let table = self.env.get(&source).ok_or_else(|| data(FrameError::UnknownTable(source.clone())))?;
                let table = table.as_ref().clone();
                self.env.bind(&target, table);
            }
            Statement::Delete(names) => {
                for n in names {
                    if !self.env.unbind(&n) {
                        return Err(data(FrameError::UnknownTable(n)));
                    }
                }
            }
            Statement::Assign { target, op } => {
                let table = apply_transform(&op, &self.env).map_err(data)?;
                self.env.bind(&target, table);
            }
            Statement::Expr(op) => {
                apply_transform(&op, &self.env).map_err(data)?;
            }
        }
        Ok(())
    }

    /// Runs split, detect, select, complete and rank for a cursor in `cells`.
    ///
    /// Reads the session but never changes it.
    pub fn complete(&self, cells: &[String], cursor: Cursor, use_model: bool) -> Completion {
        let split = split_at_cursor(cells, cursor);
        let context = detect_code_context(&split);
        let bundle = select_contexts(&context, &self.profiles, &self.env);
        let view = DataView {
            env: &self.env,
            store: &self.profiles,
            seed: self.config.seed,
            cap: self.config.sample_cap,
        };
        let mut items = single_token_candidates(&context, &view);
        let mut diagnostics = Vec::new();
        if let Some(diag) = &context.diagnostic {
            diagnostics.push(diag.clone());
        }
        if let (true, Some(model)) = (use_model, &self.model) {
            if !context.partial_statement.trim().is_empty() {
                let m = &self.config.model;
                let prompt = build_prompt(&split.complete_code, &context, &bundle, self.config.prompt_budget, m.max_items);
                let out = multi_token_candidates(&prompt, model, &context, &self.env, &self.profiles, m.max_items, m.max_tokens);
                items.extend(out.items);
                diagnostics.extend(out.diagnostics);
            }
        }
        let mut items = rank(items);
        for item in &mut items {
            item.completes_operation = preview_ready(&context, Some(item));
        }
        Completion {
            split,
            context,
            bundle,
            items,
            diagnostics,
        }
    }

    /// Splits a script into cells at `# %%` marker lines.
    pub fn split_cells(script: &str) -> Vec<String> {
        let mut cells = vec![String::new()];
        for line in script.split_inclusive('\n') {
            if line.trim_end().starts_with("# %%") {
                cells.push(String::new());
            } else {
                cells.last_mut().expect("never empty").push_str(line);
            }
        }
        if cells.len() > 1 && cells[0].trim().is_empty() {
            cells.remove(0);
        }
        cells
    }
}
