//! `datawise`: one-shot completion, preview and profiling, plus the socket server.

mod serve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use datawise_core::config::EngineConfig;
use datawise_core::context::{profile_table, ProfileOptions};
use datawise_core::frame::{load_csv, CsvOptions};
use datawise_core::script::Cursor;
use datawise_core::session::Session;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "datawise", version, about = "Data-aware completion for table-wrangling scripts")]
struct Cli {
    /// Engine config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Serve the NDJSON protocol over TCP and WebSocket, plus static files.
    Serve(ServeArgs),
    /// Print completion candidates for a cursor in a script.
    Complete(ScriptArgs),
    /// Print the highlight and preview for a cursor in a script.
    Preview(PreviewArgs),
    /// Print profiles of CSV files.
    Profile(ProfileArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Answer model requests from fixture files.
    #[arg(long)]
    mock_model: bool,
    /// Fixture file for the mock model.
    #[arg(long, value_name = "PATH")]
    fixtures: Option<PathBuf>,
    /// Rule-based candidates only.
    #[arg(long, conflicts_with_all = ["mock_model", "fixtures"])]
    no_model: bool,
}

#[derive(Args, Debug)]
pub(crate) struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: String,
    /// Directory served to plain HTTP GET requests.
    #[arg(long = "static", value_name = "DIR")]
    static_dir: Option<PathBuf>,
    /// Speak the protocol on stdin/stdout instead of a socket.
    #[arg(long)]
    stdio: bool,
    /// Handle lines one at a time instead of coalescing queued ones, so
    /// a replayed transcript does not depend on read timing.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct ScriptArgs {
    /// Script whose cells are separated by `# %%` lines.
    #[arg(long)]
    script: PathBuf,
    /// Table to bind before the script runs, as PATH or NAME=PATH.
    #[arg(long = "csv", value_name = "CSV")]
    csvs: Vec<String>,
    /// Place the cursor at the end of the last cell.
    #[arg(long, conflicts_with = "cursor")]
    cursor_end: bool,
    /// Cursor as CELL:OFFSET (0-based, characters).
    #[arg(long, value_parser = parse_cursor)]
    cursor: Option<Cursor>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct PreviewArgs {
    #[command(flatten)]
    script: ScriptArgs,
    /// Index of the focused completion item.
    #[arg(long)]
    focus: Option<usize>,
    /// Grid columns the viewer shows before anchoring.
    #[arg(long)]
    visible_columns: Option<usize>,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long = "csv", value_name = "CSV", required = true)]
    csvs: Vec<String>,
}

fn parse_cursor(s: &str) -> Result<Cursor, String> {
    let (cell, offset) = s.split_once(':').ok_or("expected CELL:OFFSET")?;
    Ok(Cursor {
        cell: cell.parse().map_err(|_| format!("bad cell `{cell}`"))?,
        offset: offset.parse().map_err(|_| format!("bad offset `{offset}`"))?,
    })
}

/// `NAME=PATH`, or a bare path named after its file stem.
fn csv_binding(spec: &str) -> Result<(String, PathBuf)> {
    if let Some((name, path)) = spec.split_once('=') {
        return Ok((name.to_string(), PathBuf::from(path)));
    }
    let path = PathBuf::from(spec);
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .with_context(|| format!("cannot name a table after `{spec}`"))?;
    let name: String = stem.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect();
    Ok((name, path))
}

fn load_config(path: Option<&Path>, model: Option<&ModelArgs>) -> Result<EngineConfig> {
    let mut config = match path {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    if let Some(m) = model {
        if m.no_model {
            config.model.enabled = false;
        }
        if m.mock_model || m.fixtures.is_some() {
            config.model.enabled = true;
            config.model.mock = true;
        }
        if let Some(f) = &m.fixtures {
            config.model.fixtures = Some(f.clone());
        }
    }
    Ok(config)
}

/// A session with the CSVs bound and every cell before the cursor's run.
fn prepare(config: EngineConfig, args: &ScriptArgs) -> Result<(Session, Vec<String>, Cursor)> {
    let script = std::fs::read_to_string(&args.script).with_context(|| format!("cannot read {}", args.script.display()))?;
    let cells = Session::split_cells(&script);
    let cursor = match (args.cursor, args.cursor_end) {
        (Some(c), _) => c,
        (None, true) => {
            let last = cells.len() - 1;
            Cursor {
                cell: last,
                offset: cells[last].trim_end_matches('\n').chars().count(),
            }
        }
        (None, false) => bail!("give --cursor CELL:OFFSET or --cursor-end"),
    };
    if cursor.cell >= cells.len() {
        bail!("cursor cell {} is past the last cell {}", cursor.cell, cells.len() - 1);
    }
    let mut session = Session::new("cli", config)?;
    for spec in &args.csvs {
        let (name, path) = csv_binding(spec)?;
        session.load_table(&name, &path)?;
    }
    for (i, cell) in cells.iter().enumerate().take(cursor.cell) {
        session.execute_cell(i, cell)?;
    }
    Ok((session, cells, cursor))
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Serve(args) => {
            let config = load_config(config_path, Some(&args.model))?;
            if args.stdio {
                serve::stdio(config, args.sequential)
            } else {
                serve::listen(&args, config)
            }
        }
        Command::Complete(args) => {
            let config = load_config(config_path, Some(&args.model))?;
            let (session, cells, cursor) = prepare(config, &args)?;
            let completion = session.complete(&cells, cursor, true);
            println!("{}", serde_json::to_string_pretty(&completion.payload())?);
            Ok(())
        }
        Command::Preview(args) => {
            let config = load_config(config_path, Some(&args.script.model))?;
            let (session, cells, cursor) = prepare(config, &args.script)?;
            let completion = session.complete(&cells, cursor, true);
            if let Some(f) = args.focus {
                if f >= completion.items.len() {
                    bail!("focus {f} is outside the {} candidates", completion.items.len());
                }
            }
            let visible = args.visible_columns.unwrap_or(session.config().visible_columns);
            let highlight = completion.highlight(args.focus, session.env(), visible);
            let preview = completion.preview(args.focus, session.env(), session.config().preview_rows);
            let out = json!({ "focus": args.focus, "highlight": highlight, "preview": preview });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Command::Profile(args) => {
            let config = load_config(config_path, None)?;
            let options = CsvOptions {
                categorical_threshold: config.categorical_threshold,
                ..CsvOptions::default()
            };
            let opts = ProfileOptions::from(&config);
            let mut tables = Vec::new();
            for spec in &args.csvs {
                let (name, path) = csv_binding(spec)?;
                let table = load_csv(&path, &name, &options)?;
                tables.push(profile_table(&table, &opts));
            }
            println!("{}", serde_json::to_string_pretty(&json!({ "tables": tables }))?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 and usage text on bad flags.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            println!("{}", json!({ "error": { "message": e.to_string(), "causes": causes } }));
            ExitCode::from(1)
        }
    }
}
