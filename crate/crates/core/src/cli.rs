//! `patina` command line: serve, import, render, stats, export, new-board.
//!
//! Data goes to stdout, diagnostics to stderr. Usage errors exit with 2,
//! domain and I/O failures exit with 1 after a single `error[<code>]: ...`
//! line on stderr.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analytics::{compute_stats, format_table, DEFAULT_GRID, DEFAULT_TOP_K};
use crate::domain::{Board, BoardId, CommentCategory};
use crate::ingest::{apply_side_file, import_into_store, parse_anchor_side_file, parse_thread, IngestError};
use crate::patina::{build_patina, render_svg, PatinaEncoding, PatinaError, PatinaStyleConfig, SvgOptions};
use crate::store::{image_mime, BoardStore, StoreError};

#[derive(Debug, Parser)]
#[command(name = "patina", version, about = "Anchored comments and patina overlays for chart images")]
pub struct Cli {
    /// Store root directory.
    #[arg(long, global = true, env = "PATINA_DATA_DIR", default_value = "./patina-data")]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ImageMode {
    /// Embed the image as base64.
    Inline,
    /// Reference the image through the HTTP API path.
    Href,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "PATINA_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Import an exported discussion thread onto a board.
    Import {
        #[arg(long)]
        board: String,
        #[arg(long)]
        thread: PathBuf,
        /// Side-file mapping external ids to [x, y, w, h] anchors.
        #[arg(long)]
        anchors: Option<PathBuf>,
        /// Stop after this many top-level comments.
        #[arg(long)]
        limit: Option<usize>,
        /// Also write the import report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render a patina view to SVG.
    Render {
        #[arg(long)]
        board: String,
        #[arg(long, value_parser = parse_encoding)]
        encoding: PatinaEncoding,
        #[arg(long, value_parser = parse_category)]
        category: Option<CommentCategory>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "inline")]
        image: ImageMode,
        /// Emit the RenderSpec JSON instead of SVG.
        #[arg(long)]
        spec: bool,
    },
    /// Corpus statistics for a board.
    Stats {
        #[arg(long)]
        board: String,
        #[arg(long, conflicts_with = "table")]
        json: bool,
        #[arg(long)]
        table: bool,
    },
    /// Write a board's canonical JSON document.
    Export {
        #[arg(long)]
        board: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Create a board from an image, or re-create one from exported JSON.
    NewBoard {
        #[arg(long, required_unless_present = "from")]
        title: Option<String>,
        /// Image file; required unless --from names a board whose image is already stored.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Exported board JSON to insert as-is.
        #[arg(long, conflicts_with = "title")]
        from: Option<PathBuf>,
    },
}

fn parse_encoding(s: &str) -> Result<PatinaEncoding, String> {
    s.parse().map_err(|e: PatinaError| e.to_string())
}

fn parse_category(s: &str) -> Result<CommentCategory, String> {
    s.parse().map_err(|e: crate::domain::UnknownCategory| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Patina(#[from] PatinaError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("server: {0}")]
    Serve(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Store(e) => e.code(),
            Self::Ingest(_) => "malformed_input",
            Self::Patina(e) => e.code(),
            Self::File { .. } => "io_failure",
            Self::Json { .. } => "malformed_input",
            Self::Serve(_) => "serve_failure",
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::File { path: path.to_owned(), source })
}

fn write_or_stdout(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::File { path: path.to_owned(), source }),
        None => stdout.write_all(bytes).map_err(|source| CliError::File { path: PathBuf::from("<stdout>"), source }),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

/// SVG document exactly as `render` writes it.
pub fn render_board_svg(
    store: &BoardStore,
    board: &Board,
    encoding: PatinaEncoding,
    category: Option<CommentCategory>,
    image: ImageMode,
) -> Result<String, CliError> {
    let spec = build_patina(board, encoding, &PatinaStyleConfig::default(), category)?;
    let options = match image {
        ImageMode::Href => SvgOptions::api_href(board),
        ImageMode::Inline => {
            let bytes = store.image_bytes(&board.id)?;
            let mime = image_mime(&bytes);
            SvgOptions::inline(bytes, mime)
        }
    };
    Ok(render_svg(&spec, board, &options))
}

/// Executes a parsed command, writing data to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Command::Serve { addr } = cli.command {
        let config = crate::api::ServeConfig { addr, data_dir: cli.data_dir };
        let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Serve(e.to_string()))?;
        return runtime.block_on(crate::api::serve(config)).map_err(|e| CliError::Serve(e.to_string()));
    }

    let store = BoardStore::open(&cli.data_dir)?;
    match cli.command {
        Command::Serve { .. } => unreachable!("handled above"),
        Command::Import { board, thread, anchors, limit, report } => {
            let mut records = parse_thread(&read(&thread)?)?;
            if let Some(path) = anchors {
                apply_side_file(&mut records, &parse_anchor_side_file(&read(&path)?)?);
            }
            let result = import_into_store(&store, &BoardId::new(board), &records, limit)?;
            let bytes = to_json(&result);
            if let Some(path) = report {
                write_or_stdout(Some(&path), &bytes, stdout)?;
            }
            write_or_stdout(None, &bytes, stdout)
        }
        Command::Render { board, encoding, category, out, image, spec } => {
            let board = store.get_board(&BoardId::new(board))?;
            let bytes = if spec {
                to_json(&build_patina(&board, encoding, &PatinaStyleConfig::default(), category)?)
            } else {
                render_board_svg(&store, &board, encoding, category, image)?.into_bytes()
            };
            write_or_stdout(out.as_deref(), &bytes, stdout)
        }
        Command::Stats { board, json: _, table } => {
            let board = store.get_board(&BoardId::new(board))?;
            let stats = compute_stats(&board, DEFAULT_GRID, DEFAULT_TOP_K);
            let bytes = if table { format_table(&stats).into_bytes() } else { to_json(&stats) };
            write_or_stdout(None, &bytes, stdout)
        }
        Command::Export { board, out } => {
            let board = store.get_board(&BoardId::new(board))?;
            write_or_stdout(out.as_deref(), &to_json(&board), stdout)
        }
        Command::NewBoard { title, image, from } => {
            let image = image.map(|p| read(&p)).transpose()?;
            let board = match from {
                Some(path) => {
                    let board: Board = serde_json::from_slice(&read(&path)?)
                        .map_err(|source| CliError::Json { path: path.clone(), source })?;
                    store.insert_board(board, image.as_deref())?
                }
                None => {
                    let image = image
                        .ok_or_else(|| StoreError::InvalidImage("--image is required when creating a board".into()))?;
                    store.put_board(title.as_deref().unwrap_or_default(), &image)?
                }
            };
            write_or_stdout(None, &to_json(&board), stdout)
        }
    }
}

/// Full entry point: parses `args`, runs, reports errors. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error[{}]: {message}", e.code());
            1
        }
    }
}

pub fn main() -> i32 {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}
