//! Marks or comments a span of a recorded session.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use sg_cli::{init_logging, parse_range, print_json};
use sg_core::session::{Annotation, SessionStore};

#[derive(Parser)]
#[command(name = "sg-annotate", about = "Add an important mark or comment to a session")]
struct Cli {
    #[arg(long)]
    session: PathBuf,
    /// `<start_ms>:<end_ms>`.
    #[arg(long, value_parser = parse_range)]
    mark: (u64, u64),
    /// Attach a comment instead of a plain important mark.
    #[arg(long)]
    comment: Option<String>,
    #[arg(long, default_value = "caregiver")]
    author: String,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let dir = cli.session.canonicalize().with_context(|| format!("session {}", cli.session.display()))?;
    let id = dir.file_name().and_then(|s| s.to_str()).context("session directory name")?.to_string();
    let store = SessionStore::new(dir.parent().context("session directory has no parent")?);
    let (start, end) = cli.mark;
    let note = match &cli.comment {
        Some(text) => Annotation::comment(start, end, &cli.author, text),
        None => Annotation::mark(start, end, &cli.author),
    };
    store.annotate(&id, note)?;
    print_json(&store.annotations(&id)?)
}
