//! Lists, hides or deletes recorded sessions.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use sg_cli::{init_logging, print_json};
use sg_core::session::{SessionStatus, SessionStore};

#[derive(Parser)]
#[command(name = "sg-sessions", about = "Session newsfeed management")]
struct Cli {
    /// Directory holding the session directories.
    #[arg(long, default_value = "sessions")]
    root: PathBuf,
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Sessions in chronological order; hidden ones only with --all.
    List {
        #[arg(long)]
        all: bool,
    },
    Hide { id: String },
    Unhide { id: String },
    /// Removes the frame data, keeping metadata and annotations.
    Delete { id: String },
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let store = SessionStore::new(&cli.root);
    let (id, status) = match cli.action {
        Action::List { all } => return print_json(&store.list(all)?),
        Action::Hide { id } => (id, SessionStatus::Hidden),
        Action::Unhide { id } => (id, SessionStatus::Visible),
        Action::Delete { id } => (id, SessionStatus::Deleted),
    };
    store.set_status(&id, status)?;
    print_json(&store.review_state(&id)?)
}
