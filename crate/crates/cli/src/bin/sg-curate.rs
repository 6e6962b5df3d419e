//! Curates emotional moments of a recorded session into a timeline.

use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use sg_cli::{init_logging, print_json, read_json};
use sg_core::session::{save_plot, timeline, CurationParams};

#[derive(Parser)]
#[command(name = "sg-curate", about = "Build the review timeline of a session")]
struct Cli {
    #[arg(long)]
    session: PathBuf,
    /// Curation parameters JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Timeline JSON output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// PNG rendering of the playback bar.
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let params: CurationParams = match &cli.params {
        Some(p) => read_json(p)?,
        None => CurationParams::default(),
    };
    let tl = timeline(&cli.session, &params)?;
    if let Some(p) = &cli.plot {
        save_plot(&tl, p)?;
    }
    match &cli.out {
        Some(p) => std::fs::write(p, serde_json::to_vec_pretty(&tl)?)?,
        None => print_json(&tl)?,
    }
    Ok(())
}
