//! Host and device together over loopback; prints the metrics report.

use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use sg_cli::{init_logging, print_json, CommonArgs, JsonLines};
use sg_core::device::Pacing;
use sg_core::engine::run_e2e;

#[derive(Parser)]
#[command(name = "sg-run", about = "Run host and device end-to-end over loopback")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    /// Model file (trains the synthetic-scene model when omitted).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Directory that receives the session.
    #[arg(long)]
    sessions: Option<PathBuf>,
    #[arg(long)]
    session_id: Option<String>,
    #[arg(long)]
    render_log: Option<PathBuf>,
    /// Virtual-time pacing: every frame waits for its result.
    #[arg(long)]
    lockstep: bool,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let mut cfg = cli.common.load()?;
    if let Some(m) = cli.model {
        cfg.model.path = Some(m);
    }
    if let Some(root) = cli.sessions {
        cfg.session.root = root;
    }
    if cli.session_id.is_some() {
        cfg.session.id = cli.session_id;
    }
    if cli.lockstep {
        cfg.device.pacing = Pacing::Lockstep { result_timeout_ms: 200 };
    }
    cfg.validate()?;
    let model = cfg.model.load_or_train()?;
    let out = run_e2e(&cfg, model)?;
    if let Some(p) = cli.render_log {
        let mut log = JsonLines::create(&p)?;
        for r in &out.render_log {
            log.write(r)?;
        }
        log.flush()?;
    }
    print_json(&out.metrics)
}
