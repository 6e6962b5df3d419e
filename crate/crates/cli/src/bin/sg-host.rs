//! Host engine: receives frames, recognizes, replies, records a session.

use std::net::UdpSocket;
use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Parser;
use sg_cli::{init_logging, print_json, CommonArgs};
use sg_core::engine::Host;
use sg_core::session::{unix_ms, SessionWriter, WriterLimits};

#[derive(Parser)]
#[command(name = "sg-host", about = "Serve frames from a device and return emotion results")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    /// Listen address (defaults to network.host_addr, where a standalone device sends).
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    sessions: Option<PathBuf>,
    #[arg(long)]
    session_id: Option<String>,
    /// Do not record a session.
    #[arg(long)]
    no_record: bool,
    /// Exit after this many milliseconds without traffic.
    #[arg(long)]
    idle_timeout_ms: Option<u64>,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let mut cfg = cli.common.load()?;
    if let Some(m) = cli.model {
        cfg.model.path = Some(m);
    }
    if let Some(r) = cli.sessions {
        cfg.session.root = r;
    }
    if cli.idle_timeout_ms.is_some() {
        cfg.host.idle_timeout_ms = cli.idle_timeout_ms;
    }
    let bind = cli.bind.unwrap_or(cfg.network.host_addr.clone());
    let model = cfg.model.load_or_train()?;
    let socket = UdpSocket::bind(&bind).with_context(|| format!("binding {bind}"))?;
    eprintln!("sg-host listening on {}", socket.local_addr()?);

    let mut host_cfg = cfg.host.clone();
    host_cfg.link = cfg.network.link;
    host_cfg.seed = cfg.seed;
    let mut host = Host::new(model.clone(), host_cfg)?;
    if !cli.no_record {
        let id = cli.session_id.or(cfg.session.id.clone()).unwrap_or_else(|| format!("session-{}", unix_ms()));
        let snapshot = serde_json::to_value(&cfg)?;
        let w = SessionWriter::create(&cfg.session.root.join(&id), &id, model.label_set.clone(), snapshot)?
            .with_limits(WriterLimits { max_bytes: cfg.session.max_bytes });
        host = host.with_session(w);
    }
    let stop = AtomicBool::new(false);
    host.serve(&socket, Some(Duration::from_secs_f64(cfg.duration_s)), &stop)?;
    print_json(&host.finish(None)?)
}
