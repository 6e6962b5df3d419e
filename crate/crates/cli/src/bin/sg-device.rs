//! Device agent: captures, transmits, renders returned cues.

use std::net::{SocketAddr, UdpSocket};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Parser;
use sg_cli::{init_logging, print_json, CommonArgs, JsonLines};
use sg_core::device::run_device;
use sg_core::engine::CaptureSpec;

#[derive(Parser)]
#[command(name = "sg-device", about = "Stream frames to a host and render the cues it returns")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    /// Host address (overrides network.host_addr).
    #[arg(long)]
    host: Option<String>,
    /// `synthetic` or `dir:<path>`.
    #[arg(long)]
    capture: Option<CaptureSpec>,
    /// JSON Lines file for render records.
    #[arg(long)]
    render_log: Option<PathBuf>,
}

fn main() -> Result<()> {
    init_logging();
    let cli = Cli::parse();
    let mut cfg = cli.common.load()?;
    if let Some(c) = cli.capture {
        cfg.capture = c;
    }
    let host: SocketAddr = cli.host.unwrap_or(cfg.network.host_addr.clone()).parse().context("host address")?;
    let socket = UdpSocket::bind(&cfg.network.device_bind)?;
    let mut device_cfg = cfg.device.clone();
    device_cfg.link = cfg.network.link;
    device_cfg.seed = cfg.seed;
    let mut capture = cfg.capture.open()?;
    let mut log = match &cli.render_log {
        Some(p) => JsonLines::create(p)?,
        None => JsonLines::sink(),
    };
    let mut failed = None;
    let report = run_device(
        &device_cfg,
        capture.as_mut(),
        &socket,
        host,
        Duration::from_secs_f64(cfg.duration_s),
        &mut |r| {
            if let Err(e) = log.write(r) {
                failed.get_or_insert(e);
            }
        },
        None,
    )?;
    if let Some(e) = failed {
        return Err(e);
    }
    log.flush()?;
    print_json(&report)
}
