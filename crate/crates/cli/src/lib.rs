//! Shared plumbing for the `sg-*` binaries.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use sg_core::engine::RunConfig;

/// Flags accepted by every run-style subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file (all sections optional).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Injected packet loss probability in [0, 1].
    #[arg(long)]
    pub loss: Option<f64>,
    /// Injected one-way latency.
    #[arg(long = "latency-ms")]
    pub latency_ms: Option<f64>,
}

impl CommonArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(self.seed, self.duration, self.loss, self.latency_ms);
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Pretty JSON on stdout. A closed pipe ends the output quietly.
pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Parses `<start_ms>:<end_ms>`.
pub fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected <start_ms>:<end_ms>, got `{s}`"))?;
    let a = a.trim().parse::<u64>().map_err(|e| format!("start `{a}`: {e}"))?;
    let b = b.trim().parse::<u64>().map_err(|e| format!("end `{b}`: {e}"))?;
    if a > b {
        return Err(format!("start {a} after end {b}"));
    }
    Ok((a, b))
}

/// JSON Lines writer for render records.
pub struct JsonLines {
    out: Box<dyn Write>,
}

impl JsonLines {
    pub fn create(path: &Path) -> Result<Self> {
        let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self { out: Box::new(std::io::BufWriter::new(f)) })
    }

    pub fn sink() -> Self {
        Self { out: Box::new(std::io::sink()) }
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
