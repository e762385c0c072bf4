//! Shared plumbing for the binaries: run configuration, common flags, JSON
//! line reports and logging.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use boostfhe::fhe::{FheParams, DEFAULT_DEPTH_BUDGET, DEFAULT_SLOT_COUNT};
use clap::Args;
use serde::{Deserialize, Serialize};

/// Settings read from a TOML file; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub slot_count: Option<usize>,
    pub plaintext_modulus: Option<u64>,
    pub depth_budget: Option<u32>,
    pub bitwidth: Option<u32>,
    pub intensity: Option<f64>,
    /// `tcp://host:port` or `in-process`.
    pub transport: Option<String>,
    pub seed: Option<u64>,
    pub report: Option<PathBuf>,
    /// Minimum padded challenge length published by the server.
    pub profile_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportChoice {
    Tcp(String),
    InProcess,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn bitwidth(&self) -> Result<u32> {
        match self.bitwidth.unwrap_or(16) {
            b @ (8 | 16 | 32) => Ok(b),
            b => bail!("bit width {b} not supported; use 8, 16 or 32"),
        }
    }

    pub fn params(&self) -> Result<FheParams> {
        let slots = self.slot_count.unwrap_or(DEFAULT_SLOT_COUNT);
        let budget = self.depth_budget.unwrap_or(DEFAULT_DEPTH_BUDGET);
        Ok(match self.plaintext_modulus {
            Some(t) => FheParams::new(slots, t, budget)?,
            None => FheParams::with_slot_count(slots)?.with_depth_budget(budget)?,
        })
    }

    pub fn transport(&self) -> Result<Option<TransportChoice>> {
        Ok(match self.transport.as_deref() {
            None => None,
            Some("in-process") => Some(TransportChoice::InProcess),
            Some(s) => match s.strip_prefix("tcp://") {
                Some(addr) => Some(TransportChoice::Tcp(addr.to_string())),
                None => bail!("transport `{s}` must be `tcp://host:port` or `in-process`"),
            },
        })
    }
}

/// Flags every binary accepts.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Quantization bit width: 8, 16 or 32.
    #[arg(long)]
    pub bitwidth: Option<u32>,
    /// Append JSON-line reports here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Log at debug level.
    #[arg(short, long)]
    pub verbose: bool,
}

impl CommonArgs {
    /// Loads the configuration file, if any, and applies flag overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.bitwidth.is_some() {
            cfg.bitwidth = self.bitwidth;
        }
        if self.report.is_some() {
            cfg.report = self.report.clone();
        }
        cfg.bitwidth()?;
        Ok(cfg)
    }
}

/// Writes one JSON object per line.
pub struct Reporter {
    out: Box<dyn Write>,
}

impl Reporter {
    pub fn new(path: Option<&Path>) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .with_context(|| format!("opening report {}", p.display()))?,
            ),
            None => Box::new(std::io::stdout()),
        };
        Ok(Self { out })
    }

    pub fn emit<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn init_logging(verbose: bool) {
    let level = if verbose {
        tracing::Level::DEBUG
    } else {
        tracing::Level::INFO
    };
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .try_init();
}
