//! Serves a forest model over TCP.

use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use boostfhe::forest::ForestModel;
use boostfhe::protocol::{Server, ServerConfig};
use boostfhe_cli::{init_logging, CommonArgs, Reporter, TransportChoice};
use clap::Parser;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(about = "Serve encrypted inference for a forest model")]
struct Cli {
    #[arg(long)]
    model: PathBuf,
    /// Address to bind, e.g. 127.0.0.1:7000 (port 0 picks a free port).
    #[arg(long)]
    listen: Option<String>,
    /// Exit after this many connections.
    #[arg(long)]
    max_connections: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_logging(cli.common.verbose);
    let cfg = cli.common.resolve()?;
    let listen = match (&cli.listen, cfg.transport()?) {
        (Some(addr), _) => addr.clone(),
        (None, Some(TransportChoice::Tcp(addr))) => addr,
        (None, Some(TransportChoice::InProcess)) => bail!("the server binary needs a TCP address"),
        (None, None) => "127.0.0.1:7000".to_string(),
    };
    let model = ForestModel::load(&cli.model).with_context(|| format!("loading {}", cli.model.display()))?;
    let server = Arc::new(Server::new(
        model,
        ServerConfig {
            bitwidth: cfg.bitwidth()?,
            min_profile_len: cfg.profile_len.unwrap_or(0),
            seed: cfg.seed,
        },
    )?);
    // fail early on parameters the model cannot run under
    server.deployment(&cfg.params()?)?;

    let listener = TcpListener::bind(&listen).with_context(|| format!("binding {listen}"))?;
    let addr = listener.local_addr()?;
    let mut reporter = Reporter::new(cfg.report.as_deref())?;
    reporter.emit(&json!({ "event": "listening", "addr": addr.to_string() }))?;
    tracing::info!(%addr, "serving");
    server.clone().serve_tcp(listener, cli.max_connections)?;
    reporter.emit(&json!({
        "event": "stopped",
        "ledger": server.ledger().snapshot(),
        "queries": server.reports(),
    }))?;
    Ok(())
}
