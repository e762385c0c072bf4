//! Submits query rows from a CSV file and prints one prediction per row.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use boostfhe::dataset::Dataset;
use boostfhe::forest::ForestModel;
use boostfhe::protocol::{serve_in_process, Client, Connection, Server, ServerConfig, TcpTransport};
use boostfhe_cli::{init_logging, CommonArgs, Reporter, TransportChoice};
use clap::Parser;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(about = "Run encrypted inference on CSV rows")]
struct Cli {
    /// CSV with a header naming the model's features.
    #[arg(long)]
    query: PathBuf,
    /// Only this zero-based row.
    #[arg(long)]
    row: Option<usize>,
    /// Server address host:port.
    #[arg(long)]
    connect: Option<String>,
    /// Host this model in-process instead of connecting.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_logging(cli.common.verbose);
    let cfg = cli.common.resolve()?;
    let params = cfg.params()?;
    let choice = match (&cli.connect, cfg.transport()?) {
        (Some(addr), _) => TransportChoice::Tcp(addr.clone()),
        (None, Some(t)) => t,
        (None, None) if cli.model.is_some() => TransportChoice::InProcess,
        (None, None) => bail!("pass --connect or --model"),
    };
    let (mut conn, local) = match choice {
        TransportChoice::Tcp(addr) => (
            Connection::new(TcpTransport::connect(&addr).with_context(|| format!("connecting to {addr}"))?),
            None,
        ),
        TransportChoice::InProcess => {
            let path = cli.model.as_ref().context("in-process transport needs --model")?;
            let model = ForestModel::load(path).with_context(|| format!("loading {}", path.display()))?;
            let server = Arc::new(Server::new(
                model,
                ServerConfig {
                    bitwidth: cfg.bitwidth()?,
                    min_profile_len: cfg.profile_len.unwrap_or(0),
                    seed: cfg.seed,
                },
            )?);
            let (conn, handle) = serve_in_process(server);
            (conn, Some(handle))
        }
    };

    let mut client = Client::new(&params, cfg.seed.unwrap_or(0));
    let info = client.setup(&mut conn)?.clone();
    let names: Vec<String> = info.features.iter().map(|f| f.name.clone()).collect();
    let data = Dataset::load(&cli.query).with_context(|| format!("reading {}", cli.query.display()))?;
    let rows = data.columns(&names)?;
    let selected: Vec<usize> = match cli.row {
        Some(r) if r < rows.len() => vec![r],
        Some(r) => bail!("row {r} out of range; file has {} rows", rows.len()),
        None => (0..rows.len()).collect(),
    };

    let mut reporter = Reporter::new(cfg.report.as_deref())?;
    for i in selected {
        let res = client.infer_row(&mut conn, &rows[i])?;
        reporter.emit(&json!({
            "row": i,
            "query_id": res.query_id.to_string(),
            "class": res.class,
            "scores": res.scores,
            "collision_suspected": res.collision_suspected,
            "exchanges": res.exchanges(),
            "bytes_sent": res.bytes_sent(),
            "bytes_received": res.bytes_received(),
            "transcript": res.transcript,
        }))?;
    }
    drop(conn);
    if let Some(h) = local {
        h.join().expect("server thread")?;
    }
    Ok(())
}
