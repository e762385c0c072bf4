//! Runs queries in-process and reports homomorphic cost, wire bytes and
//! wall time.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use boostfhe::dataset::Dataset;
use boostfhe::encoding::pack_query;
use boostfhe::forest::ForestModel;
use boostfhe::protocol::messages::encode_ciphers;
use boostfhe::protocol::{serve_in_process, Client, MessageType, Server, ServerConfig};
use boostfhe_cli::{init_logging, CommonArgs, Reporter};
use clap::Parser;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(about = "Measure encrypted inference cost")]
struct Cli {
    #[arg(long)]
    model: PathBuf,
    /// CSV with a header naming the model's features.
    #[arg(long)]
    queries: PathBuf,
    /// Use at most this many rows.
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_logging(cli.common.verbose);
    let cfg = cli.common.resolve()?;
    let params = cfg.params()?;
    let model = ForestModel::load(&cli.model).with_context(|| format!("loading {}", cli.model.display()))?;
    let server = Arc::new(Server::new(
        model,
        ServerConfig {
            bitwidth: cfg.bitwidth()?,
            min_profile_len: cfg.profile_len.unwrap_or(0),
            seed: cfg.seed,
        },
    )?);
    let (mut conn, handle) = serve_in_process(server.clone());
    let mut client = Client::new(&params, cfg.seed.unwrap_or(0));
    let setup_start = Instant::now();
    let info = client.setup(&mut conn)?.clone();
    let setup_ms = setup_start.elapsed().as_secs_f64() * 1e3;

    let names: Vec<String> = info.features.iter().map(|f| f.name.clone()).collect();
    let data = Dataset::load(&cli.queries).with_context(|| format!("reading {}", cli.queries.display()))?;
    let mut rows = data.columns(&names)?;
    rows.truncate(cli.limit.unwrap_or(usize::MAX));

    let mut reporter = Reporter::new(cfg.report.as_deref())?;
    let mut total_ms = 0.0;
    let mut query_bytes = 0u64;
    let mut uncompressed_bytes = 0u64;
    for (i, row) in rows.iter().enumerate() {
        let features = client.quantize_row(row)?;
        let plain = pack_query(&features, &info.layout, client.secret_key())?;
        let start = Instant::now();
        let res = client.infer(&mut conn, &features)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        total_ms += ms;
        let sent_query = res
            .transcript
            .iter()
            .find(|e| e.kind == MessageType::Query)
            .map_or(0, |e| e.bytes as u64);
        // same framing overhead as the compressed query frame
        let plain_frame = 4 + 10 + encode_ciphers(&plain).len() as u64 + 4;
        query_bytes += sent_query;
        uncompressed_bytes += plain_frame;
        let server_report = server.reports().last().cloned();
        reporter.emit(&json!({
            "kind": "query",
            "row": i,
            "class": res.class,
            "scores": res.scores,
            "wall_ms": ms,
            "collision_suspected": res.collision_suspected,
            "query_bytes": sent_query,
            "uncompressed_query_bytes": plain_frame,
            "bytes_sent": res.bytes_sent(),
            "bytes_received": res.bytes_received(),
            "server": server_report,
        }))?;
    }
    let stats = conn.stats().clone();
    drop(conn);
    handle.join().expect("server thread")?;
    let ledger = server.ledger().snapshot();
    let per_phase: serde_json::Map<String, serde_json::Value> = [
        MessageType::SetupReq,
        MessageType::SetupResp,
        MessageType::Query,
        MessageType::BccChallenge,
        MessageType::BccResponse,
        MessageType::Result,
    ]
    .iter()
    .map(|&k| (k.to_string(), json!(stats.bytes_of(k))))
    .collect();
    reporter.emit(&json!({
        "kind": "summary",
        "queries": rows.len(),
        "slot_count": params.slot_count(),
        "bitwidth": info.layout.bitwidth,
        "repetition": info.layout.repetition,
        "plane_count": info.layout.plane_count(),
        "compressed_count": info.layout.compressed_count(),
        "query_bytes": query_bytes,
        "uncompressed_query_bytes": uncompressed_bytes,
        "compression_ratio": if uncompressed_bytes == 0 { 0.0 } else { query_bytes as f64 / uncompressed_bytes as f64 },
        "bytes_by_message": per_phase,
        "rotations": ledger.rotations(),
        "cipher_mults": ledger.cipher_mults,
        "plain_mults": ledger.plain_mults,
        "max_depth": ledger.max_depth,
        "server_decryptions": ledger.decryptions,
        "setup_ms": setup_ms,
        "mean_query_ms": if rows.is_empty() { 0.0 } else { total_ms / rows.len() as f64 },
    }))?;
    Ok(())
}
