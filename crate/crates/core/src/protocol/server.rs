//! Server role: prepares a model once, derives a deployment per parameter
//! set, and runs one session state machine per connection. The server only
//! ever holds evaluation keys.

use std::collections::HashMap;
use std::net::TcpListener;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::{CryptoRng, Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::frame::{Frame, MessageType, QueryId};
use super::messages::{decode_ciphers, decode_keys, encode_ciphers, SetupInfo};
use super::transport::{Connection, TcpTransport};
use super::Phase;
use crate::bcc::{prepare_challenge, BccTranscript, FrequencyProfile, ShuffleRecord};
use crate::comparison::{batch_compare, BatchComparison, NodePlan};
use crate::encoding::{decompress_query, CompressedQuery, CwParams, QueryLayout};
use crate::error::ProtocolError;
use crate::fhe::{CipherHandle, Evaluator, FheParams, LedgerSnapshot, OpLedger};
use crate::forest::{
    cluster_paths, leaf_plaintext, plan_packing, quantize, sum_path, ForestModel, LeafSelector, PackLayout, PathTable,
    QuantizedForest, ScoreMode, SumPathPack,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerConfig {
    pub bitwidth: u32,
    /// Lower bound on the padded challenge length; lets several models
    /// publish the same frequency profile. 0 picks the smallest that fits.
    pub min_profile_len: usize,
    /// Seeds the per-session randomness; `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bitwidth: 16,
            min_profile_len: 0,
            seed: None,
        }
    }
}

/// Everything derived from the model alone.
#[derive(Debug, Clone)]
pub struct ServerModel {
    pub model: ForestModel,
    pub forest: QuantizedForest,
    pub plan: NodePlan,
    pub table: PathTable,
}

impl ServerModel {
    pub fn new(model: ForestModel, bitwidth: u32) -> Result<Self, ProtocolError> {
        let forest = quantize(&model, bitwidth)?;
        let plan = forest.node_plan();
        let table = cluster_paths(&forest);
        Ok(Self {
            model,
            forest,
            plan,
            table,
        })
    }
}

/// A model bound to one parameter set: query layout, path packing and
/// challenge profile.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub model: Arc<ServerModel>,
    pub params: FheParams,
    pub layout: QueryLayout,
    pub pack: PackLayout,
    pub profile: FrequencyProfile,
    pub info: SetupInfo,
}

/// Homomorphic cost of one query, split by stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query_id: String,
    pub plan_size: usize,
    pub node_count: usize,
    pub decompress: LedgerSnapshot,
    pub compare: LedgerSnapshot,
    pub comparison_fold_rotations: usize,
    pub comparison_alignment_rotations: usize,
    pub sum_path: LedgerSnapshot,
    pub bcc: LedgerSnapshot,
    pub finalize: LedgerSnapshot,
}

/// Output of the first server round.
#[derive(Debug, Clone)]
pub struct RoundOne {
    pub transcripts: Vec<BccTranscript>,
    pub report: QueryReport,
}

impl RoundOne {
    pub fn challenges(&self) -> Vec<CipherHandle> {
        self.transcripts.iter().map(|t| t.shuffled.clone()).collect()
    }

    pub fn records(&self) -> Vec<ShuffleRecord> {
        self.transcripts.iter().map(|t| t.record.clone()).collect()
    }
}

impl Deployment {
    pub fn new(model: Arc<ServerModel>, params: &FheParams, min_profile_len: usize) -> Result<Self, ProtocolError> {
        let forest = &model.forest;
        let slots = params.slot_count();
        let t = params.plaintext_modulus();
        let bound = forest.max_abs_aggregate();
        if u128::from(bound) * 2 >= u128::from(t) {
            return Err(ProtocolError::Setup(format!(
                "aggregate score bound {bound} does not fit the centered range of t = {t}"
            )));
        }
        let cw = CwParams::default_for_bits(forest.bitwidth);
        let layout = QueryLayout::build(
            slots,
            forest.bitwidth,
            cw,
            model.plan.max_repetition(),
            &forest.feature_names(),
        )?;
        let pack = plan_packing(forest, &model.table, slots / 4)?;
        let zeros = pack.chunk_zeros.iter().copied().max().unwrap_or(0);
        let randoms = (0..pack.chunk_count())
            .map(|c| pack.chunk_randoms(c))
            .max()
            .unwrap_or(0);
        let auto = FrequencyProfile::balanced(zeros, randoms, slots)?;
        let profile = if min_profile_len > auto.n {
            let n = min_profile_len.next_power_of_two();
            FrequencyProfile::new(auto.classes.clone(), vec![n / 2, n / 2], slots)?
        } else {
            auto
        };
        let decompress = u32::from(layout.repetition > 1);
        let needed = decompress + cw.equality_depth() + 1 + profile.n.trailing_zeros() + 1;
        if needed.max(2) > params.depth_budget() {
            return Err(ProtocolError::Setup(format!(
                "evaluation needs depth {needed}, parameters allow {}",
                params.depth_budget()
            )));
        }
        let info = SetupInfo {
            model_kind: forest.kind,
            num_classes: forest.num_classes,
            score_mode: forest.mode,
            score_len: forest.score_len(),
            features: forest.features.clone(),
            layout: layout.clone(),
            profile: profile.clone(),
            chunk_count: pack.chunk_count(),
        };
        Ok(Self {
            model,
            params: params.clone(),
            layout,
            pack,
            profile,
            info,
        })
    }

    /// Decompresses the query and compares it against every plan entry.
    pub fn compare(
        &self,
        ev: &Evaluator,
        query: &[CipherHandle],
    ) -> Result<(Vec<CipherHandle>, BatchComparison), ProtocolError> {
        let compressed = CompressedQuery {
            ciphertexts: query.to_vec(),
            layout: self.layout.clone(),
        };
        let planes = decompress_query(&compressed, ev)?;
        let cmp = batch_compare(ev, &planes, &self.layout, &self.model.plan)?;
        Ok((planes, cmp))
    }

    pub fn sum_paths<R: Rng + CryptoRng>(
        &self,
        ev: &Evaluator,
        cmp: &BatchComparison,
        anchor: &CipherHandle,
        rng: &mut R,
    ) -> Result<SumPathPack, ProtocolError> {
        let m = &self.model;
        Ok(sum_path(
            ev, &m.forest, &m.table, &self.pack, &m.plan, &cmp.bits, anchor, rng,
        )?)
    }

    /// Pads and shuffles every chunk of the SumPath pack.
    pub fn challenge<R: Rng>(
        &self,
        ev: &Evaluator,
        pack: &SumPathPack,
        rng: &mut R,
    ) -> Result<Vec<BccTranscript>, ProtocolError> {
        pack.chunks
            .iter()
            .enumerate()
            .map(|(c, ct)| {
                let counts = [self.pack.chunk_zeros[c], self.pack.chunk_randoms(c)];
                Ok(prepare_challenge(
                    ev,
                    ct,
                    self.pack.chunk_used[c],
                    &counts,
                    &self.profile,
                    rng,
                )?)
            })
            .collect()
    }

    pub fn round_one<R: Rng + CryptoRng>(
        &self,
        ev: &Evaluator,
        query: &[CipherHandle],
        rng: &mut R,
    ) -> Result<RoundOne, ProtocolError> {
        let ledger = ev.ledger();
        let s0 = ledger.snapshot();
        let compressed = CompressedQuery {
            ciphertexts: query.to_vec(),
            layout: self.layout.clone(),
        };
        let planes = decompress_query(&compressed, ev)?;
        let s1 = ledger.snapshot();
        let cmp = batch_compare(ev, &planes, &self.layout, &self.model.plan)?;
        let s2 = ledger.snapshot();
        let anchor = planes
            .first()
            .or(query.first())
            .ok_or_else(|| ProtocolError::Frame("query carries no ciphertexts".into()))?;
        let pack = self.sum_paths(ev, &cmp, anchor, rng)?;
        let s3 = ledger.snapshot();
        let transcripts = self.challenge(ev, &pack, rng)?;
        let s4 = ledger.snapshot();
        Ok(RoundOne {
            transcripts,
            report: QueryReport {
                plan_size: self.model.plan.len(),
                node_count: self.model.forest.node_count(),
                decompress: s1 - s0,
                compare: s2 - s1,
                comparison_fold_rotations: cmp.fold_rotations,
                comparison_alignment_rotations: cmp.alignment_rotations,
                sum_path: s3 - s2,
                bcc: s4 - s3,
                ..Default::default()
            },
        })
    }

    /// Per score slot: multiplies each converted chunk by its permuted leaf
    /// plaintext, sums the first `n` slots into slot 0, masks slot 0 and
    /// moves it to the score's index.
    pub fn finalize(
        &self,
        ev: &Evaluator,
        converted: &[CipherHandle],
        records: &[ShuffleRecord],
    ) -> Result<CipherHandle, ProtocolError> {
        let chunks = self.pack.chunk_count();
        if converted.len() != chunks || records.len() != chunks {
            return Err(ProtocolError::Frame(format!(
                "{} converted ciphertexts for {chunks} challenges",
                converted.len()
            )));
        }
        let m = &self.model;
        let selectors: Vec<LeafSelector> = match m.forest.mode {
            ScoreMode::Signed => vec![LeafSelector::Signed],
            ScoreMode::PerClass => (0..m.forest.num_classes).map(LeafSelector::Class).collect(),
        };
        let first = self.params.unit(0, 1);
        let mut out: Option<CipherHandle> = None;
        for (index, &selector) in selectors.iter().enumerate() {
            let mut acc: Option<CipherHandle> = None;
            for (c, ct) in converted.iter().enumerate() {
                let leaves = leaf_plaintext(
                    &m.forest,
                    &m.table,
                    &self.pack,
                    c,
                    records[c].forward(),
                    selector,
                    &self.params,
                )?;
                let product = ev.mult_plain(ct, &leaves)?;
                acc = Some(match acc {
                    None => product,
                    Some(a) => ev.add(&a, &product)?,
                });
            }
            let mut acc = acc.expect("at least one chunk");
            let mut width = 1;
            while width < self.profile.n {
                acc = ev.add(&acc, &ev.rotate_rows(&acc, width)?)?;
                width *= 2;
            }
            let mut score = ev.mult_plain(&acc, &first)?;
            if index > 0 {
                score = ev.rotate_rows_right(&score, index)?;
            }
            out = Some(match out {
                None => score,
                Some(o) => ev.add(&o, &score)?,
            });
        }
        Ok(out.expect("at least one score slot"))
    }
}

struct Pending {
    query_id: QueryId,
    records: Vec<ShuffleRecord>,
    report: QueryReport,
}

/// Serves one model to any number of connections.
pub struct Server {
    model: Arc<ServerModel>,
    config: ServerConfig,
    deployments: Mutex<HashMap<(usize, u64, u32), Arc<Deployment>>>,
    ledger: Arc<OpLedger>,
    sessions: AtomicU64,
    reports: Mutex<Vec<QueryReport>>,
}

impl Server {
    /// Quantizes and indexes the model; invalid or empty models fail here.
    pub fn new(model: ForestModel, config: ServerConfig) -> Result<Self, ProtocolError> {
        Ok(Self {
            model: Arc::new(ServerModel::new(model, config.bitwidth)?),
            config,
            deployments: Mutex::new(HashMap::new()),
            ledger: Arc::new(OpLedger::new()),
            sessions: AtomicU64::new(0),
            reports: Mutex::new(Vec::new()),
        })
    }

    pub fn model(&self) -> &Arc<ServerModel> {
        &self.model
    }

    /// Operation counts across every session of this server.
    pub fn ledger(&self) -> &Arc<OpLedger> {
        &self.ledger
    }

    pub fn reports(&self) -> Vec<QueryReport> {
        self.reports.lock().expect("report lock").clone()
    }

    pub fn deployment(&self, params: &FheParams) -> Result<Arc<Deployment>, ProtocolError> {
        let key = (params.slot_count(), params.plaintext_modulus(), params.depth_budget());
        let mut cache = self.deployments.lock().expect("deployment lock");
        if let Some(d) = cache.get(&key) {
            return Ok(d.clone());
        }
        let d = Arc::new(Deployment::new(
            self.model.clone(),
            params,
            self.config.min_profile_len,
        )?);
        cache.insert(key, d.clone());
        Ok(d)
    }

    pub fn session(&self) -> ServerSession<'_> {
        let index = self.sessions.fetch_add(1, Ordering::Relaxed);
        let rng = match self.config.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s.wrapping_add(index)),
            None => ChaCha20Rng::from_entropy(),
        };
        ServerSession {
            server: self,
            phase: Phase::Setup,
            ev: None,
            deployment: None,
            pending: None,
            rng,
        }
    }

    /// Answers frames on one connection until the peer hangs up. Request
    /// errors are reported to the peer as ERROR frames and do not end the
    /// session.
    pub fn serve(&self, conn: &mut Connection) -> Result<(), ProtocolError> {
        let mut session = self.session();
        loop {
            let frame = match conn.recv() {
                Ok(f) => f,
                Err(ProtocolError::Closed) => return Ok(()),
                Err(e @ (ProtocolError::Checksum { .. } | ProtocolError::Version(_) | ProtocolError::Frame(_))) => {
                    tracing::warn!(error = %e, "rejected frame");
                    conn.send(&Frame::error(QueryId::NONE, &e.to_string()))?;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let query_id = frame.query_id;
            let reply = session.handle(frame).unwrap_or_else(|e| {
                tracing::warn!(query = %query_id, error = %e, "request failed");
                Frame::error(query_id, &e.to_string())
            });
            conn.send(&reply)?;
        }
    }

    /// Accepts TCP connections, one thread per connection. Stops after
    /// `limit` connections when given.
    pub fn serve_tcp(self: Arc<Self>, listener: TcpListener, limit: Option<usize>) -> Result<(), ProtocolError> {
        let mut handles = Vec::new();
        for (i, stream) in listener.incoming().enumerate() {
            let stream = stream?;
            stream.set_nodelay(true)?;
            let server = self.clone();
            handles.push(std::thread::spawn(move || {
                let mut conn = Connection::new(TcpTransport::new(stream));
                if let Err(e) = server.serve(&mut conn) {
                    tracing::warn!(error = %e, "connection ended with an error");
                }
            }));
            if limit.is_some_and(|l| i + 1 >= l) {
                break;
            }
        }
        for h in handles {
            let _ = h.join();
        }
        Ok(())
    }
}

/// Per-connection server state.
pub struct ServerSession<'a> {
    server: &'a Server,
    phase: Phase,
    ev: Option<Evaluator>,
    deployment: Option<Arc<Deployment>>,
    pending: Option<Pending>,
    rng: ChaCha20Rng,
}

impl ServerSession<'_> {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn unexpected(&self, kind: MessageType) -> ProtocolError {
        ProtocolError::Unexpected {
            got: kind.to_string(),
            phase: self.phase.to_string(),
        }
    }

    /// Processes one request and returns the reply frame.
    pub fn handle(&mut self, frame: Frame) -> Result<Frame, ProtocolError> {
        let qid = frame.query_id;
        match (frame.kind, self.phase) {
            (MessageType::SetupReq, Phase::Setup | Phase::Ready) => {
                let keys = decode_keys(&frame.payload)?;
                let deployment = self.server.deployment(&keys.params)?;
                let payload = serde_json::to_vec(&deployment.info)?;
                self.ev = Some(Evaluator::with_ledger(keys, self.server.ledger.clone()));
                self.deployment = Some(deployment);
                self.phase = Phase::Ready;
                Ok(Frame::new(MessageType::SetupResp, QueryId::NONE, payload))
            }
            (MessageType::Query, Phase::Ready) => {
                self.phase = Phase::QuerySent;
                let result = self.round_one(qid, &frame.payload);
                self.phase = if result.is_ok() {
                    Phase::BccPending
                } else {
                    Phase::Ready
                };
                result.map_err(|e| ProtocolError::InQuery {
                    query_id: qid.to_string(),
                    source: Box::new(e),
                })
            }
            (MessageType::BccResponse, Phase::BccPending) => {
                let expected = self.pending.as_ref().expect("pending in bcc phase").query_id;
                if expected != qid {
                    return Err(ProtocolError::StaleQuery {
                        got: qid.to_string(),
                        expected: expected.to_string(),
                    });
                }
                let pending = self.pending.take().expect("checked above");
                self.phase = Phase::Ready;
                self.finalize(pending, &frame.payload)
                    .map_err(|e| ProtocolError::InQuery {
                        query_id: qid.to_string(),
                        source: Box::new(e),
                    })
            }
            (kind, _) => Err(self.unexpected(kind)),
        }
    }

    fn round_one(&mut self, qid: QueryId, payload: &[u8]) -> Result<Frame, ProtocolError> {
        let query = decode_ciphers(payload)?;
        let ev = self.ev.as_ref().expect("ready sessions hold keys");
        let deployment = self.deployment.as_ref().expect("ready sessions hold a deployment");
        let round = deployment.round_one(ev, &query, &mut self.rng)?;
        let challenges = round.challenges();
        let mut report = round.report.clone();
        report.query_id = qid.to_string();
        self.pending = Some(Pending {
            query_id: qid,
            records: round.records(),
            report,
        });
        Ok(Frame::new(MessageType::BccChallenge, qid, encode_ciphers(&challenges)))
    }

    fn finalize(&mut self, pending: Pending, payload: &[u8]) -> Result<Frame, ProtocolError> {
        let converted = decode_ciphers(payload)?;
        let ev = self.ev.as_ref().expect("ready sessions hold keys");
        let deployment = self.deployment.as_ref().expect("ready sessions hold a deployment");
        let before = ev.ledger().snapshot();
        let result = deployment.finalize(ev, &converted, &pending.records)?;
        let mut report = pending.report;
        report.finalize = ev.ledger().snapshot() - before;
        self.server.reports.lock().expect("report lock").push(report);
        Ok(Frame::new(
            MessageType::Result,
            pending.query_id,
            encode_ciphers(&[result]),
        ))
    }
}
