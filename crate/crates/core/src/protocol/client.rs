//! Client role: owns the secret key, sends the compressed query, converts
//! the server's challenges and reads the final scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::frame::{Frame, MessageType, QueryId};
use super::messages::{decode_ciphers, encode_ciphers, encode_keys, SetupInfo};
use super::transport::Connection;
use super::Phase;
use crate::bcc::{client_convert, ConversionRule, ConversionStats};
use crate::encoding::{compress_query, pack_plaintexts, QueryFeatures};
use crate::error::ProtocolError;
use crate::fhe::{generate_keys, EvalKeys, FheParams, SecretKey};
use crate::forest::{decide, quantize_value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub outgoing: bool,
    pub kind: MessageType,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub query_id: QueryId,
    /// Raw fixed-point aggregates: one signed total, or one per class.
    pub scores: Vec<i64>,
    pub class: usize,
    /// Set when a challenge held more zeros than the profile allows, i.e.
    /// some non-taken path summed to zero by chance.
    pub collision_suspected: bool,
    pub conversions: Vec<ConversionStats>,
    pub transcript: Vec<TranscriptEntry>,
}

impl InferenceResult {
    /// Protocol steps seen: the query, the conversion round and the result.
    pub fn exchanges(&self) -> usize {
        let stage = |k: MessageType| match k {
            MessageType::BccChallenge | MessageType::BccResponse => MessageType::BccChallenge,
            other => other,
        };
        let mut stages: Vec<MessageType> = self.transcript.iter().map(|e| stage(e.kind)).collect();
        stages.dedup();
        stages.len()
    }

    pub fn bytes_sent(&self) -> usize {
        self.transcript.iter().filter(|e| e.outgoing).map(|e| e.bytes).sum()
    }

    pub fn bytes_received(&self) -> usize {
        self.transcript.iter().filter(|e| !e.outgoing).map(|e| e.bytes).sum()
    }
}

pub struct Client {
    sk: SecretKey,
    keys: EvalKeys,
    rng: ChaCha20Rng,
    info: Option<SetupInfo>,
    phase: Phase,
}

impl Client {
    /// Generates a fresh key pair; every random choice derives from `seed`.
    pub fn new(params: &FheParams, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (sk, keys) = generate_keys(params, &mut rng);
        Self {
            sk,
            keys,
            rng,
            info: None,
            phase: Phase::Setup,
        }
    }

    pub fn secret_key(&self) -> &SecretKey {
        &self.sk
    }

    pub fn setup_info(&self) -> Option<&SetupInfo> {
        self.info.as_ref()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn setup(&mut self, conn: &mut Connection) -> Result<&SetupInfo, ProtocolError> {
        conn.send(&Frame::new(
            MessageType::SetupReq,
            QueryId::NONE,
            encode_keys(&self.keys),
        ))?;
        let reply = expect(conn, MessageType::SetupResp, QueryId::NONE, self.phase)?;
        let info: SetupInfo = serde_json::from_slice(&reply.payload)?;
        info.layout.validate()?;
        if info.layout.slot_count != self.sk.params().slot_count() {
            return Err(ProtocolError::Setup(format!(
                "layout for {} slots, keys for {}",
                info.layout.slot_count,
                self.sk.params().slot_count()
            )));
        }
        self.phase = Phase::Ready;
        Ok(self.info.insert(info))
    }

    /// Quantizes a raw row given in the published feature order.
    pub fn quantize_row(&self, row: &[f64]) -> Result<QueryFeatures, ProtocolError> {
        let info = self.ready_info()?;
        if row.len() != info.features.len() {
            return Err(ProtocolError::Setup(format!(
                "row has {} values, model expects {}",
                row.len(),
                info.features.len()
            )));
        }
        Ok(info
            .features
            .iter()
            .zip(row)
            .map(|(f, &v)| (f.name.clone(), quantize_value(v, f, info.layout.bitwidth)))
            .collect())
    }

    pub fn infer_row(&mut self, conn: &mut Connection, row: &[f64]) -> Result<InferenceResult, ProtocolError> {
        let features = self.quantize_row(row)?;
        self.infer(conn, &features)
    }

    pub fn infer(&mut self, conn: &mut Connection, features: &QueryFeatures) -> Result<InferenceResult, ProtocolError> {
        let info = self.ready_info()?.clone();
        let query_id = QueryId(self.rng.gen());
        let planes = pack_plaintexts(features, &info.layout)?;
        let query = compress_query(&planes, &info.layout, &self.sk)?;
        let mut transcript = Vec::with_capacity(4);
        let send = |conn: &mut Connection, f: Frame, transcript: &mut Vec<TranscriptEntry>| {
            transcript.push(TranscriptEntry {
                outgoing: true,
                kind: f.kind,
                bytes: f.wire_len(),
            });
            conn.send(&f)
        };
        let received = |f: &Frame| TranscriptEntry {
            outgoing: false,
            kind: f.kind,
            bytes: f.wire_len(),
        };

        send(
            conn,
            Frame::new(MessageType::Query, query_id, encode_ciphers(&query.ciphertexts)),
            &mut transcript,
        )?;
        self.phase = Phase::QuerySent;
        let outcome = (|| {
            let challenge = expect(conn, MessageType::BccChallenge, query_id, self.phase)?;
            transcript.push(received(&challenge));
            let challenges = decode_ciphers(&challenge.payload)?;
            if challenges.len() != info.chunk_count {
                return Err(ProtocolError::Frame(format!(
                    "{} challenges, setup announced {}",
                    challenges.len(),
                    info.chunk_count
                )));
            }
            let expected = info.expected_zeros();
            let mut converted = Vec::with_capacity(challenges.len());
            let mut conversions = Vec::with_capacity(challenges.len());
            for c in &challenges {
                let (cc, stats) = client_convert(&self.sk, c, ConversionRule::ZeroIndicator)?;
                converted.push(cc);
                conversions.push(stats);
            }
            let collision_suspected = conversions.iter().any(|s| s.zeros != expected);
            if collision_suspected {
                tracing::warn!(query = %query_id, expected, counts = ?conversions, "path-sum collision suspected");
            }
            send(
                conn,
                Frame::new(MessageType::BccResponse, query_id, encode_ciphers(&converted)),
                &mut transcript,
            )?;
            self.phase = Phase::BccPending;
            let result = expect(conn, MessageType::Result, query_id, self.phase)?;
            transcript.push(received(&result));
            let cts = decode_ciphers(&result.payload)?;
            let [ct] = cts.as_slice() else {
                return Err(ProtocolError::Frame(format!(
                    "result carries {} ciphertexts",
                    cts.len()
                )));
            };
            let slots = self.sk.params().decode_signed(&self.sk.decrypt(ct)?);
            let scores = slots[..info.score_len].to_vec();
            self.phase = Phase::Done;
            Ok(InferenceResult {
                query_id,
                class: decide(&scores),
                scores,
                collision_suspected,
                conversions,
                transcript: transcript.clone(),
            })
        })();
        self.phase = Phase::Ready;
        outcome
    }

    fn ready_info(&self) -> Result<&SetupInfo, ProtocolError> {
        self.info
            .as_ref()
            .ok_or_else(|| ProtocolError::Setup("setup has not completed".into()))
    }
}

fn expect(conn: &mut Connection, kind: MessageType, query_id: QueryId, phase: Phase) -> Result<Frame, ProtocolError> {
    let f = conn.recv()?;
    if f.kind == MessageType::Error {
        return Err(ProtocolError::Remote {
            query_id: f.query_id.to_string(),
            message: String::from_utf8_lossy(&f.payload).into_owned(),
        });
    }
    if f.kind != kind {
        return Err(ProtocolError::Unexpected {
            got: f.kind.to_string(),
            phase: phase.to_string(),
        });
    }
    if f.query_id != query_id {
        return Err(ProtocolError::StaleQuery {
            got: f.query_id.to_string(),
            expected: query_id.to_string(),
        });
    }
    Ok(f)
}
