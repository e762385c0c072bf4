//! SIMD homomorphic-vector layer.
//!
//! Ciphertexts are N-slot integer vectors modulo a plaintext prime `t`,
//! arranged as two rows of N/2 slots. Row rotation cycles each row
//! independently; column rotation swaps the rows.
//!
//! The only backend shipped here is a reference simulator: a ciphertext keeps
//! its slot vector in the clear together with the key it is bound to and its
//! multiplicative depth. All API rules of a lattice scheme (key binding, depth
//! budget, rotation ranges) are enforced, and every operation is recorded in an
//! [`OpLedger`]. It provides no confidentiality.

mod ledger;
mod params;
pub mod serialize;

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::FheError;

pub use ledger::{LedgerSnapshot, OpLedger};
pub(crate) use params::pow_mod;
pub use params::{batching_prime_above, is_prime, FheParams, DEFAULT_DEPTH_BUDGET, DEFAULT_SLOT_COUNT};

/// Identifies the secret key a ciphertext is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyId(pub u64);

/// Encoded plaintext: exactly N slots, every entry reduced modulo t.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainVector {
    slots: Vec<u64>,
}

impl PlainVector {
    pub fn slots(&self) -> &[u64] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

impl FheParams {
    /// Zero-pads `values` to N slots, reducing each entry modulo t.
    pub fn encode(&self, values: &[u64]) -> Result<PlainVector, FheError> {
        if values.len() > self.slot_count() {
            return Err(FheError::Capacity {
                len: values.len(),
                slots: self.slot_count(),
            });
        }
        let t = self.plaintext_modulus();
        let mut slots = vec![0; self.slot_count()];
        for (s, v) in slots.iter_mut().zip(values) {
            *s = v % t;
        }
        Ok(PlainVector { slots })
    }

    /// Like [`encode`](Self::encode) with negatives stored as `t - |v|`.
    pub fn encode_signed(&self, values: &[i64]) -> Result<PlainVector, FheError> {
        let mapped: Vec<u64> = values.iter().map(|&v| self.from_signed(v)).collect();
        self.encode(&mapped)
    }

    pub fn decode(&self, p: &PlainVector) -> Vec<u64> {
        p.slots.clone()
    }

    pub fn decode_signed(&self, p: &PlainVector) -> Vec<i64> {
        p.slots.iter().map(|&v| self.to_signed(v)).collect()
    }

    /// Builds a plaintext slot by slot.
    pub fn plain_from_fn(&self, mut f: impl FnMut(usize) -> u64) -> PlainVector {
        let t = self.plaintext_modulus();
        PlainVector {
            slots: (0..self.slot_count()).map(|i| f(i) % t).collect(),
        }
    }

    /// A plaintext holding `value` in slot `index` and zero elsewhere.
    pub fn unit(&self, index: usize, value: u64) -> PlainVector {
        self.plain_from_fn(|i| if i == index { value } else { 0 })
    }

    pub fn constant(&self, value: u64) -> PlainVector {
        self.plain_from_fn(|_| value)
    }
}

/// An encrypted N-slot vector.
#[derive(Debug, Clone)]
pub struct CipherHandle {
    slots: Arc<Vec<u64>>,
    depth: u32,
    key_id: KeyId,
}

impl CipherHandle {
    /// Multiplicative depth consumed so far.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Reference-backend payload. Exposed for serialization only.
    pub(crate) fn payload(&self) -> &[u64] {
        &self.slots
    }

    pub(crate) fn from_parts(slots: Vec<u64>, depth: u32, key_id: KeyId) -> Self {
        Self {
            slots: Arc::new(slots),
            depth,
            key_id,
        }
    }
}

/// Public evaluation material: everything the server needs to compute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalKeys {
    pub key_id: KeyId,
    pub params: FheParams,
}

/// Client-only key material.
#[derive(Debug, Clone)]
pub struct SecretKey {
    id: KeyId,
    params: FheParams,
    ledger: Arc<OpLedger>,
}

/// Generates a fresh key pair. The secret key records its encryptions and
/// decryptions in its own ledger.
pub fn generate_keys<R: RngCore>(params: &FheParams, rng: &mut R) -> (SecretKey, EvalKeys) {
    let id = KeyId(rng.next_u64());
    let sk = SecretKey {
        id,
        params: params.clone(),
        ledger: Arc::new(OpLedger::new()),
    };
    let ek = EvalKeys {
        key_id: id,
        params: params.clone(),
    };
    (sk, ek)
}

impl SecretKey {
    pub fn id(&self) -> KeyId {
        self.id
    }

    pub fn params(&self) -> &FheParams {
        &self.params
    }

    pub fn ledger(&self) -> &Arc<OpLedger> {
        &self.ledger
    }

    pub fn encrypt(&self, p: &PlainVector) -> Result<CipherHandle, FheError> {
        if p.len() != self.params.slot_count() {
            return Err(FheError::ParamMismatch(format!(
                "plaintext has {} slots, expected {}",
                p.len(),
                self.params.slot_count()
            )));
        }
        self.ledger.encryption();
        Ok(CipherHandle::from_parts(p.slots.clone(), 0, self.id))
    }

    pub fn decrypt(&self, c: &CipherHandle) -> Result<PlainVector, FheError> {
        if c.key_id != self.id || c.slot_count() != self.params.slot_count() {
            return Err(FheError::KeyMismatch);
        }
        if c.depth > self.params.depth_budget() {
            return Err(FheError::NoiseExhausted {
                needed: c.depth,
                budget: self.params.depth_budget(),
            });
        }
        self.ledger.decryption();
        Ok(PlainVector {
            slots: c.slots.as_ref().clone(),
        })
    }

    /// Encrypts a vector of fresh uniform values; handy for tests and padding.
    pub fn encrypt_random<R: Rng>(&self, rng: &mut R) -> Result<CipherHandle, FheError> {
        let t = self.params.plaintext_modulus();
        let p = self.params.plain_from_fn(|_| rng.gen_range(0..t));
        self.encrypt(&p)
    }
}

/// Homomorphic evaluator bound to one key's evaluation material.
#[derive(Debug, Clone)]
pub struct Evaluator {
    keys: EvalKeys,
    ledger: Arc<OpLedger>,
}

impl Evaluator {
    pub fn new(keys: EvalKeys) -> Self {
        Self::with_ledger(keys, Arc::new(OpLedger::new()))
    }

    pub fn with_ledger(keys: EvalKeys, ledger: Arc<OpLedger>) -> Self {
        Self { keys, ledger }
    }

    pub fn params(&self) -> &FheParams {
        &self.keys.params
    }

    pub fn keys(&self) -> &EvalKeys {
        &self.keys
    }

    pub fn ledger(&self) -> &Arc<OpLedger> {
        &self.ledger
    }

    fn check(&self, c: &CipherHandle) -> Result<(), FheError> {
        if c.key_id != self.keys.key_id || c.slot_count() != self.params().slot_count() {
            return Err(FheError::KeyMismatch);
        }
        Ok(())
    }

    fn check_plain(&self, p: &PlainVector) -> Result<(), FheError> {
        if p.len() != self.params().slot_count() {
            return Err(FheError::ParamMismatch(format!(
                "plaintext has {} slots, expected {}",
                p.len(),
                self.params().slot_count()
            )));
        }
        Ok(())
    }

    fn bump_depth(&self, depth: u32) -> Result<u32, FheError> {
        let needed = depth + 1;
        let budget = self.params().depth_budget();
        if needed > budget {
            return Err(FheError::NoiseExhausted { needed, budget });
        }
        Ok(needed)
    }

    fn zip_with(&self, a: &[u64], b: &[u64], depth: u32, f: impl Fn(u64, u64, u64) -> u64) -> CipherHandle {
        let t = self.params().plaintext_modulus();
        let slots = a.iter().zip(b).map(|(&x, &y)| f(x, y, t)).collect();
        CipherHandle::from_parts(slots, depth, self.keys.key_id)
    }

    pub fn add(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        self.check(b)?;
        self.ledger.addition();
        Ok(self.zip_with(&a.slots, &b.slots, a.depth.max(b.depth), add_mod))
    }

    pub fn add_plain(&self, a: &CipherHandle, p: &PlainVector) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        self.check_plain(p)?;
        self.ledger.addition();
        Ok(self.zip_with(&a.slots, &p.slots, a.depth, add_mod))
    }

    pub fn sub(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        self.check(b)?;
        self.ledger.addition();
        Ok(self.zip_with(&a.slots, &b.slots, a.depth.max(b.depth), sub_mod))
    }

    pub fn sub_plain(&self, a: &CipherHandle, p: &PlainVector) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        self.check_plain(p)?;
        self.ledger.addition();
        Ok(self.zip_with(&a.slots, &p.slots, a.depth, sub_mod))
    }

    /// `p - a`.
    pub fn plain_sub(&self, p: &PlainVector, a: &CipherHandle) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        self.check_plain(p)?;
        self.ledger.addition();
        Ok(self.zip_with(&p.slots, &a.slots, a.depth, sub_mod))
    }

    /// Encryption of the all-zero vector derived from `like` (`like - like`).
    pub fn zero_like(&self, like: &CipherHandle) -> Result<CipherHandle, FheError> {
        self.sub(like, like)
    }

    /// Cipher-cipher slotwise product; depth = max(depth(a), depth(b)) + 1.
    pub fn mult(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        self.check(b)?;
        let depth = self.bump_depth(a.depth.max(b.depth))?;
        self.ledger.cipher_mult(depth);
        Ok(self.zip_with(&a.slots, &b.slots, depth, mul_mod))
    }

    /// Cipher-plain slotwise product; counted as one level of depth.
    pub fn mult_plain(&self, a: &CipherHandle, p: &PlainVector) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        self.check_plain(p)?;
        let depth = self.bump_depth(a.depth)?;
        self.ledger.plain_mult(depth);
        Ok(self.zip_with(&a.slots, &p.slots, depth, mul_mod))
    }

    /// Rotates each row left by `offset`: slot `i` of a row receives slot
    /// `(i + offset) mod N/2` of the same row.
    pub fn rotate_rows(&self, a: &CipherHandle, offset: usize) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        let half = self.params().half();
        if offset >= half {
            return Err(FheError::RotationOutOfRange { offset, half });
        }
        self.ledger.row_rotation();
        let mut slots = Vec::with_capacity(a.slots.len());
        for row in a.slots.chunks_exact(half) {
            slots.extend_from_slice(&row[offset..]);
            slots.extend_from_slice(&row[..offset]);
        }
        Ok(CipherHandle::from_parts(slots, a.depth, a.key_id))
    }

    /// Rotates each row right by `offset` (a left rotation by `N/2 - offset`).
    pub fn rotate_rows_right(&self, a: &CipherHandle, offset: usize) -> Result<CipherHandle, FheError> {
        let half = self.params().half();
        if offset >= half {
            return Err(FheError::RotationOutOfRange { offset, half });
        }
        self.rotate_rows(a, (half - offset) % half)
    }

    /// Swaps the two rows.
    pub fn rotate_columns(&self, a: &CipherHandle) -> Result<CipherHandle, FheError> {
        self.check(a)?;
        self.ledger.column_rotation();
        let half = self.params().half();
        let mut slots = Vec::with_capacity(a.slots.len());
        slots.extend_from_slice(&a.slots[half..]);
        slots.extend_from_slice(&a.slots[..half]);
        Ok(CipherHandle::from_parts(slots, a.depth, a.key_id))
    }

    /// Sums a non-empty list of ciphertexts.
    pub fn add_all<'a>(
        &self,
        items: impl IntoIterator<Item = &'a CipherHandle>,
    ) -> Result<Option<CipherHandle>, FheError> {
        let mut acc: Option<CipherHandle> = None;
        for c in items {
            acc = Some(match acc {
                None => {
                    self.check(c)?;
                    c.clone()
                }
                Some(a) => self.add(&a, c)?,
            });
        }
        Ok(acc)
    }

    /// Product of all inputs via a balanced binary tree, depth grows by
    /// `ceil(log2 k)`.
    pub fn mult_tree(&self, items: Vec<CipherHandle>) -> Result<CipherHandle, FheError> {
        if items.is_empty() {
            return Err(FheError::ParamMismatch("empty product".into()));
        }
        let mut layer = items;
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            let mut iter = layer.into_iter();
            while let Some(a) = iter.next() {
                match iter.next() {
                    Some(b) => next.push(self.mult(&a, &b)?),
                    None => next.push(a),
                }
            }
            layer = next;
        }
        Ok(layer.pop().expect("non-empty layer"))
    }
}

fn add_mod(a: u64, b: u64, t: u64) -> u64 {
    let s = a + b;
    if s >= t {
        s - t
    } else {
        s
    }
}

fn sub_mod(a: u64, b: u64, t: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + t - b
    }
}

fn mul_mod(a: u64, b: u64, t: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(t)) as u64
}

/// Multiplicative inverse modulo the prime `t`.
pub fn inverse_mod(a: u64, t: u64) -> u64 {
    pow_mod(a % t, t - 2, t)
}
