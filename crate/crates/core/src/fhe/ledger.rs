use std::ops::Sub;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Per-party operation counters. Counters only grow; take a [`LedgerSnapshot`]
/// before and after a phase and subtract to get the phase cost.
#[derive(Debug, Default)]
pub struct OpLedger {
    row_rotations: AtomicU64,
    column_rotations: AtomicU64,
    cipher_mults: AtomicU64,
    plain_mults: AtomicU64,
    additions: AtomicU64,
    encryptions: AtomicU64,
    decryptions: AtomicU64,
    max_depth: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub row_rotations: u64,
    pub column_rotations: u64,
    pub cipher_mults: u64,
    pub plain_mults: u64,
    pub additions: u64,
    pub encryptions: u64,
    pub decryptions: u64,
    pub max_depth: u64,
}

impl LedgerSnapshot {
    /// Row plus column rotations.
    pub fn rotations(&self) -> u64 {
        self.row_rotations + self.column_rotations
    }
}

impl Sub for LedgerSnapshot {
    type Output = LedgerSnapshot;

    /// Counter deltas. `max_depth` keeps the later value since it is a high-water mark.
    fn sub(self, earlier: LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            row_rotations: self.row_rotations - earlier.row_rotations,
            column_rotations: self.column_rotations - earlier.column_rotations,
            cipher_mults: self.cipher_mults - earlier.cipher_mults,
            plain_mults: self.plain_mults - earlier.plain_mults,
            additions: self.additions - earlier.additions,
            encryptions: self.encryptions - earlier.encryptions,
            decryptions: self.decryptions - earlier.decryptions,
            max_depth: self.max_depth,
        }
    }
}

impl OpLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn row_rotation(&self) {
        self.row_rotations.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn column_rotation(&self) {
        self.column_rotations.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn cipher_mult(&self, depth: u32) {
        self.cipher_mults.fetch_add(1, Ordering::Relaxed);
        self.observe_depth(depth);
    }

    pub(crate) fn plain_mult(&self, depth: u32) {
        self.plain_mults.fetch_add(1, Ordering::Relaxed);
        self.observe_depth(depth);
    }

    pub(crate) fn addition(&self) {
        self.additions.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn encryption(&self) {
        self.encryptions.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn decryption(&self) {
        self.decryptions.fetch_add(1, Ordering::Relaxed);
    }

    fn observe_depth(&self, depth: u32) {
        self.max_depth.fetch_max(u64::from(depth), Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            row_rotations: self.row_rotations.load(Ordering::Relaxed),
            column_rotations: self.column_rotations.load(Ordering::Relaxed),
            cipher_mults: self.cipher_mults.load(Ordering::Relaxed),
            plain_mults: self.plain_mults.load(Ordering::Relaxed),
            additions: self.additions.load(Ordering::Relaxed),
            encryptions: self.encryptions.load(Ordering::Relaxed),
            decryptions: self.decryptions.load(Ordering::Relaxed),
            max_depth: self.max_depth.load(Ordering::Relaxed),
        }
    }
}
