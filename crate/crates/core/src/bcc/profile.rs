use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::BccError;

/// A class of slot values the profile controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueClass {
    Zero,
    /// Uniform over `[1, t)`.
    UniformNonzero,
    Fixed(u64),
}

impl ValueClass {
    pub fn sample<R: Rng>(&self, rng: &mut R, t: u64) -> u64 {
        match *self {
            Self::Zero => 0,
            Self::UniformNonzero => rng.gen_range(1..t),
            Self::Fixed(v) => v % t,
        }
    }
}

/// Fixed per-class slot counts: the padded body of `n` slots holds `body[j]`
/// members of class `j`; the `N - n` tail adds `body[j] * (N/n - 1)` more so
/// each class totals `body[j] * N/n` across the whole ciphertext.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub classes: Vec<ValueClass>,
    pub body: Vec<usize>,
    pub n: usize,
    pub slot_count: usize,
}

impl FrequencyProfile {
    pub fn new(classes: Vec<ValueClass>, body: Vec<usize>, slot_count: usize) -> Result<Self, BccError> {
        if classes.is_empty() || classes.len() != body.len() {
            return Err(BccError::Profile("one frequency per value class required".into()));
        }
        let n: usize = body.iter().sum();
        if n < 2 || !n.is_power_of_two() {
            return Err(BccError::Profile(format!(
                "padded length {n} is not a power of two >= 2"
            )));
        }
        if n > slot_count / 2 {
            return Err(BccError::Length { n, slots: slot_count });
        }
        Ok(Self {
            classes,
            body,
            n,
            slot_count,
        })
    }

    /// Zero / nonzero-random classes with equal frequencies, `n` the
    /// smallest power of two with room for both input counts.
    pub fn balanced(zeros: usize, randoms: usize, slot_count: usize) -> Result<Self, BccError> {
        let n = (2 * zeros.max(randoms)).max(2).next_power_of_two();
        Self::new(
            vec![ValueClass::Zero, ValueClass::UniformNonzero],
            vec![n / 2, n / 2],
            slot_count,
        )
    }

    pub fn replication(&self) -> usize {
        self.slot_count / self.n
    }

    pub fn tail_counts(&self) -> Vec<usize> {
        self.body.iter().map(|f| f * (self.replication() - 1)).collect()
    }

    /// Per-class counts across all `N` slots of a shuffled ciphertext.
    pub fn totals(&self) -> Vec<usize> {
        self.body.iter().map(|f| f * self.replication()).collect()
    }

    pub fn class_index(&self, class: ValueClass) -> Option<usize> {
        self.classes.iter().position(|&c| c == class)
    }

    /// Class of a decrypted value: fixed values and zero first, then the
    /// nonzero class.
    pub fn classify(&self, v: u64) -> Option<usize> {
        let exact = self.classes.iter().position(|c| match *c {
            ValueClass::Zero => v == 0,
            ValueClass::Fixed(x) => v == x,
            ValueClass::UniformNonzero => false,
        });
        exact.or_else(|| (v != 0).then(|| self.class_index(ValueClass::UniformNonzero)).flatten())
    }

    /// Per-class counts of a slot vector; unclassifiable values are counted
    /// in the last entry.
    pub fn count(&self, values: &[u64]) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len() + 1];
        for &v in values {
            counts[self.classify(v).unwrap_or(self.classes.len())] += 1;
        }
        counts
    }
}
