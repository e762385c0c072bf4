use serde::{Deserialize, Serialize};

use crate::error::FheError;

pub const DEFAULT_SLOT_COUNT: usize = 1 << 13;
pub const DEFAULT_DEPTH_BUDGET: u32 = 24;
const MIN_PLAINTEXT_MODULUS: u64 = 1 << 20;

/// Scheme parameters shared by both parties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FheParams {
    slot_count: usize,
    plaintext_modulus: u64,
    depth_budget: u32,
    /// Δ for lattice backends; the reference backend leaves it unset.
    scaling_factor: Option<u64>,
}

impl FheParams {
    pub fn new(slot_count: usize, plaintext_modulus: u64, depth_budget: u32) -> Result<Self, FheError> {
        if slot_count < 2 || !slot_count.is_power_of_two() {
            return Err(FheError::InvalidParams(format!(
                "slot count {slot_count} is not a power of two >= 2"
            )));
        }
        if plaintext_modulus >= 1 << 62 || !is_prime(plaintext_modulus) {
            return Err(FheError::InvalidParams(format!(
                "plaintext modulus {plaintext_modulus} is not a prime below 2^62"
            )));
        }
        if plaintext_modulus % (2 * slot_count as u64) != 1 {
            return Err(FheError::InvalidParams(format!(
                "plaintext modulus {plaintext_modulus} is not 1 mod {}",
                2 * slot_count
            )));
        }
        // ceil(log2 h) + 2 + 1 with the smallest useful weight h = 2.
        if depth_budget < 4 {
            return Err(FheError::InvalidParams(format!(
                "depth budget {depth_budget} below the minimum of 4"
            )));
        }
        Ok(Self {
            slot_count,
            plaintext_modulus,
            depth_budget,
            scaling_factor: None,
        })
    }

    /// `slot_count` slots with the smallest batching-friendly prime above 2^20.
    pub fn with_slot_count(slot_count: usize) -> Result<Self, FheError> {
        if slot_count < 2 || !slot_count.is_power_of_two() {
            return Err(FheError::InvalidParams(format!(
                "slot count {slot_count} is not a power of two >= 2"
            )));
        }
        let t = batching_prime_above(MIN_PLAINTEXT_MODULUS, slot_count);
        Self::new(slot_count, t, DEFAULT_DEPTH_BUDGET)
    }

    pub fn with_depth_budget(mut self, depth_budget: u32) -> Result<Self, FheError> {
        self.depth_budget = depth_budget;
        Self::new(self.slot_count, self.plaintext_modulus, depth_budget)
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn half(&self) -> usize {
        self.slot_count / 2
    }

    pub fn plaintext_modulus(&self) -> u64 {
        self.plaintext_modulus
    }

    pub fn depth_budget(&self) -> u32 {
        self.depth_budget
    }

    pub fn scaling_factor(&self) -> Option<u64> {
        self.scaling_factor
    }

    /// Centered representative: values above t/2 map to negatives.
    pub fn to_signed(&self, v: u64) -> i64 {
        let t = self.plaintext_modulus;
        if v > t / 2 {
            -((t - v) as i64)
        } else {
            v as i64
        }
    }

    pub fn from_signed(&self, v: i64) -> u64 {
        let t = self.plaintext_modulus as i128;
        (i128::from(v)).rem_euclid(t) as u64
    }
}

impl Default for FheParams {
    fn default() -> Self {
        Self::with_slot_count(DEFAULT_SLOT_COUNT).expect("default parameters are valid")
    }
}

/// Smallest prime `p > lower` with `p ≡ 1 (mod 2 * slot_count)`.
pub fn batching_prime_above(lower: u64, slot_count: usize) -> u64 {
    let step = 2 * slot_count as u64;
    let mut candidate = (lower / step + 1) * step + 1;
    while !is_prime(candidate) {
        candidate += step;
    }
    candidate
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(m)) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn miller_rabin_matches_trial_division() {
        for n in 0..5000u64 {
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
        for n in (1 << 20)..(1 << 20) + 2000u64 {
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
    }

    #[test]
    fn default_modulus_is_batching_prime_above_two_pow_20() {
        let p = FheParams::default();
        let t = p.plaintext_modulus();
        assert!(t > 1 << 20);
        assert_eq!(t % (2 * DEFAULT_SLOT_COUNT as u64), 1);
        assert!(trial_division(t));
        // No smaller candidate in the same residue class qualifies.
        let step = 2 * DEFAULT_SLOT_COUNT as u64;
        let mut c = t - step;
        while c > 1 << 20 {
            assert!(!trial_division(c));
            c -= step;
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(FheParams::new(12, 97, 8).is_err());
        assert!(FheParams::new(16, 91, 8).is_err());
        // 113 is prime but 113 mod 32 != 1
        assert!(FheParams::new(16, 113, 8).is_err());
        assert!(FheParams::new(16, 97, 8).is_ok());
        assert!(FheParams::new(16, batching_prime_above(1 << 20, 16), 3).is_err());
        assert!(FheParams::new(16, batching_prime_above(1 << 20, 16), 4).is_ok());
    }

    #[test]
    fn signed_round_trip() {
        let p = FheParams::with_slot_count(16).unwrap();
        for v in [-5i64, -1, 0, 1, 12345] {
            assert_eq!(p.to_signed(p.from_signed(v)), v);
        }
        assert_eq!(p.from_signed(-3), p.plaintext_modulus() - 3);
    }
}
