//! Padding to a frequency profile, replication and the homomorphic blind
//! shuffle, with the server-side record of the permutation applied.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::profile::FrequencyProfile;
use crate::error::BccError;
use crate::fhe::{CipherHandle, Evaluator};

/// Fills slots `[used, n)` with plaintext pads so that class `j` appears
/// exactly `body[j]` times among the first `n` slots. `counts[j]` is the
/// number of class-`j` values already in `[0, used)`.
pub fn pad_to_profile<R: Rng>(
    ev: &Evaluator,
    c: &CipherHandle,
    used: usize,
    counts: &[usize],
    profile: &FrequencyProfile,
    rng: &mut R,
) -> Result<CipherHandle, BccError> {
    if counts.len() != profile.classes.len() {
        return Err(BccError::Profile(format!(
            "{} input counts for {} classes",
            counts.len(),
            profile.classes.len()
        )));
    }
    for (class, (&count, &limit)) in counts.iter().zip(&profile.body).enumerate() {
        if count > limit {
            return Err(BccError::ProfileExceeded { class, count, limit });
        }
    }
    if counts.iter().sum::<usize>() != used || used > profile.n {
        return Err(BccError::Profile(format!(
            "{used} used slots do not match the class counts or exceed n = {}",
            profile.n
        )));
    }
    if used == profile.n {
        return Ok(c.clone());
    }
    let t = ev.params().plaintext_modulus();
    let mut pad = vec![0u64; ev.params().slot_count()];
    let mut at = used;
    for (j, class) in profile.classes.iter().enumerate() {
        for _ in counts[j]..profile.body[j] {
            pad[at] = class.sample(rng, t);
            at += 1;
        }
    }
    Ok(ev.add_plain(c, &ev.params().encode(&pad)?)?)
}

/// Repeats the first `n` slots across all `N` slots with `log2(N/n)`
/// rotate-and-add steps (row doublings, then one row swap).
pub fn replicate(ev: &Evaluator, c: &CipherHandle, n: usize) -> Result<CipherHandle, BccError> {
    let slots = ev.params().slot_count();
    if n == 0 || !n.is_power_of_two() || n > slots {
        return Err(BccError::Length { n, slots });
    }
    if n == slots {
        return Ok(c.clone());
    }
    let half = slots / 2;
    let mut acc = c.clone();
    let mut width = n;
    while width < half {
        let moved = ev.rotate_rows_right(&acc, width)?;
        acc = ev.add(&acc, &moved)?;
        width *= 2;
    }
    let swapped = ev.rotate_columns(&acc)?;
    Ok(ev.add(&acc, &swapped)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleRound {
    /// `2^s`
    pub granularity: usize,
    pub r1: usize,
    pub r2: usize,
    /// Whether `r2` was moved by `2^s` to keep the halves disjoint.
    pub guard_applied: bool,
}

impl ShuffleRound {
    /// New position of the element at `p`: positions with bit `s` set move
    /// left by `r1`, the others by `r2`.
    pub fn apply(&self, p: usize, n: usize) -> usize {
        let r = if p & self.granularity != 0 { self.r1 } else { self.r2 };
        (p + n - r) % n
    }

    /// True when no two positions land on the same slot.
    pub fn is_disjoint(&self, n: usize) -> bool {
        let mut hit = vec![false; n];
        (0..n).all(|p| !std::mem::replace(&mut hit[self.apply(p, n)], true))
    }
}

/// Where a shuffled slot came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOrigin {
    /// Packed input slot `i`.
    Packed(usize),
    /// Body padding or tail filler.
    Padding,
}

/// Server-side record of one blind shuffle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleRecord {
    pub n: usize,
    pub slot_count: usize,
    pub used: usize,
    pub rounds: Vec<ShuffleRound>,
    forward: Vec<usize>,
    inverse: Vec<usize>,
    /// Class of every tail slot `n..N`.
    pub tail_classes: Vec<usize>,
    pub rotations: usize,
}

impl ShuffleRecord {
    /// `forward()[i]` is the shuffled position of body slot `i`.
    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn position_of(&self, i: usize) -> Option<usize> {
        self.forward.get(i).copied()
    }

    pub fn unshuffle_reference(&self, slot: usize) -> Result<SlotOrigin, BccError> {
        if slot >= self.slot_count {
            return Err(BccError::SlotOutOfRange {
                slot,
                slots: self.slot_count,
            });
        }
        if slot >= self.n {
            return Ok(SlotOrigin::Padding);
        }
        let origin = self.inverse[slot];
        Ok(if origin < self.used {
            SlotOrigin::Packed(origin)
        } else {
            SlotOrigin::Padding
        })
    }
}

/// `log2 n` rounds of mask, split, rotate by random multiples of `2^s` and
/// recombine over a replicated ciphertext, then truncation to `n` slots and a
/// shuffled plaintext tail that completes each class to its fixed total.
///
/// Rotating by `r1` and `r2` keeps the two halves disjoint exactly when
/// `(r1 + r2) / 2^s` is even, so `r2` is shifted by `2^s` otherwise.
pub fn blind_shuffle<R: Rng>(
    ev: &Evaluator,
    c_p: &CipherHandle,
    used: usize,
    profile: &FrequencyProfile,
    rng: &mut R,
) -> Result<(CipherHandle, ShuffleRecord), BccError> {
    let params = ev.params();
    let (slots, n) = (params.slot_count(), profile.n);
    if profile.slot_count != slots || n > slots / 2 || used > n {
        return Err(BccError::Length { n, slots });
    }
    let mut forward: Vec<usize> = (0..n).collect();
    let mut rounds = Vec::new();
    let mut rotations = 0;
    let mut acc = c_p.clone();
    let mut g = 1;
    while g < n {
        let m1 = params.plain_from_fn(|i| u64::from((i % n) & g != 0));
        let m2 = params.plain_from_fn(|i| u64::from((i % n) & g == 0));
        let p1 = ev.mult_plain(&acc, &m1)?;
        let p2 = ev.mult_plain(&acc, &m2)?;
        let r1 = rng.gen_range(0..n / g) * g;
        let mut r2 = rng.gen_range(0..n / g) * g;
        let guard_applied = (r1 + r2) % (2 * g) != 0;
        if guard_applied {
            r2 = (r2 + g) % n;
        }
        let round = ShuffleRound {
            granularity: g,
            r1,
            r2,
            guard_applied,
        };
        if !round.is_disjoint(n) {
            return Err(BccError::Collision(g));
        }
        let mut rotate = |p: CipherHandle, r: usize| -> Result<CipherHandle, BccError> {
            if r == 0 {
                Ok(p)
            } else {
                rotations += 1;
                Ok(ev.rotate_rows(&p, r)?)
            }
        };
        let q1 = rotate(p1, r1)?;
        let q2 = rotate(p2, r2)?;
        acc = ev.add(&q1, &q2)?;
        for p in &mut forward {
            *p = round.apply(*p, n);
        }
        rounds.push(round);
        g *= 2;
    }
    let m3 = params.plain_from_fn(|i| u64::from(i < n));
    acc = ev.mult_plain(&acc, &m3)?;

    let mut tail_classes: Vec<usize> = profile
        .tail_counts()
        .iter()
        .enumerate()
        .flat_map(|(j, &k)| std::iter::repeat_n(j, k))
        .collect();
    tail_classes.shuffle(rng);
    if !tail_classes.is_empty() {
        let t = params.plaintext_modulus();
        let mut tail = vec![0u64; slots];
        for (slot, &j) in tail.iter_mut().skip(n).zip(&tail_classes) {
            *slot = profile.classes[j].sample(rng, t);
        }
        acc = ev.add_plain(&acc, &params.encode(&tail)?)?;
    }

    let mut inverse = vec![0; n];
    for (i, &p) in forward.iter().enumerate() {
        inverse[p] = i;
    }
    Ok((
        acc,
        ShuffleRecord {
            n,
            slot_count: slots,
            used,
            rounds,
            forward,
            inverse,
            tail_classes,
            rotations,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcc::profile::ValueClass;
    use crate::fhe::{generate_keys, FheParams, SecretKey};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys(n: usize) -> (SecretKey, Evaluator) {
        let params = FheParams::with_slot_count(n).unwrap();
        let (sk, ek) = generate_keys(&params, &mut ChaCha20Rng::seed_from_u64(4));
        (sk, Evaluator::new(ek))
    }

    fn dec(sk: &SecretKey, c: &CipherHandle) -> Vec<u64> {
        sk.params().decode(&sk.decrypt(c).unwrap())
    }

    #[test]
    fn replication_examples() {
        let (sk, ev) = keys(16);
        let c = sk.encrypt(&sk.params().encode(&[1, 2, 3, 4]).unwrap()).unwrap();
        let before = ev.ledger().snapshot();
        let r = replicate(&ev, &c, 4).unwrap();
        assert_eq!(dec(&sk, &r), [1, 2, 3, 4].repeat(4));
        assert_eq!((ev.ledger().snapshot() - before).rotations(), 2);
        assert_eq!(dec(&sk, &replicate(&ev, &c, 16).unwrap()), dec(&sk, &c));
        assert!(replicate(&ev, &c, 32).is_err());
    }

    #[test]
    fn padding_counts() {
        let (sk, ev) = keys(512);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let profile = FrequencyProfile::balanced(20, 60, 512).unwrap();
        assert_eq!(profile.n, 128);
        let mut v = vec![0u64; 80];
        for x in v.iter_mut().skip(20) {
            *x = 5;
        }
        let c = sk.encrypt(&sk.params().encode(&v).unwrap()).unwrap();
        let p = pad_to_profile(&ev, &c, 80, &[20, 60], &profile, &mut rng).unwrap();
        let body = &dec(&sk, &p)[..128];
        assert_eq!(profile.count(body), vec![64, 64, 0]);
        assert!(matches!(
            pad_to_profile(&ev, &c, 80, &[70, 10], &profile, &mut rng),
            Err(BccError::ProfileExceeded { class: 0, .. })
        ));
        let full =
            FrequencyProfile::new(vec![ValueClass::Zero, ValueClass::UniformNonzero], vec![64, 64], 512).unwrap();
        let same = pad_to_profile(&ev, &p, 128, &[64, 64], &full, &mut rng).unwrap();
        assert_eq!(dec(&sk, &same), dec(&sk, &p));
    }

    #[test]
    fn shuffle_replays_and_preserves_totals() {
        let (sk, ev) = keys(64);
        let profile = FrequencyProfile::balanced(3, 5, 64).unwrap();
        let n = profile.n;
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..50 {
            let body: Vec<u64> = (0..8u64).map(|i| if i < 3 { 0 } else { 100 + i }).collect();
            let c = sk.encrypt(&sk.params().encode(&body).unwrap()).unwrap();
            let c = pad_to_profile(&ev, &c, 8, &[3, 5], &profile, &mut rng).unwrap();
            let padded = dec(&sk, &c)[..n].to_vec();
            let rep = replicate(&ev, &c, n).unwrap();
            let (s, rec) = blind_shuffle(&ev, &rep, 8, &profile, &mut rng).unwrap();
            let out = dec(&sk, &s);
            for i in 0..n {
                assert_eq!(out[rec.forward()[i]], padded[i]);
                let origin = if i < 8 {
                    SlotOrigin::Packed(i)
                } else {
                    SlotOrigin::Padding
                };
                assert_eq!(rec.unshuffle_reference(rec.forward()[i]).unwrap(), origin);
            }
            let counts = profile.count(&out);
            assert_eq!(counts[..2], profile.totals()[..]);
            assert!(rec.rounds.iter().all(|r| r.is_disjoint(n)));
            let bound = 2 * n.trailing_zeros() as usize;
            assert!(rec.rotations <= bound);
            assert_eq!(rec.unshuffle_reference(n).unwrap(), SlotOrigin::Padding);
            assert!(rec.unshuffle_reference(64).is_err());
        }
    }

    #[test]
    fn unguarded_choice_collides() {
        // r1 + r2 odd multiple of 2^s: the two halves overlap
        let bad = ShuffleRound {
            granularity: 1,
            r1: 1,
            r2: 0,
            guard_applied: false,
        };
        assert!(!bad.is_disjoint(8));
        let good = ShuffleRound { r2: 1, ..bad };
        assert!(good.is_disjoint(8));
    }
}
