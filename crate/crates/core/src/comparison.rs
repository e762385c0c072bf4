//! Homomorphic `x > θ` over encrypted point encodings against plaintext range
//! encodings, batched over every distinct `(feature, threshold)` pair.

use crate::encoding::{pack_query, re_encode, CwCodeword, CwParams, QueryFeatures, QueryLayout, ReVector};
use crate::error::ComparisonError;
use crate::fhe::{inverse_mod, CipherHandle, Evaluator, FheParams, PlainVector, SecretKey};

/// Encrypted comparison result; slot `slot_index` holds 1 iff `x > θ`.
#[derive(Debug, Clone)]
pub struct ComparisonBit {
    pub ciphertext: CipherHandle,
    pub slot_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanEntry {
    pub feature: usize,
    pub threshold: u64,
}

/// Distinct `(feature, threshold)` pairs, sorted. The `k`-th threshold of a
/// feature is compared in repetition `k` of that feature's slot block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePlan {
    bitwidth: u32,
    entries: Vec<PlanEntry>,
    reps: Vec<usize>,
}

impl NodePlan {
    pub fn new(bitwidth: u32, pairs: impl IntoIterator<Item = (usize, u64)>) -> Result<Self, ComparisonError> {
        let mut entries: Vec<PlanEntry> = pairs
            .into_iter()
            .map(|(feature, threshold)| PlanEntry { feature, threshold })
            .collect();
        if let Some(e) = entries.iter().find(|e| e.threshold >> bitwidth != 0) {
            return Err(ComparisonError::PlanMismatch(format!(
                "threshold {} of feature {} outside {bitwidth} bits",
                e.threshold, e.feature
            )));
        }
        entries.sort_unstable();
        entries.dedup();
        let mut reps = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let rep = match i.checked_sub(1).map(|p| &entries[p]) {
                Some(prev) if prev.feature == e.feature => reps[i - 1] + 1,
                _ => 0,
            };
            reps.push(rep);
        }
        Ok(Self {
            bitwidth,
            entries,
            reps,
        })
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, feature: usize, threshold: u64) -> Option<usize> {
        self.entries.binary_search(&PlanEntry { feature, threshold }).ok()
    }

    /// Repetition slot used by entry `i`.
    pub fn repetition_of(&self, i: usize) -> usize {
        self.reps[i]
    }

    /// Largest per-feature distinct-threshold count (at least 1).
    pub fn max_repetition(&self) -> usize {
        self.reps.iter().map(|r| r + 1).max().unwrap_or(1)
    }

    /// Slot holding entry `i`'s result after the level fold.
    pub fn result_slot(&self, i: usize, layout: &QueryLayout) -> usize {
        layout.slot(self.entries[i].feature, 0, self.reps[i])
    }

    fn check_layout(&self, layout: &QueryLayout) -> Result<(), ComparisonError> {
        if layout.bitwidth != self.bitwidth {
            return Err(ComparisonError::PlanMismatch(format!(
                "layout bit width {} differs from plan bit width {}",
                layout.bitwidth, self.bitwidth
            )));
        }
        for (e, &rep) in self.entries.iter().zip(&self.reps) {
            if e.feature >= layout.features.len() || rep >= layout.repetition {
                return Err(ComparisonError::PlanMismatch(format!(
                    "entry ({}, {}) has no slot in the layout",
                    e.feature, e.threshold
                )));
            }
        }
        Ok(())
    }

    /// Plaintext bit-planes of the range encodings, placed at the slots the
    /// query's point encodings occupy. Unused slots and null levels are zero.
    pub fn re_planes(&self, layout: &QueryLayout, params: &FheParams) -> Result<Vec<PlainVector>, ComparisonError> {
        self.check_layout(layout)?;
        let mut planes = vec![vec![0u64; layout.slot_count]; layout.plane_count()];
        for (i, e) in self.entries.iter().enumerate() {
            let re = re_encode(e.threshold, self.bitwidth, layout.cw)?;
            for (d, label) in re.labels().iter().enumerate() {
                let Some(label) = label else { continue };
                let slot = layout.slot(e.feature, d, self.reps[i]);
                for (j, plane) in planes.iter_mut().enumerate() {
                    plane[slot] = label.bit(j);
                }
            }
        }
        Ok(planes.iter().map(|p| params.encode(p)).collect::<Result<_, _>>()?)
    }
}

/// Slotwise CW equality: 1 where the encrypted and plaintext labels match.
///
/// With `K = Σ_j x_j y_j`, equal weight-`h` words give `K = h` and any other
/// pair gives `K < h`, so `Π_{i<h} (K - i) / h!` is the indicator. Depth is
/// `ceil(log2 h) + 2` independently of the label length.
pub fn equality_planes(
    ev: &Evaluator,
    x: &[CipherHandle],
    y: &[PlainVector],
    weight: usize,
) -> Result<CipherHandle, ComparisonError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(ComparisonError::PlanMismatch(format!(
            "{} encrypted planes against {} plaintext planes",
            x.len(),
            y.len()
        )));
    }
    let products = x
        .iter()
        .zip(y)
        .map(|(c, p)| ev.mult_plain(c, p))
        .collect::<Result<Vec<_>, _>>()?;
    let k = ev.add_all(&products)?.expect("non-empty");
    let params = ev.params();
    let factors = (0..weight as u64)
        .map(|i| {
            if i == 0 {
                Ok(k.clone())
            } else {
                ev.sub_plain(&k, &params.constant(i))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let prod = ev.mult_tree(factors)?;
    let t = params.plaintext_modulus();
    let fact = (1..=weight as u64).fold(1u64, |acc, i| {
        ((u128::from(acc) * u128::from(i)) % u128::from(t)) as u64
    });
    Ok(ev.mult_plain(&prod, &params.constant(inverse_mod(fact, t)))?)
}

/// Equality of an encrypted label (one ciphertext per CW bit, the bit
/// broadcast to every slot) with a plaintext label.
pub fn is_equal(
    ev: &Evaluator,
    enc_label: &[CipherHandle],
    plain_label: &CwCodeword,
) -> Result<CipherHandle, ComparisonError> {
    if enc_label.len() != plain_label.len() {
        return Err(ComparisonError::PlanMismatch(format!(
            "label lengths differ: {} vs {}",
            enc_label.len(),
            plain_label.len()
        )));
    }
    let planes: Vec<PlainVector> = (0..plain_label.len())
        .map(|j| ev.params().constant(plain_label.bit(j)))
        .collect();
    equality_planes(ev, enc_label, &planes, plain_label.weight())
}

/// Encrypts the bits of one label, each broadcast to every slot.
pub fn encrypt_label(label: &CwCodeword, sk: &SecretKey) -> Result<Vec<CipherHandle>, ComparisonError> {
    (0..label.len())
        .map(|j| Ok(sk.encrypt(&sk.params().constant(label.bit(j)))?))
        .collect()
}

/// Sums `count` slots spaced `stride` apart into the first of them, using
/// `floor(log2 count)` doubling rotations plus one per extra binary digit.
/// Returns the result and the number of rotations spent.
pub fn sum_strided(
    ev: &Evaluator,
    c: &CipherHandle,
    stride: usize,
    count: usize,
) -> Result<(CipherHandle, usize), ComparisonError> {
    if count == 0 {
        return Ok((ev.zero_like(c)?, 0));
    }
    let mut rotations = 0;
    let mut acc: Option<CipherHandle> = None;
    let (mut block, mut size, mut offset, mut remaining) = (c.clone(), 1usize, 0usize, count);
    loop {
        if remaining & 1 == 1 {
            let part = if offset == 0 {
                block.clone()
            } else {
                rotations += 1;
                ev.rotate_rows(&block, offset * stride)?
            };
            acc = Some(match acc {
                None => part,
                Some(a) => ev.add(&a, &part)?,
            });
            offset += size;
        }
        remaining >>= 1;
        if remaining == 0 {
            break;
        }
        rotations += 1;
        let shifted = ev.rotate_rows(&block, size * stride)?;
        block = ev.add(&block, &shifted)?;
        size *= 2;
    }
    Ok((acc.expect("count > 0"), rotations))
}

/// Moves each listed slot to slot 0, one row rotation per slot plus a single
/// shared column rotation when any slot lies in the second row. Slot 0
/// itself costs nothing. Returns the aligned copies and the rotation count.
pub fn align_to_front(
    ev: &Evaluator,
    c: &CipherHandle,
    slots: &[usize],
) -> Result<(Vec<CipherHandle>, usize), ComparisonError> {
    let half = ev.params().half();
    let mut rotations = 0;
    let swapped = if slots.iter().any(|&s| s >= half) {
        rotations += 1;
        Some(ev.rotate_columns(c)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(slots.len());
    for &s in slots {
        if s >= 2 * half {
            return Err(ComparisonError::PlanMismatch(format!("slot {s} out of range")));
        }
        let (src, offset) = match &swapped {
            Some(sw) if s >= half => (sw, s - half),
            _ => (c, s),
        };
        if offset == 0 {
            out.push(src.clone());
        } else {
            rotations += 1;
            out.push(ev.rotate_rows(src, offset)?);
        }
    }
    Ok((out, rotations))
}

/// Comparison bits for every plan entry, each at slot 0.
#[derive(Debug, Clone)]
pub struct BatchComparison {
    pub bits: Vec<ComparisonBit>,
    /// Rotations spent summing levels; shared by all entries.
    pub fold_rotations: usize,
    /// Rotations spent bringing each result to slot 0.
    pub alignment_rotations: usize,
}

/// Compares every plan entry against the (decompressed) encrypted query in
/// one SIMD pass: one equality circuit over all slots, one shared level
/// fold, then one alignment rotation per entry.
pub fn batch_compare(
    ev: &Evaluator,
    query: &[CipherHandle],
    layout: &QueryLayout,
    plan: &NodePlan,
) -> Result<BatchComparison, ComparisonError> {
    if query.len() != layout.plane_count() {
        return Err(ComparisonError::PlanMismatch(format!(
            "query has {} planes, layout expects {}",
            query.len(),
            layout.plane_count()
        )));
    }
    if plan.is_empty() {
        return Ok(BatchComparison {
            bits: Vec::new(),
            fold_rotations: 0,
            alignment_rotations: 0,
        });
    }
    let planes = plan.re_planes(layout, ev.params())?;
    let eq = equality_planes(ev, query, &planes, layout.cw.weight)?;
    let (folded, fold_rotations) = sum_strided(ev, &eq, layout.level_stride, layout.levels())?;
    let slots: Vec<usize> = (0..plan.len()).map(|i| plan.result_slot(i, layout)).collect();
    let (aligned, alignment_rotations) = align_to_front(ev, &folded, &slots)?;
    Ok(BatchComparison {
        bits: aligned
            .into_iter()
            .map(|ciphertext| ComparisonBit {
                ciphertext,
                slot_index: 0,
            })
            .collect(),
        fold_rotations,
        alignment_rotations,
    })
}

/// A single encrypted point encoding, laid out as a one-feature query.
#[derive(Debug, Clone)]
pub struct EncryptedPe {
    pub planes: Vec<CipherHandle>,
    pub layout: QueryLayout,
}

pub fn encrypt_pe(value: u64, bits: u32, cw: CwParams, sk: &SecretKey) -> Result<EncryptedPe, ComparisonError> {
    let layout = QueryLayout::build(sk.params().slot_count(), bits, cw, 1, &["x".to_string()])?;
    let features: QueryFeatures = [("x".to_string(), value)].into();
    Ok(EncryptedPe {
        planes: pack_query(&features, &layout, sk)?,
        layout,
    })
}

/// `α > β` as the sum over levels of `PE(α)[d] == RE(β)[d]`; null levels
/// contribute 0 and at most one level can match.
pub fn greater_than(ev: &Evaluator, pe: &EncryptedPe, re: &ReVector) -> Result<ComparisonBit, ComparisonError> {
    let layout = &pe.layout;
    if re.levels() != layout.levels() {
        return Err(ComparisonError::DepthMismatch {
            encrypted: layout.levels(),
            plain: re.levels(),
        });
    }
    let mut planes = vec![vec![0u64; layout.slot_count]; layout.plane_count()];
    for (d, label) in re.labels().iter().enumerate() {
        if let Some(label) = label {
            if label.len() != layout.plane_count() {
                return Err(ComparisonError::PlanMismatch("label length differs from layout".into()));
            }
            for (j, plane) in planes.iter_mut().enumerate() {
                plane[layout.slot(0, d, 0)] = label.bit(j);
            }
        }
    }
    let planes = planes
        .iter()
        .map(|p| ev.params().encode(p))
        .collect::<Result<Vec<_>, _>>()?;
    let eq = equality_planes(ev, &pe.planes, &planes, layout.cw.weight)?;
    let (folded, _) = sum_strided(ev, &eq, layout.level_stride, layout.levels())?;
    let (mut aligned, _) = align_to_front(ev, &folded, &[layout.slot(0, 0, 0)])?;
    Ok(ComparisonBit {
        ciphertext: aligned.pop().expect("one slot"),
        slot_index: 0,
    })
}
