use serde::{Deserialize, Serialize};

use super::cw::CwParams;
use crate::error::EncodingError;

pub const LAYOUT_VERSION: u32 = 1;

/// Slot placement of one feature's encoded labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSlots {
    pub name: String,
    pub start: usize,
    /// Distance between consecutive repetitions of one label bit.
    pub gap: usize,
}

/// Public description of how a query is laid out in ciphertext slots.
///
/// Bit `j` of the level-`d` label of feature `f`, repetition `k`, lives in
/// slot `start_f + d * level_stride + k * gap` of bit-plane ciphertext `j`.
/// A feature's slots never straddle the two rows, so row rotations act on
/// every feature block independently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLayout {
    pub version: u32,
    pub slot_count: usize,
    pub bitwidth: u32,
    pub cw: CwParams,
    pub repetition: usize,
    pub level_stride: usize,
    pub features: Vec<FeatureSlots>,
}

impl QueryLayout {
    /// Packs feature blocks of `(bitwidth + 1) * repetition` consecutive slots
    /// into the first row, then the second row.
    pub fn build(
        slot_count: usize,
        bitwidth: u32,
        cw: CwParams,
        repetition: usize,
        names: &[String],
    ) -> Result<Self, EncodingError> {
        if repetition == 0 {
            return Err(EncodingError::Layout("repetition must be at least 1".into()));
        }
        let levels = bitwidth as usize + 1;
        let block = levels * repetition;
        let half = slot_count / 2;
        if block > half {
            return Err(EncodingError::Layout(format!(
                "feature block of {block} slots exceeds a row of {half}"
            )));
        }
        let per_row = half / block;
        if names.len() > 2 * per_row {
            return Err(EncodingError::Layout(format!(
                "{} features need more than {slot_count} slots ({per_row} blocks per row)",
                names.len()
            )));
        }
        let features = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let (row, pos) = (i / per_row, i % per_row);
                FeatureSlots {
                    name: name.clone(),
                    start: row * half + pos * block,
                    gap: 1,
                }
            })
            .collect();
        let layout = Self {
            version: LAYOUT_VERSION,
            slot_count,
            bitwidth,
            cw,
            repetition,
            level_stride: repetition,
            features,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn levels(&self) -> usize {
        self.bitwidth as usize + 1
    }

    /// Number of bit-plane ciphertexts before compression.
    pub fn plane_count(&self) -> usize {
        self.cw.length
    }

    /// Number of ciphertexts after compression.
    pub fn compressed_count(&self) -> usize {
        self.plane_count().div_ceil(self.repetition)
    }

    /// Common repetition gap (validated to be shared by every feature).
    pub fn gap(&self) -> usize {
        self.features.first().map_or(1, |f| f.gap)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Base slot of the `(feature, level)` label, i.e. its repetition 0.
    pub fn unit_start(&self, feature: usize, level: usize) -> usize {
        self.features[feature].start + level * self.level_stride
    }

    pub fn slot(&self, feature: usize, level: usize, rep: usize) -> usize {
        self.unit_start(feature, level) + rep * self.features[feature].gap
    }

    /// Base slots of every `(feature, level)` unit.
    pub fn unit_starts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.features.len()).flat_map(move |f| (0..self.levels()).map(move |d| self.unit_start(f, d)))
    }

    pub fn utilized_slots(&self) -> usize {
        self.features.len() * self.levels() * self.repetition
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        let err = |m: String| Err(EncodingError::Layout(m));
        if self.version != LAYOUT_VERSION {
            return err(format!("unsupported layout version {}", self.version));
        }
        if self.slot_count < 2 || !self.slot_count.is_power_of_two() {
            return err(format!("slot count {} is not a power of two", self.slot_count));
        }
        if self.bitwidth == 0 || self.bitwidth > 32 {
            return err(format!("bit width {} outside 1..=32", self.bitwidth));
        }
        if self.cw.codebook_size() < 1u128 << self.bitwidth {
            return err("CW codebook too small for the bit width".into());
        }
        if self.repetition == 0 || self.level_stride == 0 {
            return err("repetition and level stride must be positive".into());
        }
        if let Some(f) = self.features.iter().find(|f| f.gap != self.gap() || f.gap == 0) {
            return err(format!(
                "feature `{}` has repetition gap {}, expected the shared gap {}",
                f.name,
                f.gap,
                self.gap()
            ));
        }
        let half = self.slot_count / 2;
        let mut used = vec![false; self.slot_count];
        for (fi, f) in self.features.iter().enumerate() {
            let row = f.start / half;
            for d in 0..self.levels() {
                for k in 0..self.repetition {
                    let s = self.slot(fi, d, k);
                    if s >= self.slot_count || s / half != row {
                        return err(format!("feature `{}` leaves its row at slot {s}", f.name));
                    }
                    if std::mem::replace(&mut used[s], true) {
                        return err(format!("slot {s} assigned twice"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("layout serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, EncodingError> {
        let layout: Self = serde_json::from_str(s).map_err(|e| EncodingError::Layout(format!("json: {e}")))?;
        layout.validate()?;
        Ok(layout)
    }
}
