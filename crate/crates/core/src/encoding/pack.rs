//! Client-side query packing with repetitive encoding, compression of the
//! repetitions before encryption, and server-side homomorphic decompression.

use std::collections::HashMap;

use super::cbt::pe_encode;
use super::layout::QueryLayout;
use crate::error::EncodingError;
use crate::fhe::{CipherHandle, Evaluator, PlainVector, SecretKey};

/// Quantized feature values keyed by feature name.
pub type QueryFeatures = HashMap<String, u64>;

/// Compressed, encrypted query: `ceil(M / R)` ciphertexts for `M` bit-planes.
#[derive(Debug, Clone)]
pub struct CompressedQuery {
    pub ciphertexts: Vec<CipherHandle>,
    pub layout: QueryLayout,
}

/// One slot array per CW bit position, with every label bit repeated
/// `layout.repetition` times.
pub fn pack_plaintexts(features: &QueryFeatures, layout: &QueryLayout) -> Result<Vec<Vec<u64>>, EncodingError> {
    let mut planes = vec![vec![0u64; layout.slot_count]; layout.plane_count()];
    for (fi, f) in layout.features.iter().enumerate() {
        let value = *features
            .get(&f.name)
            .ok_or_else(|| EncodingError::MissingFeature(f.name.clone()))?;
        let pe = pe_encode(value, layout.bitwidth, layout.cw)?;
        for (d, label) in pe.labels().iter().enumerate() {
            for (j, plane) in planes.iter_mut().enumerate() {
                let bit = label.bit(j);
                for k in 0..layout.repetition {
                    plane[layout.slot(fi, d, k)] = bit;
                }
            }
        }
    }
    Ok(planes)
}

fn encrypt_all(arrays: &[Vec<u64>], sk: &SecretKey) -> Result<Vec<CipherHandle>, EncodingError> {
    arrays
        .iter()
        .map(|a| Ok(sk.encrypt(&sk.params().encode(a)?)?))
        .collect()
}

/// Uncompressed encrypted query, one ciphertext per bit-plane.
pub fn pack_query(
    features: &QueryFeatures,
    layout: &QueryLayout,
    sk: &SecretKey,
) -> Result<Vec<CipherHandle>, EncodingError> {
    encrypt_all(&pack_plaintexts(features, layout)?, sk)
}

/// Folds `R` consecutive bit-planes into one array: plane `j` writes each
/// label's bit at `start + (j mod R) * gap`, into array `j / R`. Only the
/// layout is consulted; the values are copied through unchanged.
pub fn compress_plaintexts(planes: &[Vec<u64>], layout: &QueryLayout) -> Result<Vec<Vec<u64>>, EncodingError> {
    layout.validate()?;
    if planes.len() != layout.plane_count() {
        return Err(EncodingError::Layout(format!(
            "{} bit-planes supplied, layout expects {}",
            planes.len(),
            layout.plane_count()
        )));
    }
    let starts: Vec<usize> = layout.unit_starts().collect();
    let gap = layout.gap();
    let mut out = Vec::with_capacity(layout.compressed_count());
    let mut current = vec![0u64; layout.slot_count];
    for (count, plane) in planes.iter().enumerate() {
        if plane.len() != layout.slot_count {
            return Err(EncodingError::Layout(format!(
                "bit-plane has {} slots, layout expects {}",
                plane.len(),
                layout.slot_count
            )));
        }
        let repeat = count % layout.repetition;
        for &start in &starts {
            current[start + repeat * gap] = plane[start];
        }
        if repeat + 1 == layout.repetition {
            out.push(std::mem::replace(&mut current, vec![0u64; layout.slot_count]));
        }
    }
    if !planes.len().is_multiple_of(layout.repetition) {
        out.push(current);
    }
    Ok(out)
}

pub fn compress_query(
    planes: &[Vec<u64>],
    layout: &QueryLayout,
    sk: &SecretKey,
) -> Result<CompressedQuery, EncodingError> {
    let arrays = compress_plaintexts(planes, layout)?;
    Ok(CompressedQuery {
        ciphertexts: encrypt_all(&arrays, sk)?,
        layout: layout.clone(),
    })
}

/// Restores the `M` repetitive bit-planes from a compressed query using one
/// plaintext mask and `R - 1` row rotations per plane. Both rows are restored
/// simultaneously.
pub fn decompress_query(query: &CompressedQuery, ev: &Evaluator) -> Result<Vec<CipherHandle>, EncodingError> {
    let layout = &query.layout;
    layout.validate()?;
    if query.ciphertexts.len() != layout.compressed_count() {
        return Err(EncodingError::Layout(format!(
            "received {} ciphertexts, layout expects {}",
            query.ciphertexts.len(),
            layout.compressed_count()
        )));
    }
    if layout.slot_count != ev.params().slot_count() {
        return Err(EncodingError::Layout(
            "layout slot count differs from parameters".into(),
        ));
    }
    let r = layout.repetition;
    if r == 1 {
        return Ok(query.ciphertexts.clone());
    }
    let gap = layout.gap();
    let starts: Vec<usize> = layout.unit_starts().collect();
    let masks: Vec<PlainVector> = (0..r)
        .map(|k| {
            let mut m = vec![0u64; layout.slot_count];
            for &s in &starts {
                m[s + k * gap] = 1;
            }
            ev.params().encode(&m)
        })
        .collect::<Result<_, _>>()?;

    let mut out = Vec::with_capacity(layout.plane_count());
    for j in 0..layout.plane_count() {
        let (group, k) = (j / r, j % r);
        let masked = ev.mult_plain(&query.ciphertexts[group], &masks[k])?;
        let mut acc = masked.clone();
        for m in (0..r).filter(|&m| m != k) {
            let moved = if m < k {
                ev.rotate_rows(&masked, (k - m) * gap)?
            } else {
                ev.rotate_rows_right(&masked, (m - k) * gap)?
            };
            acc = ev.add(&acc, &moved)?;
        }
        out.push(acc);
    }
    Ok(out)
}
