//! Little-endian, length-prefixed encoding of parameters, evaluation keys and
//! ciphertexts.
//!
//! Every object starts with a one-byte backend tag and a one-byte format
//! version. Reference-backend ciphertexts carry their slot vector verbatim;
//! the encoding is for transport and tests and is not secure.

use super::{CipherHandle, EvalKeys, FheParams, KeyId};
use crate::error::FheError;

pub const BACKEND_REFERENCE: u8 = 0x01;
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Default, Clone)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// u32 length prefix followed by the bytes.
    pub fn put_bytes(&mut self, bytes: &[u8]) {
        self.put_u32(bytes.len() as u32);
        self.buf.extend_from_slice(bytes);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct ByteReader<'a> {
    buf: &'a [u8],
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FheError> {
        if self.buf.len() < n {
            return Err(FheError::Decode(format!("need {n} bytes, {} remain", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn get_u8(&mut self) -> Result<u8, FheError> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u32(&mut self) -> Result<u32, FheError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn get_u64(&mut self) -> Result<u64, FheError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn get_bytes(&mut self) -> Result<&'a [u8], FheError> {
        let len = self.get_u32()? as usize;
        self.take(len)
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn finish(self) -> Result<(), FheError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(FheError::Decode(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

fn header(w: &mut ByteWriter) {
    w.put_u8(BACKEND_REFERENCE);
    w.put_u8(FORMAT_VERSION);
}

fn check_header(r: &mut ByteReader<'_>) -> Result<(), FheError> {
    let tag = r.get_u8()?;
    if tag != BACKEND_REFERENCE {
        return Err(FheError::Decode(format!("unknown backend tag {tag:#04x}")));
    }
    let version = r.get_u8()?;
    if version != FORMAT_VERSION {
        return Err(FheError::Decode(format!("unsupported format version {version}")));
    }
    Ok(())
}

pub fn write_params(w: &mut ByteWriter, p: &FheParams) {
    header(w);
    w.put_u32(p.slot_count() as u32);
    w.put_u64(p.plaintext_modulus());
    w.put_u32(p.depth_budget());
}

pub fn read_params(r: &mut ByteReader<'_>) -> Result<FheParams, FheError> {
    check_header(r)?;
    let n = r.get_u32()? as usize;
    let t = r.get_u64()?;
    let depth = r.get_u32()?;
    FheParams::new(n, t, depth)
}

pub fn write_eval_keys(w: &mut ByteWriter, k: &EvalKeys) {
    write_params(w, &k.params);
    w.put_u64(k.key_id.0);
}

pub fn read_eval_keys(r: &mut ByteReader<'_>) -> Result<EvalKeys, FheError> {
    let params = read_params(r)?;
    let key_id = KeyId(r.get_u64()?);
    Ok(EvalKeys { key_id, params })
}

pub fn write_cipher(w: &mut ByteWriter, c: &CipherHandle) {
    header(w);
    w.put_u64(c.key_id().0);
    w.put_u32(c.depth());
    let slots = c.payload();
    w.put_u32(slots.len() as u32);
    for &s in slots {
        w.put_u64(s);
    }
}

pub fn read_cipher(r: &mut ByteReader<'_>) -> Result<CipherHandle, FheError> {
    check_header(r)?;
    let key_id = KeyId(r.get_u64()?);
    let depth = r.get_u32()?;
    let len = r.get_u32()? as usize;
    if len.checked_mul(8).is_none_or(|b| b > r.remaining()) {
        return Err(FheError::Decode(format!("slot count {len} exceeds payload")));
    }
    let slots = (0..len).map(|_| r.get_u64()).collect::<Result<Vec<_>, _>>()?;
    Ok(CipherHandle::from_parts(slots, depth, key_id))
}

pub fn cipher_to_bytes(c: &CipherHandle) -> Vec<u8> {
    let mut w = ByteWriter::new();
    write_cipher(&mut w, c);
    w.into_bytes()
}

pub fn cipher_from_bytes(bytes: &[u8]) -> Result<CipherHandle, FheError> {
    let mut r = ByteReader::new(bytes);
    let c = read_cipher(&mut r)?;
    r.finish()?;
    Ok(c)
}

/// Writes a u32 count followed by each ciphertext.
pub fn write_cipher_list(w: &mut ByteWriter, cs: &[CipherHandle]) {
    w.put_u32(cs.len() as u32);
    for c in cs {
        write_cipher(w, c);
    }
}

pub fn read_cipher_list(r: &mut ByteReader<'_>) -> Result<Vec<CipherHandle>, FheError> {
    let n = r.get_u32()? as usize;
    (0..n).map(|_| read_cipher(r)).collect()
}
