//! Little-endian byte cursor shared by the binary formats (EMBS, SCDI, probe models).

use thiserror::Error;

/// Failure while decoding one of the binary formats. Every variant carries
/// the byte offset at which decoding stopped.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("bad magic at byte 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: Vec<u8> },
    #[error("unsupported version {version} at byte {offset}")]
    UnsupportedVersion { version: u32, offset: usize },
    #[error("truncated input at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("invalid UTF-8 at byte {offset}")]
    InvalidUtf8 { offset: usize },
    #[error("non-finite float at byte {offset}")]
    NonFinite { offset: usize },
    #[error("duplicate key {key:?} at byte {offset}")]
    DuplicateKey { key: String, offset: usize },
    #[error("{message} at byte {offset}")]
    Invalid { offset: usize, message: String },
    #[error("{count} trailing bytes at byte {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: n - self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &'static str) -> Result<(), DecodeError> {
        let want = expected.as_bytes();
        let n = want.len().min(self.remaining());
        let found = &self.buf[self.pos..self.pos + n];
        if found != want {
            return Err(DecodeError::BadMagic {
                expected,
                found: found.to_vec(),
            });
        }
        self.pos += want.len();
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, DecodeError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    pub(crate) fn finite_f32(&mut self) -> Result<f32, DecodeError> {
        let offset = self.pos;
        let b = self.take(4)?;
        let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        if !v.is_finite() {
            return Err(DecodeError::NonFinite { offset });
        }
        Ok(v)
    }

    pub(crate) fn finite_f64(&mut self) -> Result<f64, DecodeError> {
        let offset = self.pos;
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        let v = f64::from_le_bytes(a);
        if !v.is_finite() {
            return Err(DecodeError::NonFinite { offset });
        }
        Ok(v)
    }

    /// Reads a u32 byte length followed by that many UTF-8 bytes.
    pub(crate) fn string(&mut self) -> Result<&'a str, DecodeError> {
        let len = self.u32()? as usize;
        let offset = self.pos;
        let bytes = self.take(len)?;
        std::str::from_utf8(bytes).map_err(|_| DecodeError::InvalidUtf8 { offset })
    }

    pub(crate) fn finish(&self) -> Result<(), DecodeError> {
        if self.remaining() != 0 {
            return Err(DecodeError::TrailingBytes {
                offset: self.pos,
                count: self.remaining(),
            });
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

/// Upper bound for `Vec::with_capacity` when a count comes from untrusted input.
pub(crate) fn bounded_capacity(claimed: u64, remaining_bytes: usize, min_record: usize) -> usize {
    let max = remaining_bytes / min_record.max(1);
    (claimed.min(max as u64)) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_reports_offset() {
        let mut r = ByteReader::new(&[1, 0, 0]);
        assert_eq!(r.u32(), Err(DecodeError::Truncated { offset: 0, needed: 1 }));
    }

    #[test]
    fn nan_rejected() {
        let bytes = f32::NAN.to_le_bytes();
        let mut r = ByteReader::new(&bytes);
        assert_eq!(r.finite_f32(), Err(DecodeError::NonFinite { offset: 0 }));
    }

    #[test]
    fn short_magic() {
        let mut r = ByteReader::new(b"EM");
        assert!(matches!(r.magic("EMBS"), Err(DecodeError::BadMagic { .. })));
    }
}
