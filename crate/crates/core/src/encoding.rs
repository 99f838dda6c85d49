//! Field-tagged byte encoding.
//!
//! Every hashed, signed, persisted or transmitted record is a sequence of
//! fields, each written as a 4-byte big-endian length followed by the bytes.
//! Records that carry a domain-separation label write it as the first field.
//! Readers validate every length against the bytes actually remaining, so no
//! attacker-controlled length ever drives an allocation.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("input truncated: needed {needed} bytes, {remaining} remaining")]
    Truncated { needed: usize, remaining: usize },
    #[error("{0} trailing bytes after record")]
    TrailingBytes(usize),
    #[error("field has length {got}, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("unexpected record label {found:?}, expected {expected:?}")]
    BadLabel { expected: String, found: String },
    #[error("element count {count} cannot fit in the remaining {remaining} bytes")]
    CountTooLarge { count: usize, remaining: usize },
    #[error("invalid {0} encoding")]
    InvalidElement(&'static str),
    #[error("{0}")]
    Invalid(String),
}

/// Builds a field-tagged record.
#[derive(Debug, Default, Clone)]
pub struct FieldWriter {
    buf: Vec<u8>,
}

impl FieldWriter {
    /// Starts a record whose first field is `label`.
    pub fn new(label: &str) -> Self {
        let mut w = FieldWriter { buf: Vec::new() };
        w.bytes(label.as_bytes());
        w
    }

    /// Starts a record without a label.
    pub fn unlabeled() -> Self {
        FieldWriter::default()
    }

    pub fn bytes(&mut self, field: &[u8]) -> &mut Self {
        let len = u32::try_from(field.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(field);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.bytes(&[v])
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Reads a field-tagged record produced by [`FieldWriter`].
#[derive(Debug, Clone)]
pub struct FieldReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> FieldReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        FieldReader { data, pos: 0 }
    }

    /// Opens a labelled record, failing if the label differs.
    pub fn with_label(data: &'a [u8], label: &str) -> Result<Self, DecodeError> {
        let mut r = FieldReader::new(data);
        let found = r.bytes()?;
        if found != label.as_bytes() {
            return Err(DecodeError::BadLabel {
                expected: label.to_string(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(r)
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let header = self.take(4)?;
        let len = u32::from_be_bytes(header.try_into().unwrap()) as usize;
        self.take(len)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let field = self.bytes()?;
        field.try_into().map_err(|_| DecodeError::BadLength {
            expected: N,
            got: field.len(),
        })
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub fn i64(&mut self) -> Result<i64, DecodeError> {
        Ok(i64::from_be_bytes(self.array()?))
    }

    pub fn string(&mut self) -> Result<String, DecodeError> {
        let raw = self.bytes()?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| DecodeError::Invalid("non-UTF-8 string field".into()))
    }

    /// Reads an element count and checks that `count` items of at least
    /// `min_item_len` encoded bytes each fit in what is left.
    pub fn count(&mut self, min_item_len: usize) -> Result<usize, DecodeError> {
        let count = self.u32()? as usize;
        let remaining = self.remaining();
        if count.saturating_mul(min_item_len.max(1)) > remaining {
            return Err(DecodeError::CountTooLarge { count, remaining });
        }
        Ok(count)
    }

    /// Fails unless every byte has been consumed.
    pub fn finish(self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Truncated {
                needed: n,
                remaining: self.remaining(),
            });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}
