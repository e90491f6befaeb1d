//! QUERY, RESPONSE and ERROR payload codecs.
//!
//! QUERY: query_id u32, num_ads u16, depth u8, one u32 per level, then
//! `num_ads` share vectors of `sum(levels)` words, each bit-packed on its own.
//! RESPONSE: query_id u32, num_ads u16, words u32, then `num_ads` packed
//! vectors of `words` words.

use dualring_core::pir::bits::{pack_words, packed_len, padding_is_clear, unpack_words};
use dualring_core::pir::cost::{query_header_bytes, RESPONSE_HEADER_BYTES};
use dualring_core::pir::query::MAX_DEPTH;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed payload: {0}")]
pub struct PayloadError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, PayloadError> {
    Err(PayloadError(msg.into()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PayloadError> {
        if self.bytes.len() - self.pos < n {
            return err(format!("truncated at byte {}", self.pos));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, PayloadError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, PayloadError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, PayloadError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn vectors(&mut self, count: usize, words: usize, bits: u32) -> Result<Vec<Vec<u32>>, PayloadError> {
        let each = packed_len(words, bits);
        let expected = each
            .checked_mul(count)
            .ok_or_else(|| PayloadError("declared size overflows".into()))?;
        let rest = self.bytes.len() - self.pos;
        if rest != expected {
            return err(format!("body is {rest} bytes, declared lengths need {expected}"));
        }
        (0..count)
            .map(|_| {
                let chunk = self.take(each)?;
                if !padding_is_clear(chunk, bits, words) {
                    return err("nonzero padding bits");
                }
                Ok(unpack_words(chunk, bits, words))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPayload {
    pub query_id: u32,
    pub level_dims: Vec<u32>,
    /// One concatenated share vector per requested ad.
    pub shares: Vec<Vec<u32>>,
}

impl QueryPayload {
    pub fn query_len(&self) -> usize {
        self.level_dims.iter().map(|&d| d as usize).sum()
    }

    pub fn encoded_len(&self, bits: u32) -> usize {
        query_header_bytes(self.level_dims.len()) + self.shares.len() * packed_len(self.query_len(), bits)
    }

    pub fn encode(&self, bits: u32) -> Vec<u8> {
        assert!(self.shares.len() <= u16::MAX as usize, "too many ads in one query");
        assert!(self.level_dims.len() <= u8::MAX as usize, "too many levels");
        let len = self.query_len();
        let mut out = Vec::with_capacity(self.encoded_len(bits));
        out.extend_from_slice(&self.query_id.to_be_bytes());
        out.extend_from_slice(&(self.shares.len() as u16).to_be_bytes());
        out.push(self.level_dims.len() as u8);
        for d in &self.level_dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        for share in &self.shares {
            assert_eq!(share.len(), len, "share length must match the levels");
            pack_words(share, bits, &mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8], bits: u32) -> Result<Self, PayloadError> {
        let mut c = Cursor { bytes, pos: 0 };
        let query_id = c.u32()?;
        let num_ads = c.u16()? as usize;
        let depth = c.u8()? as usize;
        if depth == 0 || depth > MAX_DEPTH {
            return err(format!("depth {depth}"));
        }
        let level_dims = (0..depth).map(|_| c.u32()).collect::<Result<Vec<_>, _>>()?;
        let len = level_dims
            .iter()
            .try_fold(0usize, |acc, &d| acc.checked_add(d as usize))
            .ok_or_else(|| PayloadError("level lengths overflow".into()))?;
        let shares = c.vectors(num_ads, len, bits)?;
        Ok(QueryPayload {
            query_id,
            level_dims,
            shares,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponsePayload {
    pub query_id: u32,
    pub words: u32,
    pub vectors: Vec<Vec<u32>>,
}

impl ResponsePayload {
    pub fn encoded_len(&self, bits: u32) -> usize {
        RESPONSE_HEADER_BYTES + self.vectors.len() * packed_len(self.words as usize, bits)
    }

    pub fn encode(&self, bits: u32) -> Vec<u8> {
        assert!(self.vectors.len() <= u16::MAX as usize, "too many ads in one response");
        let mut out = Vec::with_capacity(self.encoded_len(bits));
        out.extend_from_slice(&self.query_id.to_be_bytes());
        out.extend_from_slice(&(self.vectors.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.words.to_be_bytes());
        for v in &self.vectors {
            assert_eq!(v.len(), self.words as usize, "vector length must match words");
            pack_words(v, bits, &mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8], bits: u32) -> Result<Self, PayloadError> {
        let mut c = Cursor { bytes, pos: 0 };
        let query_id = c.u32()?;
        let num_ads = c.u16()? as usize;
        let words = c.u32()?;
        let vectors = c.vectors(num_ads, words as usize, bits)?;
        Ok(ResponsePayload {
            query_id,
            words,
            vectors,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    Malformed = 0x01,
    ShapeMismatch = 0x02,
    UnknownType = 0x03,
    Internal = 0x04,
}

impl ErrorCode {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(ErrorCode::Malformed),
            0x02 => Some(ErrorCode::ShapeMismatch),
            0x03 => Some(ErrorCode::UnknownType),
            0x04 => Some(ErrorCode::Internal),
            _ => None,
        }
    }
}

/// ERROR payload: a code byte followed by a UTF-8 reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorPayload {
    pub code: u8,
    pub message: String,
}

impl ErrorPayload {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ErrorPayload {
            code: code as u8,
            message: message.into(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.code];
        out.extend_from_slice(self.message.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        let (&code, rest) = bytes.split_first().ok_or_else(|| PayloadError("empty error".into()))?;
        Ok(ErrorPayload {
            code,
            message: String::from_utf8_lossy(rest).into_owned(),
        })
    }
}
