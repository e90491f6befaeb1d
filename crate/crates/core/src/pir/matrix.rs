//! Record store laid out as an r x s matrix of w-bit words, one record per row.

use std::io::{Read, Write};

use super::bits::{padding_is_clear, pack_words, packed_len, unpack_words, words_for_bytes};
use super::field::{irreducible_poly, GaloisField};
use super::PirError;

pub const DB_MAGIC: &[u8; 6] = b"DRADB1";
pub const DB_VERSION: u16 = 1;
/// magic + version + word_bits + poly + record_size + num_records
pub const DB_HEADER_LEN: usize = 6 + 2 + 2 + 4 + 8 + 8;

/// Fixed-size header of a database file. Also sent verbatim as the DB_INFO
/// payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatabaseHeader {
    pub word_bits: u32,
    pub poly: u32,
    pub record_size: u64,
    pub num_records: u64,
}

impl DatabaseHeader {
    pub fn to_bytes(&self) -> [u8; DB_HEADER_LEN] {
        let mut out = [0u8; DB_HEADER_LEN];
        out[..6].copy_from_slice(DB_MAGIC);
        out[6..8].copy_from_slice(&DB_VERSION.to_be_bytes());
        out[8..10].copy_from_slice(&(self.word_bits as u16).to_be_bytes());
        out[10..14].copy_from_slice(&self.poly.to_be_bytes());
        out[14..22].copy_from_slice(&self.record_size.to_be_bytes());
        out[22..30].copy_from_slice(&self.num_records.to_be_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, PirError> {
        if bytes.len() < DB_HEADER_LEN {
            return Err(PirError::Format("truncated database header".into()));
        }
        if &bytes[..6] != DB_MAGIC {
            return Err(PirError::Format("bad database magic".into()));
        }
        let version = u16::from_be_bytes([bytes[6], bytes[7]]);
        if version != DB_VERSION {
            return Err(PirError::Format(format!("unsupported version {version}")));
        }
        let word_bits = u16::from_be_bytes([bytes[8], bytes[9]]) as u32;
        let poly = u32::from_be_bytes(bytes[10..14].try_into().unwrap());
        let record_size = u64::from_be_bytes(bytes[14..22].try_into().unwrap());
        let num_records = u64::from_be_bytes(bytes[22..30].try_into().unwrap());
        let expected = irreducible_poly(word_bits).ok_or(PirError::UnsupportedWordBits(word_bits))?;
        if poly != expected {
            return Err(PirError::Format(format!(
                "polynomial {poly:#x} does not match {expected:#x} for w={word_bits}"
            )));
        }
        if record_size == 0 {
            return Err(PirError::Format("record size is zero".into()));
        }
        if num_records == 0 {
            return Err(PirError::EmptyDatabase);
        }
        Ok(DatabaseHeader {
            word_bits,
            poly,
            record_size,
            num_records,
        })
    }

    /// Words per row, `s`.
    pub fn row_words(&self) -> Result<usize, PirError> {
        let rs = usize::try_from(self.record_size)
            .map_err(|_| PirError::Format("record size too large".into()))?;
        rs.checked_mul(8)
            .map(|bits| bits.div_ceil(self.word_bits as usize))
            .ok_or_else(|| PirError::Format("record size too large".into()))
    }
}

#[derive(Clone)]
enum WordStore {
    Narrow(Vec<u16>),
    Wide(Vec<u32>),
}

/// Immutable after construction; share it across server workers with `Arc`.
#[derive(Clone)]
pub struct DatabaseMatrix {
    field: &'static GaloisField,
    record_size: usize,
    num_records: usize,
    row_words: usize,
    words: WordStore,
}

impl DatabaseMatrix {
    /// Lays out `records` one per row, zero-padding each to `record_size`.
    pub fn layout<R: AsRef<[u8]>>(
        records: &[R],
        record_size: usize,
        word_bits: u32,
    ) -> Result<Self, PirError> {
        if let Some((index, r)) = records
            .iter()
            .enumerate()
            .find(|(_, r)| r.as_ref().len() > record_size)
        {
            return Err(PirError::RecordTooLarge {
                index,
                len: r.as_ref().len(),
                record_size,
            });
        }
        Self::from_fn(records.len(), record_size, word_bits, |i, buf| {
            let r = records[i].as_ref();
            buf[..r.len()].copy_from_slice(r);
        })
    }

    /// Builds a database by letting `fill` write each zeroed record buffer.
    pub fn from_fn(
        num_records: usize,
        record_size: usize,
        word_bits: u32,
        mut fill: impl FnMut(usize, &mut [u8]),
    ) -> Result<Self, PirError> {
        if num_records == 0 {
            return Err(PirError::EmptyDatabase);
        }
        if record_size == 0 {
            return Err(PirError::Format("record size is zero".into()));
        }
        let field = GaloisField::get(word_bits)?;
        let row_words = words_for_bytes(record_size, word_bits);
        let total = num_records
            .checked_mul(row_words)
            .ok_or_else(|| PirError::Format("database too large".into()))?;
        let mut buf = vec![0u8; record_size];
        let mut words = if word_bits <= 16 {
            WordStore::Narrow(Vec::with_capacity(total))
        } else {
            WordStore::Wide(Vec::with_capacity(total))
        };
        for i in 0..num_records {
            buf.fill(0);
            fill(i, &mut buf);
            let row = unpack_words(&buf, word_bits, row_words);
            match &mut words {
                WordStore::Narrow(v) => v.extend(row.iter().map(|&w| w as u16)),
                WordStore::Wide(v) => v.extend_from_slice(&row),
            }
        }
        Ok(DatabaseMatrix {
            field,
            record_size,
            num_records,
            row_words,
            words,
        })
    }

    pub fn field(&self) -> &'static GaloisField {
        self.field
    }

    pub fn word_bits(&self) -> u32 {
        self.field.bits()
    }

    /// Number of rows, `r`.
    pub fn rows(&self) -> usize {
        self.num_records
    }

    /// Words per row, `s`.
    pub fn row_words(&self) -> usize {
        self.row_words
    }

    pub fn num_records(&self) -> usize {
        self.num_records
    }

    pub fn record_size(&self) -> usize {
        self.record_size
    }

    /// Always 1: records are never split across rows.
    pub fn rows_per_record(&self) -> usize {
        1
    }

    /// Payload bytes, `n * record_size`.
    pub fn payload_bytes(&self) -> u64 {
        self.num_records as u64 * self.record_size as u64
    }

    pub fn header(&self) -> DatabaseHeader {
        DatabaseHeader {
            word_bits: self.word_bits(),
            poly: self.field.poly(),
            record_size: self.record_size as u64,
            num_records: self.num_records as u64,
        }
    }

    pub fn row(&self, index: usize) -> Vec<u32> {
        let range = index * self.row_words..(index + 1) * self.row_words;
        match &self.words {
            WordStore::Narrow(v) => v[range].iter().map(|&w| w as u32).collect(),
            WordStore::Wide(v) => v[range].to_vec(),
        }
    }

    /// Direct (non-private) lookup of a record.
    pub fn record(&self, index: usize) -> Vec<u8> {
        super::bits::words_to_bytes(&self.row(index), self.word_bits(), self.record_size)
    }

    /// `acc += scalar * rows[start..start + count]` row-block wise into an
    /// accumulator of `count * s` words. Rows past the end read as zero.
    pub(crate) fn accumulate_rows(&self, scalar: u32, start: usize, count: usize, acc: &mut [u32]) {
        let s = self.row_words;
        let end = (start + count).min(self.num_records);
        if start >= end {
            return;
        }
        let words = &mut acc[..(end - start) * s];
        let range = start * s..end * s;
        match &self.words {
            WordStore::Narrow(v) => self.field.mul_accumulate(scalar, &v[range], words),
            WordStore::Wide(v) => self.field.mul_accumulate(scalar, &v[range], words),
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&self.header().to_bytes())?;
        let mut buf = Vec::with_capacity(packed_len(self.row_words, self.word_bits()));
        for i in 0..self.num_records {
            buf.clear();
            pack_words(&self.row(i), self.word_bits(), &mut buf);
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, PirError> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| PirError::Format(e.to_string()))?;
        Self::parse(&bytes)
    }

    /// Parses a complete database file image.
    pub fn parse(bytes: &[u8]) -> Result<Self, PirError> {
        let header = DatabaseHeader::parse(bytes)?;
        let body = &bytes[DB_HEADER_LEN..];
        let row_words = header.row_words()?;
        let row_bytes = packed_len(row_words, header.word_bits);
        let num_records = usize::try_from(header.num_records)
            .map_err(|_| PirError::Format("too many records".into()))?;
        let expected = num_records
            .checked_mul(row_bytes)
            .ok_or_else(|| PirError::Format("database too large".into()))?;
        if body.len() != expected {
            return Err(PirError::Format(format!(
                "body is {} bytes, header implies {expected}",
                body.len()
            )));
        }
        let record_size = header.record_size as usize;
        let bits = header.word_bits;
        let mut bad_padding = false;
        let db = Self::from_fn(num_records, record_size, bits, |i, buf| {
            let packed = &body[i * row_bytes..(i + 1) * row_bytes];
            // bits beyond record_size * 8 must be zero
            if !padding_is_clear(packed, 8, record_size) {
                bad_padding = true;
            }
            buf.copy_from_slice(&packed[..record_size]);
        })?;
        if bad_padding {
            return Err(PirError::Format("non-zero padding bits in row".into()));
        }
        Ok(db)
    }
}

impl std::fmt::Debug for DatabaseMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DatabaseMatrix")
            .field("word_bits", &self.word_bits())
            .field("rows", &self.num_records)
            .field("row_words", &self.row_words)
            .field("record_size", &self.record_size)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_byte_record_at_w8() {
        let db = DatabaseMatrix::layout(&[[0xabu8]], 1, 8).unwrap();
        assert_eq!((db.rows(), db.row_words()), (1, 1));
        assert_eq!(db.record(0), vec![0xab]);
    }

    #[test]
    fn row_width_for_16k_records_at_w10() {
        // ceil(16384 * 8 / 10) = ceil(13107.2)
        let db = DatabaseMatrix::from_fn(2, 16 * 1024, 10, |_, _| {}).unwrap();
        assert_eq!(db.row_words(), 13108);
    }

    #[test]
    fn empty_and_oversized_inputs_fail() {
        let none: [&[u8]; 0] = [];
        assert!(matches!(
            DatabaseMatrix::layout(&none, 4, 8),
            Err(PirError::EmptyDatabase)
        ));
        assert!(matches!(
            DatabaseMatrix::layout(&[vec![1u8; 5]], 4, 8),
            Err(PirError::RecordTooLarge { index: 0, .. })
        ));
    }

    #[test]
    fn header_rejects_wrong_polynomial() {
        let db = DatabaseMatrix::layout(&[b"hi"], 2, 10).unwrap();
        let mut bytes = db.to_bytes();
        bytes[13] ^= 0x02;
        assert!(DatabaseMatrix::parse(&bytes).is_err());
    }

    #[test]
    fn file_rejects_dirty_padding_and_trailing_bytes() {
        // 3 bytes at w=10 -> 3 words -> 30 bits -> 4 packed bytes, last 2 bits pad
        let db = DatabaseMatrix::layout(&[b"abc"], 3, 10).unwrap();
        let mut bytes = db.to_bytes();
        assert_eq!(bytes.len(), DB_HEADER_LEN + 4);
        let last = bytes.len() - 1;
        bytes[last] |= 0x01;
        assert!(DatabaseMatrix::parse(&bytes).is_err());
        let mut long = db.to_bytes();
        long.push(0);
        assert!(DatabaseMatrix::parse(&long).is_err());
    }

    proptest! {
        #[test]
        fn records_survive_layout_and_file(
            records in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..24), 1..6),
            bits in prop::sample::select(vec![8u32, 10, 16, 20]),
        ) {
            let db = DatabaseMatrix::layout(&records, 24, bits).unwrap();
            let parsed = DatabaseMatrix::parse(&db.to_bytes()).unwrap();
            for (i, r) in records.iter().enumerate() {
                let mut padded = r.clone();
                padded.resize(24, 0);
                prop_assert_eq!(&db.record(i), &padded);
                prop_assert_eq!(&parsed.record(i), &padded);
            }
        }
    }
}
