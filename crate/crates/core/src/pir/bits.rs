//! Big-endian bit packing of w-bit words.
//!
//! Words are laid out MSB first; the final byte is padded with zero bits.

/// Bytes needed to hold `count` words of `bits` bits.
pub fn packed_len(count: usize, bits: u32) -> usize {
    (count * bits as usize).div_ceil(8)
}

/// Words needed to hold `bytes` bytes.
pub fn words_for_bytes(bytes: usize, bits: u32) -> usize {
    (bytes * 8).div_ceil(bits as usize)
}

pub fn pack_words(words: &[u32], bits: u32, out: &mut Vec<u8>) {
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mask = (1u64 << bits) - 1;
    for &w in words {
        acc = (acc << bits) | (w as u64 & mask);
        filled += bits;
        while filled >= 8 {
            filled -= 8;
            out.push((acc >> filled) as u8);
        }
        acc &= (1u64 << filled) - 1;
    }
    if filled > 0 {
        out.push((acc << (8 - filled)) as u8);
    }
}

/// Reads `count` words from `bytes`; missing trailing bits read as zero.
pub fn unpack_words(bytes: &[u8], bits: u32, count: usize) -> Vec<u32> {
    let mut words = Vec::with_capacity(count);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mut iter = bytes.iter();
    let mask = (1u64 << bits) - 1;
    for _ in 0..count {
        while filled < bits {
            acc = (acc << 8) | *iter.next().unwrap_or(&0) as u64;
            filled += 8;
        }
        filled -= bits;
        words.push(((acc >> filled) & mask) as u32);
        acc &= (1u64 << filled) - 1;
    }
    words
}

/// Converts words back to exactly `len` bytes, dropping padding bits.
pub fn words_to_bytes(words: &[u32], bits: u32, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(packed_len(words.len(), bits));
    pack_words(words, bits, &mut out);
    out.resize(len, 0);
    out
}

/// True when every bit after the first `count * bits` bits of `bytes` is zero.
pub fn padding_is_clear(bytes: &[u8], bits: u32, count: usize) -> bool {
    let used = count * bits as usize;
    let full = used / 8;
    let rem = used % 8;
    if rem != 0 && bytes.get(full).is_some_and(|b| b & (0xff >> rem) != 0) {
        return false;
    }
    let start = if rem == 0 { full } else { full + 1 };
    bytes.get(start..).is_none_or(|rest| rest.iter().all(|&b| b == 0))
}
