//! Binary extension fields GF(2^w) backed by log/antilog tables.
//!
//! Elements are plain `u32` values below `2^w`. Addition is XOR; the
//! multiplicative group is cyclic of order `2^w - 1` and is generated by `x`
//! for every polynomial listed in [`irreducible_poly`], which lets
//! multiplication go through a single table lookup.

use std::sync::OnceLock;

use super::PirError;

/// Word sizes for which a field can be built.
pub const SUPPORTED_WORD_BITS: [u32; 4] = [8, 10, 16, 20];

/// Fixed primitive polynomial for each supported word size, including the
/// `x^w` term. These values are written into database headers.
pub const fn irreducible_poly(bits: u32) -> Option<u32> {
    match bits {
        // x^8 + x^4 + x^3 + x^2 + 1
        8 => Some(0x11d),
        // x^10 + x^3 + 1
        10 => Some(0x409),
        // x^16 + x^12 + x^3 + x + 1
        16 => Some(0x1100b),
        // x^20 + x^3 + 1
        20 => Some(0x10_0009),
        _ => None,
    }
}

pub struct GaloisField {
    bits: u32,
    poly: u32,
    order: u32,
    /// exp[i] = x^i, stored twice over so `exp[log a + log b]` needs no reduction.
    exp: Vec<u32>,
    log: Vec<u32>,
}

static FIELDS: [OnceLock<GaloisField>; 4] = [
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
];

impl GaloisField {
    /// Shared field for `bits`; tables are built once per process.
    pub fn get(bits: u32) -> Result<&'static GaloisField, PirError> {
        let slot = SUPPORTED_WORD_BITS
            .iter()
            .position(|&b| b == bits)
            .ok_or(PirError::UnsupportedWordBits(bits))?;
        let poly = irreducible_poly(bits).ok_or(PirError::UnsupportedWordBits(bits))?;
        Ok(FIELDS[slot].get_or_init(|| Self::build(bits, poly)))
    }

    fn build(bits: u32, poly: u32) -> GaloisField {
        let order = 1u32 << bits;
        let group = (order - 1) as usize;
        let mut exp = vec![0u32; 2 * group];
        let mut log = vec![0u32; order as usize];
        let mut seen = vec![false; order as usize];
        let mut x = 1u32;
        for (i, slot) in exp.iter_mut().take(group).enumerate() {
            assert!(!seen[x as usize], "polynomial {poly:#x} is not primitive");
            seen[x as usize] = true;
            *slot = x;
            log[x as usize] = i as u32;
            x <<= 1;
            if x & order != 0 {
                x ^= poly;
            }
        }
        assert_eq!(x, 1, "polynomial {poly:#x} is not primitive");
        exp.copy_within(0..group, group);
        GaloisField {
            bits,
            poly,
            order,
            exp,
            log,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    /// Number of elements, `2^w`.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn contains(&self, a: u32) -> bool {
        a < self.order
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
        }
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(&self, a: u32) -> u32 {
        assert!(a != 0, "zero has no inverse");
        let group = self.order - 1;
        self.exp[((group - self.log[a as usize]) % group) as usize]
    }

    pub fn div(&self, a: u32, b: u32) -> u32 {
        self.mul(a, self.inv(b))
    }

    /// `acc[k] ^= scalar * row[k]` for every k.
    #[inline]
    pub fn mul_accumulate<T: Copy + Into<u32>>(&self, scalar: u32, row: &[T], acc: &mut [u32]) {
        if scalar == 0 {
            return;
        }
        if scalar == 1 {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a ^= v.into();
            }
            return;
        }
        let ls = self.log[scalar as usize] as usize;
        let exp = &self.exp[ls..];
        let log = &self.log[..];
        for (a, &v) in acc.iter_mut().zip(row) {
            let v: u32 = v.into();
            if v != 0 {
                *a ^= exp[log[v as usize] as usize];
            }
        }
    }

    /// Evaluates the polynomial with the given coefficients (constant term
    /// first) at `x`.
    pub fn eval_poly(&self, coeffs: &[u32], x: u32) -> u32 {
        coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| self.add(self.mul(acc, x), c))
    }

    /// Lagrange basis coefficients that map values at `points` to the value at
    /// `target`. Points must be pairwise distinct.
    pub fn lagrange_coefficients(&self, points: &[u32], target: u32) -> Vec<u32> {
        points
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let mut num = 1;
                let mut den = 1;
                for (j, &xj) in points.iter().enumerate() {
                    if i != j {
                        num = self.mul(num, self.add(target, xj));
                        den = self.mul(den, self.add(xi, xj));
                    }
                }
                self.div(num, den)
            })
            .collect()
    }
}

impl std::fmt::Debug for GaloisField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaloisField")
            .field("bits", &self.bits)
            .field("poly", &format_args!("{:#x}", self.poly))
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Carry-less multiply then reduce, independent of the tables.
    fn slow_mul(a: u32, b: u32, bits: u32, poly: u32) -> u32 {
        let mut prod: u64 = 0;
        for i in 0..bits {
            if b >> i & 1 == 1 {
                prod ^= (a as u64) << i;
            }
        }
        for i in (bits..2 * bits).rev() {
            if prod >> i & 1 == 1 {
                prod ^= (poly as u64) << (i - bits);
            }
        }
        prod as u32
    }

    #[test]
    fn all_polynomials_are_primitive() {
        for bits in SUPPORTED_WORD_BITS {
            let f = GaloisField::get(bits).unwrap();
            assert_eq!(f.order(), 1 << bits);
        }
    }

    #[test]
    fn unsupported_width_is_rejected() {
        assert!(matches!(
            GaloisField::get(12),
            Err(PirError::UnsupportedWordBits(12))
        ));
    }

    #[test]
    fn gf256_laws_exhaustive() {
        let f = GaloisField::get(8).unwrap();
        for a in 0..256u32 {
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a)), 1);
            }
            for b in 0..256u32 {
                let ab = f.mul(a, b);
                assert_eq!(ab, f.mul(b, a));
                assert_eq!(ab, slow_mul(a, b, 8, 0x11d));
            }
        }
        // associativity and distributivity over a strided cube
        for a in (0..256u32).step_by(7) {
            for b in (0..256u32).step_by(5) {
                for c in (0..256u32).step_by(3) {
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
                }
            }
        }
    }

    #[test]
    fn wide_fields_match_slow_multiply() {
        for bits in [10, 16, 20] {
            let f = GaloisField::get(bits).unwrap();
            let poly = f.poly();
            let mut x = 0x1234_5u32;
            for _ in 0..2000 {
                x = x.wrapping_mul(1_103_515_245).wrapping_add(12345);
                let a = x % f.order();
                let b = (x >> 7) % f.order();
                assert_eq!(f.mul(a, b), slow_mul(a, b, bits, poly));
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a)), 1);
                }
            }
        }
    }

    #[test]
    fn lagrange_recovers_constant_term() {
        let f = GaloisField::get(10).unwrap();
        let coeffs = [77, 3, 900];
        let points = [1, 2, 3];
        let values: Vec<u32> = points.iter().map(|&x| f.eval_poly(&coeffs, x)).collect();
        let lambda = f.lagrange_coefficients(&points, 0);
        let at_zero = lambda
            .iter()
            .zip(&values)
            .fold(0, |acc, (&l, &v)| acc ^ f.mul(l, v));
        assert_eq!(at_zero, 77);
    }
}
