//! Analytic bandwidth of one batched request to every server.
//!
//! The payload layouts live in the network crate; the header sizes are fixed
//! here so the prediction and the codec cannot drift apart.

use super::bits::packed_len;
use super::query::QueryShape;
use super::PirParams;

/// QUERY payload header: query_id u32, num_ads u16, depth u8, then one u32
/// per level. Use [`query_header_bytes`] for the full size.
pub const QUERY_HEADER_BYTES: usize = 4 + 2 + 1;
/// RESPONSE payload header: query_id u32, num_ads u16, words-per-vector u32.
pub const RESPONSE_HEADER_BYTES: usize = 4 + 2 + 4;

pub fn query_header_bytes(depth: usize) -> usize {
    QUERY_HEADER_BYTES + 4 * depth
}

/// Payload bytes split into packed field elements and payload headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostEstimate {
    pub up_share_bytes: u64,
    pub up_framing_bytes: u64,
    pub down_share_bytes: u64,
    pub down_framing_bytes: u64,
}

impl CostEstimate {
    pub fn up_bytes(&self) -> u64 {
        self.up_share_bytes + self.up_framing_bytes
    }

    pub fn down_bytes(&self) -> u64 {
        self.down_share_bytes + self.down_framing_bytes
    }
}

/// `up = l * q * ceil(sum(r_i) * w / 8)`, `down = l * q * ceil(s * w / 8)`,
/// each plus `l` payload headers.
pub fn cost_model(shape: &QueryShape, params: &PirParams, num_ads: usize) -> CostEstimate {
    let l = params.servers() as u64;
    let q = num_ads as u64;
    let w = params.word_bits();
    CostEstimate {
        up_share_bytes: l * q * packed_len(shape.query_len(), w) as u64,
        up_framing_bytes: l * query_header_bytes(shape.depth()) as u64,
        down_share_bytes: l * q * packed_len(shape.row_words, w) as u64,
        down_framing_bytes: l * RESPONSE_HEADER_BYTES as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_four_server_example() {
        let params = PirParams::new(4, 2, 10, 1).unwrap();
        let shape = QueryShape::flat(1000, 13108);
        let c = cost_model(&shape, &params, 1);
        assert_eq!(c.up_share_bytes, 5000);
        assert_eq!(c.down_share_bytes, 65540);
        assert_eq!(c.up_framing_bytes, 4 * 11);
        assert_eq!(c.down_framing_bytes, 4 * 10);
    }

    #[test]
    fn zero_ads_is_framing_only() {
        let params = PirParams::new(3, 1, 10, 1).unwrap();
        let c = cost_model(&QueryShape::flat(50, 7), &params, 0);
        assert_eq!(c.up_bytes(), c.up_framing_bytes);
        assert_eq!(c.down_bytes(), c.down_framing_bytes);
    }

    #[test]
    fn upload_is_linear_in_rows_at_depth_one() {
        let params = PirParams::new(4, 1, 8, 1).unwrap();
        let a = cost_model(&QueryShape::flat(500, 10), &params, 1);
        let b = cost_model(&QueryShape::flat(1000, 10), &params, 1);
        assert_eq!(b.up_share_bytes, 2 * a.up_share_bytes);
    }

    #[test]
    fn recursion_uploads_sum_of_levels() {
        let params = PirParams::new(5, 1, 8, 2).unwrap();
        let shape = QueryShape::recursive(9, 4, 2).unwrap();
        assert_eq!(cost_model(&shape, &params, 2).up_share_bytes, 5 * 2 * 6);
    }
}
