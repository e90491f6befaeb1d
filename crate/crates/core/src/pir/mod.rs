//! t-private multi-server information-theoretic PIR over GF(2^w).

pub mod bits;
pub mod cost;
pub mod field;
pub mod matrix;
pub mod query;

pub use cost::{cost_model, CostEstimate, QUERY_HEADER_BYTES, RESPONSE_HEADER_BYTES};
pub use field::{irreducible_poly, GaloisField, SUPPORTED_WORD_BITS};
pub use matrix::{DatabaseHeader, DatabaseMatrix, DB_HEADER_LEN};
pub use query::{
    decode, decode_recursive, decode_words, encode_query, encode_query_recursive,
    encode_query_with_coefficients, server_compute, server_compute_levels, QueryShape,
    QueryShare, ServerResponse,
};

#[derive(Debug, thiserror::Error)]
pub enum PirError {
    #[error("database has no records")]
    EmptyDatabase,
    #[error("record {index} is {len} bytes, larger than record size {record_size}")]
    RecordTooLarge {
        index: usize,
        len: usize,
        record_size: usize,
    },
    #[error("word size {0} is not supported")]
    UnsupportedWordBits(u32),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("depth {depth} not allowed for {num_rows} rows (max {max})")]
    BadDepth {
        depth: usize,
        num_rows: usize,
        max: usize,
    },
    #[error("depth-{depth} queries need {needed} servers, have {servers}")]
    InsufficientServers {
        depth: usize,
        needed: usize,
        servers: usize,
    },
    #[error("need {needed} responses, got {got}")]
    InsufficientResponses { needed: usize, got: usize },
    #[error("response from server {server} is inconsistent with the others")]
    InconsistentResponses { server: usize },
    #[error("two responses from server {0}")]
    DuplicateResponse(usize),
    #[error("no evaluation point for server {0}")]
    UnknownServer(usize),
    #[error("malformed database: {0}")]
    Format(String),
}

/// Deployment parameters shared by the client and every server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PirParams {
    servers: usize,
    privacy: usize,
    word_bits: u32,
    depth: usize,
    eval_points: Vec<u32>,
}

impl PirParams {
    /// `servers` = l, `privacy` = t, evaluation points `x_i = i + 1`.
    pub fn new(servers: usize, privacy: usize, word_bits: u32, depth: usize) -> Result<Self, PirError> {
        let field = GaloisField::get(word_bits)?;
        if privacy == 0 || privacy >= servers {
            return Err(PirError::InvalidParams(format!(
                "need 1 <= t <= l - 1, got t={privacy} l={servers}"
            )));
        }
        if servers as u64 >= field.order() as u64 {
            return Err(PirError::InvalidParams(format!(
                "{servers} servers exceed GF(2^{word_bits})"
            )));
        }
        if depth == 0 {
            return Err(PirError::InvalidParams("depth must be at least 1".into()));
        }
        Ok(PirParams {
            servers,
            privacy,
            word_bits,
            depth,
            eval_points: (1..=servers as u32).collect(),
        })
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn privacy(&self) -> usize {
        self.privacy
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn eval_points(&self) -> &[u32] {
        &self.eval_points
    }

    /// Replies needed to decode a depth-`depth` query: `depth * t + 1`.
    pub fn required_responses(&self, depth: usize) -> usize {
        depth * self.privacy + 1
    }

    pub(crate) fn check_depth(&self, depth: usize) -> Result<(), PirError> {
        let needed = self.required_responses(depth);
        if needed > self.servers {
            return Err(PirError::InsufficientServers {
                depth,
                needed,
                servers: self.servers,
            });
        }
        Ok(())
    }
}
