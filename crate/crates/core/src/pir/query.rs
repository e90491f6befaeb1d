//! Shamir-shared unit-vector queries, server-side folding and client decoding.
//!
//! A query for row `beta` hands each server `i` the vector
//! `(f_0(x_i), ..., f_{r-1}(x_i))` where `f_j` is a random polynomial of
//! degree `t` with `f_j(0) = [j == beta]`. Each server returns the product of
//! that vector with the database; interpolating the replies at zero yields
//! row `beta`.
//!
//! With depth `d > 1` the row index is split into `d` mixed-radix digits and
//! each digit gets its own shared unit vector. Servers fold the row space one
//! level at a time. Each fold multiplies shares, so the reply polynomial has
//! degree `d * t` and decoding needs `d * t + 1` replies.

use rand::Rng;

use super::field::GaloisField;
use super::matrix::DatabaseMatrix;
use super::{PirError, PirParams};

/// Depth beyond which recursion is refused regardless of database size.
pub const MAX_DEPTH: usize = 8;
/// Small databases may always recurse this deep (levels degenerate to 1 or 2).
pub const SMALL_DB_DEPTH: usize = 3;

/// Per-level row dimensions and the row width the query addresses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryShape {
    pub level_dims: Vec<usize>,
    pub num_rows: usize,
    pub row_words: usize,
}

impl QueryShape {
    /// Flat (depth 1) shape: one level of `num_rows`.
    pub fn flat(num_rows: usize, row_words: usize) -> Self {
        QueryShape {
            level_dims: vec![num_rows],
            num_rows,
            row_words,
        }
    }

    /// Splits `num_rows` into `depth` levels of `ceil(n^(1/depth))` each.
    pub fn recursive(num_rows: usize, row_words: usize, depth: usize) -> Result<Self, PirError> {
        if num_rows == 0 {
            return Err(PirError::EmptyDatabase);
        }
        if depth == 0 || depth > max_depth(num_rows) {
            return Err(PirError::BadDepth {
                depth,
                num_rows,
                max: max_depth(num_rows),
            });
        }
        if depth == 1 {
            return Ok(Self::flat(num_rows, row_words));
        }
        let dim = integer_root_ceil(num_rows, depth);
        Ok(QueryShape {
            level_dims: vec![dim; depth],
            num_rows,
            row_words,
        })
    }

    pub fn depth(&self) -> usize {
        self.level_dims.len()
    }

    /// Field elements each server receives per query.
    pub fn query_len(&self) -> usize {
        self.level_dims.iter().sum()
    }

    /// Validates that `level_dims` can address `num_rows` rows without the
    /// intermediate fold outgrowing the database.
    pub fn check(&self) -> Result<(), PirError> {
        let dims = &self.level_dims;
        if dims.is_empty() || dims.contains(&0) {
            return Err(PirError::ShapeMismatch("empty level".into()));
        }
        if dims.len() == 1 {
            if dims[0] != self.num_rows {
                return Err(PirError::ShapeMismatch(format!(
                    "query length {} for {} rows",
                    dims[0], self.num_rows
                )));
            }
            return Ok(());
        }
        // uniform levels of ceil(n^(1/d)) never exceed n * 2^d rows in total
        let limit = self.num_rows.checked_shl(dims.len() as u32);
        match (checked_product(dims), limit) {
            (Some(t), Some(limit)) if t >= self.num_rows && t <= limit => Ok(()),
            _ => Err(PirError::ShapeMismatch(format!(
                "levels {:?} do not cover {} rows",
                dims, self.num_rows
            ))),
        }
    }

    /// Mixed-radix digits of `beta`, most significant first.
    pub fn digits(&self, beta: usize) -> Vec<usize> {
        let mut rest = beta;
        let mut digits = vec![0; self.level_dims.len()];
        for (d, &dim) in digits.iter_mut().zip(&self.level_dims).rev() {
            *d = rest % dim;
            rest /= dim;
        }
        digits
    }
}

/// Largest accepted depth for `num_rows`: `ceil(log2 n)`, but never below
/// [`SMALL_DB_DEPTH`] and never above [`MAX_DEPTH`].
pub fn max_depth(num_rows: usize) -> usize {
    let log = if num_rows <= 1 {
        0
    } else {
        (usize::BITS - (num_rows - 1).leading_zeros()) as usize
    };
    log.clamp(SMALL_DB_DEPTH, MAX_DEPTH)
}

fn checked_product(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

/// Smallest `k` with `k^d >= n`.
fn integer_root_ceil(n: usize, d: usize) -> usize {
    let mut k = (n as f64).powf(1.0 / d as f64).floor().max(1.0) as usize;
    while checked_product(&vec![k; d]).is_some_and(|p| p < n) {
        k += 1;
    }
    while k > 1 && checked_product(&vec![k - 1; d]).is_some_and(|p| p >= n) {
        k -= 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryShare {
    pub server_index: usize,
    /// Concatenated per-level share vectors.
    pub vector: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerResponse {
    pub server_index: usize,
    pub vector: Vec<u32>,
}

/// Shares the unit vector `e_target` of length `len` with polynomials of
/// degree `degree`, evaluated at `points`. Random coefficients come from
/// `coeff`, called in a fixed order: for each position, for each degree.
///
/// Returns one vector per point.
pub fn share_unit_vector(
    field: &GaloisField,
    len: usize,
    target: usize,
    degree: usize,
    points: &[u32],
    mut coeff: impl FnMut() -> u32,
) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::with_capacity(len); points.len()];
    let mut poly = vec![0u32; degree + 1];
    for j in 0..len {
        poly[0] = u32::from(j == target);
        for c in poly.iter_mut().skip(1) {
            *c = coeff() & (field.order() - 1);
        }
        for (vec, &x) in out.iter_mut().zip(points) {
            vec.push(field.eval_poly(&poly, x));
        }
    }
    out
}

/// Flat query for row `beta` of a database with `num_rows` rows.
pub fn encode_query<R: Rng + ?Sized>(
    beta: usize,
    num_rows: usize,
    params: &PirParams,
    rng: &mut R,
) -> Result<Vec<QueryShare>, PirError> {
    encode_query_recursive(beta, &QueryShape::flat(num_rows, 0), params, rng)
}

/// Query for row `beta` over the levels of `shape`.
pub fn encode_query_recursive<R: Rng + ?Sized>(
    beta: usize,
    shape: &QueryShape,
    params: &PirParams,
    rng: &mut R,
) -> Result<Vec<QueryShare>, PirError> {
    encode_query_with_coefficients(beta, shape, params, || rng.random::<u32>())
}

/// As [`encode_query_recursive`] with an explicit coefficient source, so the
/// randomness can be audited or enumerated.
pub fn encode_query_with_coefficients(
    beta: usize,
    shape: &QueryShape,
    params: &PirParams,
    mut coeff: impl FnMut() -> u32,
) -> Result<Vec<QueryShare>, PirError> {
    shape.check()?;
    if beta >= shape.num_rows {
        return Err(PirError::IndexOutOfRange {
            index: beta,
            rows: shape.num_rows,
        });
    }
    params.check_depth(shape.depth())?;
    let field = GaloisField::get(params.word_bits())?;
    let mut shares: Vec<QueryShare> = (0..params.servers())
        .map(|i| QueryShare {
            server_index: i,
            vector: Vec::with_capacity(shape.query_len()),
        })
        .collect();
    for (&dim, digit) in shape.level_dims.iter().zip(shape.digits(beta)) {
        let level = share_unit_vector(
            field,
            dim,
            digit,
            params.privacy(),
            params.eval_points(),
            &mut coeff,
        );
        for (share, part) in shares.iter_mut().zip(level) {
            share.vector.extend(part);
        }
    }
    Ok(shares)
}

/// `share^T * db` for a flat query.
pub fn server_compute(share: &QueryShare, db: &DatabaseMatrix) -> Result<ServerResponse, PirError> {
    server_compute_levels(share, &QueryShape::flat(db.rows(), db.row_words()), db)
}

/// Folds the database level by level with the concatenated share vector.
pub fn server_compute_levels(
    share: &QueryShare,
    shape: &QueryShape,
    db: &DatabaseMatrix,
) -> Result<ServerResponse, PirError> {
    if shape.num_rows != db.rows() {
        return Err(PirError::ShapeMismatch(format!(
            "shape addresses {} rows, database has {}",
            shape.num_rows,
            db.rows()
        )));
    }
    shape.check()?;
    if share.vector.len() != shape.query_len() {
        return Err(PirError::ShapeMismatch(format!(
            "share length {} expected {}",
            share.vector.len(),
            shape.query_len()
        )));
    }
    let field = db.field();
    if let Some(&bad) = share.vector.iter().find(|&&v| !field.contains(v)) {
        return Err(PirError::ShapeMismatch(format!(
            "element {bad} outside GF(2^{})",
            field.bits()
        )));
    }
    let s = db.row_words();
    let dims = &shape.level_dims;
    let (first, rest) = share.vector.split_at(dims[0]);

    // level 1 reads straight from the database
    let mut block: usize = dims[1..].iter().product();
    let mut acc = vec![0u32; block * s];
    for (j, &q) in first.iter().enumerate() {
        db.accumulate_rows(q, j * block, block, &mut acc);
    }

    let mut offset = 0;
    for &dim in &dims[1..] {
        let level = &rest[offset..offset + dim];
        offset += dim;
        block /= dim;
        let mut next = vec![0u32; block * s];
        for (j, &q) in level.iter().enumerate() {
            let src = &acc[j * block * s..(j + 1) * block * s];
            field.mul_accumulate(q, src, &mut next);
        }
        acc = next;
    }
    Ok(ServerResponse {
        server_index: share.server_index,
        vector: acc,
    })
}

/// Interpolates replies at zero to recover the selected row's words.
///
/// Uses the first `depth * t + 1` replies; any further replies must lie on
/// the same polynomial or [`PirError::InconsistentResponses`] is returned.
pub fn decode_words(
    responses: &[ServerResponse],
    params: &PirParams,
    depth: usize,
) -> Result<Vec<u32>, PirError> {
    let needed = params.required_responses(depth);
    if responses.len() < needed {
        return Err(PirError::InsufficientResponses {
            needed,
            got: responses.len(),
        });
    }
    let field = GaloisField::get(params.word_bits())?;
    let mut points = Vec::with_capacity(responses.len());
    for r in responses {
        let x = params
            .eval_points()
            .get(r.server_index)
            .copied()
            .ok_or(PirError::UnknownServer(r.server_index))?;
        if points.contains(&x) {
            return Err(PirError::DuplicateResponse(r.server_index));
        }
        points.push(x);
    }
    let width = responses[0].vector.len();
    if responses.iter().any(|r| r.vector.len() != width) {
        return Err(PirError::ShapeMismatch("responses differ in length".into()));
    }
    let (basis_pts, extra_pts) = points.split_at(needed);
    let (basis, extra) = responses.split_at(needed);
    let combine = |coeffs: &[u32]| {
        let mut out = vec![0u32; width];
        for (&c, r) in coeffs.iter().zip(basis) {
            field.mul_accumulate(c, &r.vector, &mut out);
        }
        out
    };
    for (&x, r) in extra_pts.iter().zip(extra) {
        let predicted = combine(&field.lagrange_coefficients(basis_pts, x));
        if predicted != r.vector {
            return Err(PirError::InconsistentResponses {
                server: r.server_index,
            });
        }
    }
    Ok(combine(&field.lagrange_coefficients(basis_pts, 0)))
}

/// Decodes a flat query into record bytes of length `record_size`.
pub fn decode(
    responses: &[ServerResponse],
    params: &PirParams,
    record_size: usize,
) -> Result<Vec<u8>, PirError> {
    decode_recursive(responses, params, 1, record_size)
}

pub fn decode_recursive(
    responses: &[ServerResponse],
    params: &PirParams,
    depth: usize,
    record_size: usize,
) -> Result<Vec<u8>, PirError> {
    let words = decode_words(responses, params, depth)?;
    Ok(super::bits::words_to_bytes(&words, params.word_bits(), record_size))
}
