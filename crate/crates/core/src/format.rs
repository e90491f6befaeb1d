//! Shared helpers for the line-oriented text formats.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

/// Formats a weight with the fixed 9 fractional digits the files use.
pub fn fmt_weight(w: f64) -> String {
    format!("{w:.9}")
}

pub fn parse_f64(line: usize, field: &str) -> Result<f64, ParseError> {
    let v: f64 = field
        .parse()
        .map_err(|_| ParseError::new(line, format!("not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(ParseError::new(line, format!("not finite: {field:?}")));
    }
    Ok(v)
}

/// Iterates `(line_number, line)` pairs, 1-based, rejecting CR characters so
/// files stay LF-only.
pub fn lines(text: &str) -> impl Iterator<Item = Result<(usize, &str), ParseError>> {
    text.split('\n').enumerate().filter_map(|(i, l)| {
        if l.is_empty() {
            None
        } else if l.contains('\r') {
            Some(Err(ParseError::new(i + 1, "CR line endings are not accepted")))
        } else {
            Some(Ok((i + 1, l)))
        }
    })
}

/// Checks the first non-empty line is exactly `header`.
pub fn expect_header(text: &str, header: &str) -> Result<(), ParseError> {
    match text.split('\n').next() {
        Some(first) if first == header => Ok(()),
        _ => Err(ParseError::new(1, format!("expected header {header:?}"))),
    }
}
