//! `DRCORPUS 1` and `DRCATALOG 1` text formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{CatalogEntry, InterestCorpus};
use crate::format::{expect_header, lines, ParseError};

pub const CORPUS_HEADER: &str = "DRCORPUS 1";
pub const CATALOG_HEADER: &str = "DRCATALOG 1";

fn split_tokens(line: usize, field: &str) -> Result<Vec<String>, ParseError> {
    let tokens: Vec<String> = field.split(' ').filter(|t| !t.is_empty()).map(String::from).collect();
    if tokens.is_empty() {
        return Err(ParseError::new(line, "no tokens"));
    }
    Ok(tokens)
}

pub fn write_corpus(corpus: &InterestCorpus) -> String {
    let mut out = format!("{CORPUS_HEADER}\n");
    for (id, doc) in corpus.docs() {
        let _ = writeln!(out, "{id}\t{}", doc.join(" "));
    }
    out
}

pub fn parse_corpus(text: &str) -> Result<InterestCorpus, ParseError> {
    expect_header(text, CORPUS_HEADER)?;
    let mut docs = BTreeMap::new();
    for item in lines(text).skip(1) {
        let (n, line) = item?;
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| ParseError::new(n, "expected id<TAB>tokens"))?;
        if id.is_empty() || rest.contains('\t') {
            return Err(ParseError::new(n, "expected id<TAB>tokens"));
        }
        if docs.insert(id.to_owned(), split_tokens(n, rest)?).is_some() {
            return Err(ParseError::new(n, format!("duplicate interest {id:?}")));
        }
    }
    InterestCorpus::new(docs).map_err(|e| ParseError::new(1, e.to_string()))
}

pub fn write_catalog(catalog: &[CatalogEntry]) -> String {
    let mut out = format!("{CATALOG_HEADER}\n");
    for e in catalog {
        let kw: Vec<&str> = e.keywords.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}\t{}\t{}", e.index, e.service_id, kw.join(" "));
    }
    out
}

/// Entries must be listed with indices `0, 1, 2, ...` in order, matching the
/// record layout of the PIR database.
pub fn parse_catalog(text: &str) -> Result<Vec<CatalogEntry>, ParseError> {
    expect_header(text, CATALOG_HEADER)?;
    let mut out = Vec::new();
    for item in lines(text).skip(1) {
        let (n, line) = item?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(ParseError::new(n, "expected index<TAB>service-id<TAB>tokens"));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| ParseError::new(n, format!("bad index {:?}", fields[0])))?;
        if index != out.len() {
            return Err(ParseError::new(n, format!("expected index {}, got {index}", out.len())));
        }
        let service_id = fields[1].parse().map_err(|e: String| ParseError::new(n, e))?;
        out.push(CatalogEntry {
            index,
            service_id,
            keywords: split_tokens(n, fields[2])?.into_iter().collect(),
        });
    }
    if out.is_empty() {
        return Err(ParseError::new(1, "catalog is empty"));
    }
    Ok(out)
}
