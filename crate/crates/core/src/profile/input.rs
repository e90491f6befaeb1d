//! Text inputs to profiling: opted-in services, the category map, per-slot
//! deltas and usage records.
//!
//! ```text
//! DRSERVICES 1
//! 3:1	Market/Games	puzzle tiles daily
//!
//! DRCATMAP 1
//! Market/Games	Games/Puzzle
//!
//! DRDELTA 1
//! slot	2
//! cat	Games/Puzzle	0.050000000
//!
//! DRUSAGE 1
//! slot	2
//! 3:1	0.250000000
//! ```
//!
//! Delta and usage files may hold several documents, one per header line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{ContextProfile, ProfileDelta, Service, UsageRecord};
use crate::format::{expect_header, fmt_weight, lines, parse_f64, ParseError};
use crate::ids::{CategoryId, ServiceId};

pub const SERVICES_HEADER: &str = "DRSERVICES 1";
pub const CATMAP_HEADER: &str = "DRCATMAP 1";
pub const DELTA_HEADER: &str = "DRDELTA 1";
pub const USAGE_HEADER: &str = "DRUSAGE 1";

fn fields(n: usize, line: &str, count: usize, what: &str) -> Result<Vec<String>, ParseError> {
    let f: Vec<String> = line.split('\t').map(String::from).collect();
    if f.len() != count || f.iter().any(String::is_empty) {
        return Err(ParseError::new(n, format!("expected {what}")));
    }
    Ok(f)
}

fn service_id(n: usize, s: &str) -> Result<ServiceId, ParseError> {
    s.parse().map_err(|e: String| ParseError::new(n, e))
}

pub fn write_services(ctx: &ContextProfile) -> String {
    let mut out = format!("{SERVICES_HEADER}\n");
    for s in ctx.services() {
        let kw: Vec<&str> = s.keywords.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}\t{}\t{}", s.id, s.category, kw.join(" "));
    }
    out
}

pub fn parse_services(text: &str) -> Result<ContextProfile, ParseError> {
    expect_header(text, SERVICES_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut services = Vec::new();
    for item in lines(text).skip(1) {
        let (n, line) = item?;
        let f = fields(n, line, 3, "id<TAB>category<TAB>keywords")?;
        let id = service_id(n, &f[0])?;
        if !seen.insert(id) {
            return Err(ParseError::new(n, format!("duplicate service {id}")));
        }
        services.push(Service {
            id,
            category: CategoryId::new(f[1].as_str()),
            keywords: f[2].split(' ').filter(|t| !t.is_empty()).map(String::from).collect(),
        });
    }
    ContextProfile::new(services).map_err(|e| ParseError::new(1, e.to_string()))
}

pub fn write_category_map(table: &BTreeMap<CategoryId, CategoryId>) -> String {
    let mut out = format!("{CATMAP_HEADER}\n");
    for (from, to) in table {
        let _ = writeln!(out, "{from}\t{to}");
    }
    out
}

pub fn parse_category_map(text: &str) -> Result<BTreeMap<CategoryId, CategoryId>, ParseError> {
    expect_header(text, CATMAP_HEADER)?;
    let mut table = BTreeMap::new();
    for item in lines(text).skip(1) {
        let (n, line) = item?;
        let f = fields(n, line, 2, "market-category<TAB>interest")?;
        if table.insert(CategoryId::new(f[0].as_str()), CategoryId::new(f[1].as_str())).is_some() {
            return Err(ParseError::new(n, format!("duplicate category {:?}", f[0])));
        }
    }
    Ok(table)
}

/// Splits a stream of concatenated documents at each `header` line and
/// feeds the remaining lines of each to `body`.
fn split_docs<'a, T>(
    text: &'a str,
    header: &str,
    mut body: impl FnMut(usize, &[(usize, &'a str)]) -> Result<T, ParseError>,
) -> Result<Vec<T>, ParseError> {
    let mut docs = Vec::new();
    let mut cur: Option<(usize, Vec<(usize, &str)>)> = None;
    for item in lines(text) {
        let (n, line) = item?;
        if line == header {
            if let Some((start, ls)) = cur.take() {
                docs.push(body(start, &ls)?);
            }
            cur = Some((n, Vec::new()));
            continue;
        }
        match cur.as_mut() {
            Some((_, ls)) => ls.push((n, line)),
            None => return Err(ParseError::new(n, format!("expected header {header:?}"))),
        }
    }
    if let Some((start, ls)) = cur {
        docs.push(body(start, &ls)?);
    }
    if docs.is_empty() {
        return Err(ParseError::new(1, format!("expected header {header:?}")));
    }
    Ok(docs)
}

fn slot_line(start: usize, ls: &[(usize, &str)]) -> Result<u64, ParseError> {
    let &(n, first) = ls
        .first()
        .ok_or_else(|| ParseError::new(start, "missing slot line"))?;
    let f = fields(n, first, 2, "slot<TAB>index")?;
    if f[0] != "slot" {
        return Err(ParseError::new(n, "expected slot line"));
    }
    f[1].parse().map_err(|_| ParseError::new(n, format!("bad slot {:?}", f[1])))
}

pub fn write_deltas(deltas: &[ProfileDelta]) -> String {
    let mut out = String::new();
    for d in deltas {
        let _ = writeln!(out, "{DELTA_HEADER}\nslot\t{}", d.slot);
        for (kind, map) in [
            ("cat", &d.category_changes),
            ("brw", &d.browsing_changes),
            ("int", &d.interaction_changes),
        ] {
            for (k, c) in map {
                let _ = writeln!(out, "{kind}\t{k}\t{}", fmt_weight(*c));
            }
        }
    }
    out
}

/// Parses one or more deltas. Values are checked when the delta is applied,
/// against the profile's cap.
pub fn parse_deltas(text: &str) -> Result<Vec<ProfileDelta>, ParseError> {
    split_docs(text, DELTA_HEADER, |start, ls| {
        let mut d = ProfileDelta::new(slot_line(start, ls)?);
        for &(n, line) in &ls[1..] {
            let f = fields(n, line, 3, "kind<TAB>category<TAB>change")?;
            let map = match f[0].as_str() {
                "cat" => &mut d.category_changes,
                "brw" => &mut d.browsing_changes,
                "int" => &mut d.interaction_changes,
                other => return Err(ParseError::new(n, format!("unknown kind {other:?}"))),
            };
            if map.insert(CategoryId::new(f[1].as_str()), parse_f64(n, &f[2])?).is_some() {
                return Err(ParseError::new(n, format!("duplicate {} entry {:?}", f[0], f[1])));
            }
        }
        Ok(d)
    })
}

pub fn write_usage(records: &[UsageRecord]) -> String {
    let mut out = String::new();
    for u in records {
        let _ = writeln!(out, "{USAGE_HEADER}\nslot\t{}", u.slot);
        for (id, v) in &u.per_service_usage {
            let _ = writeln!(out, "{id}\t{}", fmt_weight(*v));
        }
    }
    out
}

pub fn parse_usage(text: &str) -> Result<Vec<UsageRecord>, ParseError> {
    split_docs(text, USAGE_HEADER, |start, ls| {
        let mut u = UsageRecord {
            slot: slot_line(start, ls)?,
            ..Default::default()
        };
        for &(n, line) in &ls[1..] {
            let f = fields(n, line, 2, "service-id<TAB>fraction")?;
            let id = service_id(n, &f[0])?;
            if u.per_service_usage.insert(id, parse_f64(n, &f[1])?).is_some() {
                return Err(ParseError::new(n, format!("duplicate service {id}")));
            }
        }
        u.validate().map_err(|e| ParseError::new(start, e.to_string()))?;
        Ok(u)
    })
}
