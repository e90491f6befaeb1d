//! `DRPROFILE 1` text format.
//!
//! ```text
//! DRPROFILE 1
//! meta	timestamp	86400
//! meta	state	Evolution
//! meta	zeta_min	0.050000000
//! meta	zeta_max	0.600000000
//! meta	slot	1
//! brw	Games	0.100000000
//! cat	Games	0.350000000
//! ```
//!
//! `slot`, `temp_id` and `optin` meta lines are optional. Several documents
//! may be concatenated in one stream; each starts at its own header line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{InterestProfile, ProfileState, WeightBounds};
use crate::format::{fmt_weight, lines, parse_f64, ParseError};
use crate::ids::{CategoryId, ServiceId};

pub const PROFILE_HEADER: &str = "DRPROFILE 1";

/// A profile plus the fields the aggregation server needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileDocument {
    pub profile: InterestProfile,
    pub temp_id: Option<String>,
    pub optin: BTreeSet<ServiceId>,
}

impl ProfileDocument {
    pub fn new(profile: InterestProfile) -> Self {
        ProfileDocument {
            profile,
            temp_id: None,
            optin: BTreeSet::new(),
        }
    }
}

pub fn write_profile(doc: &ProfileDocument) -> String {
    let p = &doc.profile;
    let mut out = String::new();
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    let _ = writeln!(out, "meta\ttimestamp\t{}", p.timestamp);
    let _ = writeln!(out, "meta\tstate\t{}", p.state.as_str());
    let _ = writeln!(out, "meta\tzeta_min\t{}", fmt_weight(p.bounds.zeta_min));
    let _ = writeln!(out, "meta\tzeta_max\t{}", fmt_weight(p.bounds.zeta_max));
    let _ = writeln!(out, "meta\tslot\t{}", p.slot);
    if let Some(id) = &doc.temp_id {
        let _ = writeln!(out, "meta\ttemp_id\t{id}");
    }
    if !doc.optin.is_empty() {
        let ids: Vec<String> = doc.optin.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "meta\toptin\t{}", ids.join(","));
    }
    for (kind, map) in [("brw", &p.browsing), ("cat", &p.weights), ("int", &p.interactions)] {
        for (k, w) in map {
            let _ = writeln!(out, "{kind}\t{k}\t{}", fmt_weight(*w));
        }
    }
    out
}

pub fn parse_profile(text: &str) -> Result<ProfileDocument, ParseError> {
    let mut docs = parse_profiles(text)?;
    match docs.len() {
        1 => Ok(docs.pop().unwrap()),
        n => Err(ParseError::new(1, format!("expected one profile, found {n}"))),
    }
}

#[derive(Default)]
struct Builder {
    start: usize,
    timestamp: Option<i64>,
    state: Option<ProfileState>,
    zeta_min: Option<f64>,
    zeta_max: Option<f64>,
    slot: u64,
    temp_id: Option<String>,
    optin: BTreeSet<ServiceId>,
    maps: [BTreeMap<CategoryId, f64>; 3],
    seen_entry: bool,
}

impl Builder {
    fn finish(self) -> Result<ProfileDocument, ParseError> {
        let line = self.start;
        let missing = |k: &str| ParseError::new(line, format!("missing meta {k}"));
        let bounds = WeightBounds::new(
            self.zeta_min.ok_or_else(|| missing("zeta_min"))?,
            self.zeta_max.ok_or_else(|| missing("zeta_max"))?,
        )
        .map_err(|e| ParseError::new(line, e.to_string()))?;
        let [browsing, weights, interactions] = self.maps;
        let profile = InterestProfile::from_parts(
            weights,
            browsing,
            interactions,
            self.timestamp.ok_or_else(|| missing("timestamp"))?,
            self.slot,
            self.state.ok_or_else(|| missing("state"))?,
            bounds,
        )
        .map_err(|e| ParseError::new(line, e.to_string()))?;
        Ok(ProfileDocument {
            profile,
            temp_id: self.temp_id,
            optin: self.optin,
        })
    }
}

pub fn parse_profiles(text: &str) -> Result<Vec<ProfileDocument>, ParseError> {
    let mut docs = Vec::new();
    let mut cur: Option<Builder> = None;
    for item in lines(text) {
        let (n, line) = item?;
        if line == PROFILE_HEADER {
            if let Some(b) = cur.take() {
                docs.push(b.finish()?);
            }
            cur = Some(Builder {
                start: n,
                ..Default::default()
            });
            continue;
        }
        let b = cur
            .as_mut()
            .ok_or_else(|| ParseError::new(n, format!("expected header {PROFILE_HEADER:?}")))?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(ParseError::new(n, "expected three tab-separated fields"));
        }
        let (kind, key, value) = (fields[0], fields[1], fields[2]);
        if kind == "meta" {
            if b.seen_entry {
                return Err(ParseError::new(n, "meta line after weight entries"));
            }
            match key {
                "timestamp" => {
                    let t = value
                        .parse()
                        .map_err(|_| ParseError::new(n, format!("bad timestamp {value:?}")))?;
                    set_once(&mut b.timestamp, t, n, key)?
                }
                "state" => {
                    let s = ProfileState::parse(value)
                        .ok_or_else(|| ParseError::new(n, format!("bad state {value:?}")))?;
                    set_once(&mut b.state, s, n, key)?
                }
                "zeta_min" => set_once(&mut b.zeta_min, parse_f64(n, value)?, n, key)?,
                "zeta_max" => set_once(&mut b.zeta_max, parse_f64(n, value)?, n, key)?,
                "slot" => {
                    b.slot = value
                        .parse()
                        .map_err(|_| ParseError::new(n, format!("bad slot {value:?}")))?
                }
                "temp_id" => {
                    if value.is_empty() {
                        return Err(ParseError::new(n, "empty temp_id"));
                    }
                    set_once(&mut b.temp_id, value.to_owned(), n, key)?
                }
                "optin" => {
                    for part in value.split(',') {
                        let id = part.parse().map_err(|e: String| ParseError::new(n, e))?;
                        b.optin.insert(id);
                    }
                }
                _ => return Err(ParseError::new(n, format!("unknown meta key {key:?}"))),
            }
            continue;
        }
        let slot = match kind {
            "brw" => 0,
            "cat" => 1,
            "int" => 2,
            _ => return Err(ParseError::new(n, format!("unknown entry kind {kind:?}"))),
        };
        b.seen_entry = true;
        let id = CategoryId::new(key);
        if !id.is_valid() {
            return Err(ParseError::new(n, "empty category id"));
        }
        let w = parse_f64(n, value)?;
        if b.maps[slot].insert(id, w).is_some() {
            return Err(ParseError::new(n, format!("duplicate {kind} entry {key:?}")));
        }
    }
    if let Some(b) = cur {
        docs.push(b.finish()?);
    }
    if docs.is_empty() {
        return Err(ParseError::new(1, format!("expected header {PROFILE_HEADER:?}")));
    }
    Ok(docs)
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(ParseError::new(line, format!("duplicate meta {key}")));
    }
    *slot = Some(value);
    Ok(())
}
