//! Impression logs, taxonomy files and report CSVs.

use std::collections::BTreeMap;
use std::io::Write;

use super::{AdClass, AdImpression, CategoryNode, ClassifiedAds, DpEffect, FrequencyReport, Network, TimingStats};
use crate::format::{lines, ParseError};

pub const IMPRESSION_HEADER: [&str; 6] = ["experiment_id", "profile", "app_category", "arrival_epoch_s", "network", "ad_url"];
const PRECATEGORIZED_HEADER: [&str; 2] = ["ad_url", "category_path"];

fn csv_line(pos: Option<&csv::Position>) -> usize {
    pos.map_or(0, |p| p.line() as usize)
}

fn csv_error(e: csv::Error) -> ParseError {
    ParseError::new(csv_line(e.position()), e.to_string())
}

fn read_csv(text: &str, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>, ParseError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let got = rdr.headers().map_err(csv_error)?;
    if got.iter().ne(header.iter().copied()) {
        return Err(ParseError::new(1, format!("expected header {:?}", header.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        out.push((csv_line(rec.position()), rec));
    }
    Ok(out)
}

/// Parses `experiment_id,profile,app_category,arrival_epoch_s,network,ad_url`.
/// Arrivals must not decrease within an experiment.
pub fn parse_impressions(text: &str) -> Result<Vec<AdImpression>, ParseError> {
    let mut last: BTreeMap<String, i64> = BTreeMap::new();
    let mut out = Vec::new();
    for (n, rec) in read_csv(text, &IMPRESSION_HEADER)? {
        if rec.iter().any(str::is_empty) {
            return Err(ParseError::new(n, "empty field"));
        }
        let arrival: i64 = rec[3]
            .parse()
            .map_err(|_| ParseError::new(n, format!("bad arrival {:?}", &rec[3])))?;
        let prev = last.entry(rec[0].to_owned()).or_insert(i64::MIN);
        if arrival < *prev {
            return Err(ParseError::new(n, "arrivals decrease within the experiment"));
        }
        *prev = arrival;
        out.push(AdImpression {
            experiment_id: rec[0].to_owned(),
            profile: rec[1].to_owned(),
            app_category: rec[2].into(),
            arrival,
            network: Network::parse(&rec[4]),
            ad_url: rec[5].to_owned(),
        });
    }
    Ok(out)
}

pub fn write_impressions<W: Write>(out: W, impressions: &[AdImpression]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(IMPRESSION_HEADER)?;
    for i in impressions {
        w.write_record([
            i.experiment_id.as_str(),
            i.profile.as_str(),
            i.app_category.as_str(),
            &i.arrival.to_string(),
            &i.network.to_string(),
            i.ad_url.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One slash-separated path per line.
pub fn parse_taxonomy(text: &str) -> Result<Vec<CategoryNode>, ParseError> {
    let mut out = Vec::new();
    for item in lines(text) {
        let (n, line) = item?;
        out.push(CategoryNode::parse(line).map_err(|e| ParseError::new(n, e.to_string()))?);
    }
    if out.is_empty() {
        return Err(ParseError::new(1, "empty taxonomy"));
    }
    Ok(out)
}

pub fn write_taxonomy(nodes: &[CategoryNode]) -> String {
    nodes.iter().map(|n| format!("{}\n", n.path())).collect()
}

/// CSV `ad_url,category_path` of URLs with a known category.
pub fn parse_precategorized(text: &str) -> Result<BTreeMap<String, CategoryNode>, ParseError> {
    let mut out = BTreeMap::new();
    for (n, rec) in read_csv(text, &PRECATEGORIZED_HEADER)? {
        let node = CategoryNode::parse(&rec[1]).map_err(|e| ParseError::new(n, e.to_string()))?;
        if out.insert(rec[0].to_owned(), node).is_some() {
            return Err(ParseError::new(n, format!("duplicate url {:?}", &rec[0])));
        }
    }
    Ok(out)
}

pub fn write_precategorized<W: Write>(out: W, table: &BTreeMap<String, CategoryNode>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PRECATEGORIZED_HEADER)?;
    for (url, node) in table {
        w.write_record([url.as_str(), &node.path()])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `class,count,percent`.
pub fn write_class_report<W: Write>(out: W, classified: &ClassifiedAds) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "count", "percent"])?;
    let props = classified.proportions();
    for (class, count) in classified.counts() {
        w.write_record([class.as_str(), &count.to_string(), &format!("{:.4}", props[&class])])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `class,before_pct,after_pct,diff_pct`.
pub fn write_dp_effect<W: Write>(out: W, effect: &DpEffect) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "before_pct", "after_pct", "diff_pct"])?;
    let diff = effect.difference();
    for c in AdClass::ALL {
        w.write_record([
            c.as_str(),
            &format!("{:.4}", effect.before[&c]),
            &format!("{:.4}", effect.after[&c]),
            &format!("{:.4}", diff[&c]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn mean(xs: impl Iterator<Item = i64>) -> f64 {
    let (mut sum, mut n) = (0i64, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// One row per `(experiment, profile)` log.
pub fn write_timing_report<W: Write>(out: W, rows: &[(String, String, TimingStats)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment_id",
        "profile",
        "duration_s",
        "idle_s",
        "impressions",
        "mean_impression_s",
        "bursts",
        "mean_burst_s",
        "admob_airtime_s",
        "third_party_airtime_s",
    ])?;
    for (exp, profile, s) in rows {
        let admob = s.airtime_s.get(&Network::AdMob).copied().unwrap_or(0);
        let third: i64 = s
            .airtime_s
            .iter()
            .filter(|(n, _)| **n != Network::AdMob)
            .map(|(_, v)| v)
            .sum();
        w.write_record([
            exp.as_str(),
            profile.as_str(),
            &s.total_s().to_string(),
            &s.idle_s.to_string(),
            &s.impression_s.len().to_string(),
            &format!("{:.3}", mean(s.impression_s.iter().copied())),
            &s.bursts.len().to_string(),
            &format!("{:.3}", mean(s.bursts.iter().map(|b| b.length_s))),
            &admob.to_string(),
            &third.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `bin_lo,bin_hi,unique_ads`; the overflow bin has an empty upper bound.
pub fn write_frequency_report<W: Write>(out: W, report: &FrequencyReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "unique_ads"])?;
    for (i, n) in report.histogram.iter().enumerate() {
        let (lo, hi) = report.bins.bounds(i);
        w.write_record([lo.to_string(), hi.to_string(), n.to_string()])?;
    }
    w.write_record([(report.bins.max + 1).to_string(), String::new(), report.overflow.to_string()])?;
    w.flush()?;
    Ok(())
}
