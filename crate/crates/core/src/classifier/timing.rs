//! Idle, impression and burst timers over one device log.

use std::collections::BTreeMap;

use super::{AdImpression, Network};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimingError {
    #[error("arrival {arrival} outside the experiment [{start}, {end}]")]
    OutOfWindow { arrival: i64, start: i64, end: i64 },
    #[error("arrivals not sorted at impression {0}")]
    Unsorted(usize),
    #[error("negative duration {0}")]
    NegativeDuration(i64),
}

/// A maximal run of consecutive impressions from one network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Burst {
    pub network: Network,
    pub count: usize,
    /// Last arrival minus first arrival of the run.
    pub length_s: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimingStats {
    /// Time before the first ad.
    pub idle_s: i64,
    /// On-screen time of each ad; the last one runs to the experiment end.
    pub impression_s: Vec<i64>,
    pub bursts: Vec<Burst>,
    /// Summed on-screen time per network.
    pub airtime_s: BTreeMap<Network, i64>,
}

impl TimingStats {
    pub fn total_s(&self) -> i64 {
        self.idle_s + self.impression_s.iter().sum::<i64>()
    }
}

pub fn timing_stats(impressions: &[AdImpression], start: i64, duration: i64) -> Result<TimingStats, TimingError> {
    if duration < 0 {
        return Err(TimingError::NegativeDuration(duration));
    }
    let end = start + duration;
    for (i, imp) in impressions.iter().enumerate() {
        if imp.arrival < start || imp.arrival > end {
            return Err(TimingError::OutOfWindow {
                arrival: imp.arrival,
                start,
                end,
            });
        }
        if i > 0 && imp.arrival < impressions[i - 1].arrival {
            return Err(TimingError::Unsorted(i));
        }
    }
    let Some(first) = impressions.first() else {
        return Ok(TimingStats {
            idle_s: duration,
            ..Default::default()
        });
    };
    let mut stats = TimingStats {
        idle_s: first.arrival - start,
        ..Default::default()
    };
    for (i, imp) in impressions.iter().enumerate() {
        let next = impressions.get(i + 1).map_or(end, |n| n.arrival);
        let shown = next - imp.arrival;
        stats.impression_s.push(shown);
        *stats.airtime_s.entry(imp.network.clone()).or_insert(0) += shown;
    }
    let mut run_start = 0;
    for i in 1..=impressions.len() {
        if i == impressions.len() || impressions[i].network != impressions[run_start].network {
            stats.bursts.push(Burst {
                network: impressions[run_start].network.clone(),
                count: i - run_start,
                length_s: impressions[i - 1].arrival - impressions[run_start].arrival,
            });
            run_start = i;
        }
    }
    Ok(stats)
}
