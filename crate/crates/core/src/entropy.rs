//! Weighted Shannon entropy of a profile, privacy loss against the uniform
//! maximum, and the evaporation / apoptosis responses.

use std::collections::BTreeSet;

use crate::ids::CategoryId;
use crate::profile::InterestProfile;

pub const SUM_TOLERANCE: f64 = 1e-9;
pub const ALPHA_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EntropyError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("target {target} bits exceeds maximum entropy {h_max}")]
    UnreachableTarget { target: f64, h_max: f64 },
    #[error("cannot remove {k} of {n} attributes")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDistribution {
    labels: Vec<CategoryId>,
    probs: Vec<f64>,
    weights: Vec<f64>,
}

impl AttributeDistribution {
    pub fn new(labels: Vec<CategoryId>, probs: Vec<f64>, weights: Vec<f64>) -> Result<Self, EntropyError> {
        let bad = |m: String| Err(EntropyError::InvalidDistribution(m));
        if probs.is_empty() {
            return bad("no attributes".into());
        }
        if labels.len() != probs.len() || weights.len() != probs.len() {
            return bad(format!(
                "lengths differ: {} labels, {} probabilities, {} weights",
                labels.len(),
                probs.len(),
                weights.len()
            ));
        }
        if probs.iter().chain(&weights).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad("negative or non-finite entry".into());
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return bad(format!("probabilities sum to {sum}"));
        }
        Ok(AttributeDistribution { labels, probs, weights })
    }

    /// Unit-weight distribution with labels `0, 1, ...`.
    pub fn unlabelled(probs: Vec<f64>) -> Result<Self, EntropyError> {
        let n = probs.len();
        AttributeDistribution::new(
            (0..n).map(|i| CategoryId::new(i.to_string())).collect(),
            probs,
            vec![1.0; n],
        )
    }

    /// The normalised category weights of a profile, unit attribute weights.
    pub fn from_profile(p: &InterestProfile) -> Result<Self, EntropyError> {
        let total: f64 = p.weights().values().sum();
        if !(total > 0.0) {
            return Err(EntropyError::InvalidDistribution("profile has no weight".into()));
        }
        let n = p.weights().len();
        AttributeDistribution::new(
            p.weights().keys().cloned().collect(),
            p.weights().values().map(|w| w / total).collect(),
            vec![1.0; n],
        )
    }

    pub fn labels(&self) -> &[CategoryId] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn with_probs(&self, probs: Vec<f64>) -> Self {
        AttributeDistribution {
            labels: self.labels.clone(),
            probs,
            weights: self.weights.clone(),
        }
    }

    fn mix_uniform(&self, alpha: f64) -> Self {
        let u = 1.0 / self.len() as f64;
        self.with_probs(self.probs.iter().map(|p| (1.0 - alpha) * p + alpha * u).collect())
    }
}

fn weighted_entropy(probs: &[f64], weights: &[f64]) -> f64 {
    probs
        .iter()
        .zip(weights)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, w)| -w * p * p.log2())
        .sum()
}

/// `H = sum w_i * (-p_i log2 p_i)` in bits.
pub fn entropy(dist: &AttributeDistribution) -> f64 {
    weighted_entropy(&dist.probs, &dist.weights)
}

/// Entropy of the uniform distribution over `n` attributes under `weights`:
/// `(sum w_i / n) * log2 n`.
pub fn max_entropy(n: usize, weights: &[f64]) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    weights.iter().sum::<f64>() / n as f64 * (n as f64).log2()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyState {
    pub h: f64,
    pub h_max: f64,
    pub loss: f64,
    pub slot: u64,
}

pub fn privacy_loss(dist: &AttributeDistribution, slot: u64) -> EntropyState {
    let h = entropy(dist);
    let h_max = max_entropy(dist.len(), &dist.weights);
    EntropyState {
        h,
        h_max,
        loss: h_max - h,
        slot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorPolicy {
    pub theta_evap: f64,
    pub theta_apop: f64,
    pub target: f64,
}

impl MonitorPolicy {
    pub fn new(theta_apop: f64, theta_evap: f64, target: f64, h_max: f64) -> Result<Self, EntropyError> {
        if !(0.0 <= theta_apop && theta_apop < theta_evap && theta_evap <= target && target <= h_max) {
            return Err(EntropyError::InvalidPolicy(format!(
                "need 0 <= {theta_apop} < {theta_evap} <= {target} <= {h_max}"
            )));
        }
        Ok(MonitorPolicy {
            theta_evap,
            theta_apop,
            target,
        })
    }

    /// Thresholds as fractions of `h_max`; the defaults are 0.3, 0.6 and 0.8.
    pub fn from_fractions(h_max: f64, apop: f64, evap: f64, target: f64) -> Result<Self, EntropyError> {
        MonitorPolicy::new(apop * h_max, evap * h_max, target * h_max, h_max)
    }

    pub fn default_for(h_max: f64) -> Result<Self, EntropyError> {
        MonitorPolicy::from_fractions(h_max, 0.3, 0.6, 0.8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    None,
    Evaporate,
    Apoptose,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::None => "none",
            Action::Evaporate => "evaporate",
            Action::Apoptose => "apoptose",
        }
    }
}

pub fn decide(state: &EntropyState, policy: &MonitorPolicy) -> Action {
    if state.h <= policy.theta_apop {
        Action::Apoptose
    } else if state.h <= policy.theta_evap {
        Action::Evaporate
    } else {
        Action::None
    }
}

/// Mixes `dist` toward uniform with the smallest `alpha` (to within
/// [`ALPHA_RESOLUTION`]) that lifts its entropy to `target`.
pub fn evaporate(dist: &AttributeDistribution, target: f64) -> Result<(AttributeDistribution, f64), EntropyError> {
    let h_max = max_entropy(dist.len(), &dist.weights);
    if target > h_max + 1e-12 {
        return Err(EntropyError::UnreachableTarget { target, h_max });
    }
    if entropy(dist) >= target {
        return Ok((dist.clone(), 0.0));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if entropy(&dist.mix_uniform(hi)) < target {
        // uniform still misses the target only through rounding
        return Ok((dist.mix_uniform(1.0), 1.0));
    }
    while hi - lo > ALPHA_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if entropy(&dist.mix_uniform(mid)) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((dist.mix_uniform(hi), hi))
}

/// Returned by [`apoptose`]: the profile must be re-derived without the
/// removed categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReEvaluate {
    pub removed: BTreeSet<CategoryId>,
}

/// Removes the `k` attributes with the largest `w_i * p_i`, ties to the
/// smallest id.
pub fn apoptose(
    profile: &InterestProfile,
    dist: &AttributeDistribution,
    k: usize,
) -> Result<(InterestProfile, ReEvaluate), EntropyError> {
    let n = dist.len();
    if k == 0 || k >= n {
        return Err(EntropyError::KTooLarge { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let score = |i: usize| dist.weights[i] * dist.probs[i];
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(dist.labels[a].cmp(&dist.labels[b])));
    let removed: BTreeSet<CategoryId> = order[..k].iter().map(|&i| dist.labels[i].clone()).collect();
    Ok((profile.without(&removed), ReEvaluate { removed }))
}

/// One line of the monitor log.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    pub state: EntropyState,
    pub action: Action,
    /// `alpha` for evaporation, `k` for apoptosis, 0 otherwise.
    pub alpha_or_k: f64,
}

/// CSV `slot,h,h_max,loss,action,alpha_or_k`.
pub fn write_monitor_log<W: std::io::Write>(out: W, records: &[MonitorRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "h", "h_max", "loss", "action", "alpha_or_k"])?;
    for r in records {
        w.write_record([
            r.state.slot.to_string(),
            format!("{:.9}", r.state.h),
            format!("{:.9}", r.state.h_max),
            format!("{:.9}", r.state.loss),
            r.action.as_str().to_string(),
            match r.action {
                Action::Apoptose => format!("{}", r.alpha_or_k as u64),
                _ => format!("{:.9}", r.alpha_or_k),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::WeightBounds;
    use proptest::prelude::*;

    fn dist(p: &[f64], w: &[f64]) -> AttributeDistribution {
        AttributeDistribution::new(
            (0..p.len()).map(|i| CategoryId::new(format!("c{i}"))).collect(),
            p.to_vec(),
            w.to_vec(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&dist(&[1.0], &[1.0])), 0.0);
        assert!(close(entropy(&dist(&[0.5, 0.5], &[1.0, 1.0])), 1.0, 1e-12));
        assert!(close(entropy(&dist(&[0.125; 8], &[1.0; 8])), 3.0, 1e-12));
        // 1*0.5 + 2*0.5 + 1*0.5
        assert!(close(entropy(&dist(&[0.5, 0.25, 0.25], &[1.0, 2.0, 1.0])), 2.0, 1e-12));
        assert!(AttributeDistribution::unlabelled(vec![0.5, 0.6]).is_err());
        assert!(AttributeDistribution::unlabelled(vec![]).is_err());
        assert!(AttributeDistribution::new(vec!["a".into()], vec![1.0], vec![]).is_err());
    }

    #[test]
    fn max_entropy_examples() {
        assert_eq!(max_entropy(1, &[1.0]), 0.0);
        assert!(close(max_entropy(8, &[1.0; 8]), 3.0, 1e-12));
        assert!(close(max_entropy(4, &[2.0, 1.0, 1.0, 0.0]), 2.0, 1e-12));
    }

    #[test]
    fn loss_examples() {
        assert!(close(privacy_loss(&dist(&[0.25; 4], &[1.0; 4]), 0).loss, 0.0, 1e-12));
        assert!(close(privacy_loss(&dist(&[1.0, 0.0, 0.0, 0.0], &[1.0; 4]), 0).loss, 2.0, 1e-12));
        let h = -0.7 * 0.7f64.log2() - 3.0 * 0.1 * 0.1f64.log2();
        assert!(close(h, 1.3568, 1e-4));
        let s = privacy_loss(&dist(&[0.7, 0.1, 0.1, 0.1], &[1.0; 4]), 3);
        assert!(close(s.loss, 2.0 - h, 1e-12));
        assert!(close(s.loss, 0.6432, 1e-4));
        assert_eq!(s.slot, 3);
    }

    #[test]
    fn decision_regions() {
        let policy = MonitorPolicy::default_for(2.0).unwrap();
        let at = |h: f64| decide(&EntropyState { h, h_max: 2.0, loss: 2.0 - h, slot: 0 }, &policy);
        assert_eq!(at(2.0), Action::None);
        assert_eq!(at(0.6), Action::Apoptose);
        assert_eq!(at(0.0), Action::Apoptose);
        assert_eq!(at(0.9), Action::Evaporate);
        assert_eq!(at(1.2), Action::Evaporate);
        assert_eq!(at(1.2000001), Action::None);
        assert!(MonitorPolicy::default_for(0.0).is_err());
        assert!(MonitorPolicy::new(0.5, 0.4, 0.8, 1.0).is_err());
    }

    #[test]
    fn evaporation_examples() {
        let d = dist(&[0.5, 0.5], &[1.0, 1.0]);
        let (out, alpha) = evaporate(&d, 0.5).unwrap();
        assert_eq!((out, alpha), (d.clone(), 0.0));

        let d = dist(&[0.7, 0.2, 0.1], &[1.0; 3]);
        let (out, alpha) = evaporate(&d, 3f64.log2()).unwrap();
        assert!(alpha > 1.0 - 1e-6);
        for p in out.probs() {
            assert!(close(*p, 1.0 / 3.0, 1e-6));
        }
        assert!(matches!(evaporate(&d, 2.0), Err(EntropyError::UnreachableTarget { .. })));

        // dense grid oracle for the smallest alpha reaching 0.9 bits
        let d = dist(&[0.9, 0.1], &[1.0, 1.0]);
        let (out, alpha) = evaporate(&d, 0.9).unwrap();
        let h = entropy(&out);
        assert!((0.9..=0.9 + 1e-6).contains(&h), "{h}");
        let grid = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .find(|&a| weighted_entropy(&[0.9 - 0.4 * a, 0.1 + 0.4 * a], &[1.0, 1.0]) >= 0.9)
            .unwrap();
        assert!(alpha <= grid && grid - alpha <= 1e-5, "{alpha} {grid}");
    }

    fn profile(ws: &[(&str, f64)]) -> InterestProfile {
        InterestProfile::from_weights(
            ws.iter().map(|(k, w)| (CategoryId::from(*k), *w)),
            WeightBounds::new(0.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn apoptosis_examples() {
        let p = profile(&[("b", 0.25), ("a", 0.25), ("c", 0.25), ("d", 0.25)]);
        let d = AttributeDistribution::from_profile(&p).unwrap();
        let (out, sig) = apoptose(&p, &d, 1).unwrap();
        assert_eq!(sig.removed, BTreeSet::from([CategoryId::from("a")]));
        assert_eq!(out.weights().len(), 3);
        let (out, _) = apoptose(&p, &d, 3).unwrap();
        assert_eq!(out.weights().len(), 1);
        assert!(matches!(apoptose(&p, &d, 4), Err(EntropyError::KTooLarge { k: 4, n: 4 })));
        assert!(apoptose(&p, &d, 0).is_err());

        // w*p = 0.1, 0.6, 0.2, 0.4 -> top-2 by hand: y, w
        let p = profile(&[("x", 0.1), ("y", 0.3), ("z", 0.2), ("w", 0.4)]);
        let labels: Vec<CategoryId> = p.weights().keys().cloned().collect();
        assert_eq!(labels, vec!["w".into(), "x".into(), "y".into(), "z".into()]);
        let d = AttributeDistribution::new(labels, vec![0.4, 0.1, 0.3, 0.2], vec![1.0, 1.0, 2.0, 1.0]).unwrap();
        let (_, sig) = apoptose(&p, &d, 2).unwrap();
        assert_eq!(sig.removed, BTreeSet::from(["y".into(), "w".into()]));
    }

    #[test]
    fn monitor_log_format() {
        let rec = MonitorRecord {
            state: EntropyState { h: 0.5, h_max: 2.0, loss: 1.5, slot: 4 },
            action: Action::Apoptose,
            alpha_or_k: 1.0,
        };
        let mut buf = Vec::new();
        write_monitor_log(&mut buf, &[rec]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "slot,h,h_max,loss,action,alpha_or_k\n4,0.500000000,2.000000000,1.500000000,apoptose,1\n"
        );
    }

    fn arb_probs() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, 1..10).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn evaporation_is_monotone_in_alpha(p in arb_probs()) {
            let d = AttributeDistribution::unlabelled(p).unwrap();
            let mut last = entropy(&d);
            for i in 1..=50 {
                let h = entropy(&d.mix_uniform(i as f64 / 50.0));
                prop_assert!(h >= last - 1e-12);
                last = h;
            }
        }

        #[test]
        fn loss_plus_h_is_h_max(p in arb_probs()) {
            let s = privacy_loss(&AttributeDistribution::unlabelled(p).unwrap(), 0);
            prop_assert_eq!(s.loss + s.h, s.h_max);
            prop_assert!(s.loss >= -1e-12);
        }

        #[test]
        fn decide_is_monotone(h_max in 0.1f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let policy = MonitorPolicy::default_for(h_max).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let st = |h: f64| EntropyState { h: h * h_max, h_max, loss: 0.0, slot: 0 };
            prop_assert!(decide(&st(lo), &policy) >= decide(&st(hi), &policy));
        }

        #[test]
        fn entropy_is_permutation_invariant(
            pw in arb_probs().prop_flat_map(|p| {
                let n = p.len();
                (Just(p), proptest::collection::vec(0.0f64..3.0, n), Just(()).prop_perturb(move |_, mut rng| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    for i in (1..n).rev() {
                        idx.swap(i, rng.random_range(0..=i));
                    }
                    idx
                }))
            })
        ) {
            let (p, w, perm) = pw;
            let pp: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            let ww: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
            prop_assert!((weighted_entropy(&p, &w) - weighted_entropy(&pp, &ww)).abs() < 1e-12);
        }

        #[test]
        fn evaporation_reaches_target(p in arb_probs(), frac in 0.0f64..=1.0) {
            let d = AttributeDistribution::unlabelled(p).unwrap();
            let h_max = max_entropy(d.len(), d.weights());
            let target = frac * h_max;
            let (out, alpha) = evaporate(&d, target).unwrap();
            prop_assert!((0.0..=1.0).contains(&alpha));
            prop_assert!(entropy(&out) >= entropy(&d) - 1e-12);
            if alpha < 1.0 {
                prop_assert!(entropy(&out) >= target);
            }
        }
    }
}
