//! Local aggregation server: grouping of similar profiles, statistical
//! queries over the profile database and Laplace perturbation of the answers.
//!
//! Adjacency is add/remove of one row and sensitivities are L1.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::ids::{CategoryId, ServiceId};
use crate::profile::{InterestProfile, ProfileDocument, ProfileError, WeightBounds};

/// Lowest weight a privatized category can take, so the released support set
/// stays fixed even when the noise drives a weight to zero or below.
pub const ZETA_FLOOR: f64 = 1e-4;
pub const MIN_GROUP_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DpError {
    #[error("grouping threshold {0} outside [0.6, 1.0]")]
    ThresholdOutOfRange(f64),
    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("sensitivity must be non-negative, got {0}")]
    NegativeSensitivity(f64),
    #[error("profile {0} has no temp_id")]
    MissingTempId(usize),
    #[error("duplicate temp_id {0}")]
    DuplicateTempId(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// A profile snapshot as held by the aggregation server.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub temp_id: String,
    pub interests: InterestProfile,
    pub optin_services: BTreeSet<ServiceId>,
}

impl ProfileRow {
    /// The heaviest category; ties go to the smallest id.
    pub fn dominant_category(&self) -> Option<&CategoryId> {
        let mut best: Option<(&CategoryId, f64)> = None;
        for (k, &w) in self.interests.weights() {
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((k, w));
            }
        }
        best.map(|(k, _)| k)
    }

    fn category_set(&self) -> BTreeSet<&CategoryId> {
        self.interests.weights().keys().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileDatabase {
    rows: Vec<ProfileRow>,
}

impl ProfileDatabase {
    pub fn new(rows: Vec<ProfileRow>) -> Result<Self, DpError> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert(r.temp_id.as_str()) {
                return Err(DpError::DuplicateTempId(r.temp_id.clone()));
            }
        }
        Ok(ProfileDatabase { rows })
    }

    pub fn from_documents(docs: Vec<ProfileDocument>) -> Result<Self, DpError> {
        let rows = docs
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                Ok(ProfileRow {
                    temp_id: d.temp_id.ok_or(DpError::MissingTempId(i))?,
                    interests: d.profile,
                    optin_services: d.optin,
                })
            })
            .collect::<Result<Vec<_>, DpError>>()?;
        ProfileDatabase::new(rows)
    }

    pub fn rows(&self) -> &[ProfileRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// A fresh 128-bit temporary identifier, hex encoded.
pub fn fresh_temp_id<R: Rng + ?Sized>(rng: &mut R) -> String {
    format!("{:032x}", rng.random::<u128>())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryKind {
    CountOptIn(ServiceId),
    /// Number of rows whose dominant category is each taxonomy entry.
    CategoryHistogram,
    /// The histogram, released noisily, followed by an argmax on the client.
    MostRequestedService,
}

impl QueryKind {
    pub fn label(&self) -> String {
        match self {
            QueryKind::CountOptIn(s) => format!("count_optin:{s}"),
            QueryKind::CategoryHistogram => "category_histogram".into(),
            QueryKind::MostRequestedService => "most_requested_service".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatQuery {
    pub kind: QueryKind,
    pub output_dim: usize,
}

impl StatQuery {
    pub fn count_optin(service: ServiceId) -> Self {
        StatQuery {
            kind: QueryKind::CountOptIn(service),
            output_dim: 1,
        }
    }

    pub fn histogram(taxonomy: &[CategoryId]) -> Self {
        StatQuery {
            kind: QueryKind::CategoryHistogram,
            output_dim: taxonomy.len(),
        }
    }

    pub fn most_requested(taxonomy: &[CategoryId]) -> Self {
        StatQuery {
            kind: QueryKind::MostRequestedService,
            output_dim: taxonomy.len(),
        }
    }
}

/// L1 sensitivity under add/remove adjacency. Every supported query moves
/// at most one count by one when a row is added or removed.
pub fn sensitivity(q: &StatQuery) -> Result<f64, DpError> {
    match q.kind {
        QueryKind::CountOptIn(_) if q.output_dim != 1 => Err(DpError::UnsupportedQuery(format!(
            "count query with dimension {}",
            q.output_dim
        ))),
        _ if q.output_dim == 0 => Err(DpError::UnsupportedQuery("zero-dimensional query".into())),
        _ => Ok(1.0),
    }
}

/// The exact (noise-free) answer.
pub fn answer(db: &ProfileDatabase, q: &StatQuery, taxonomy: &[CategoryId]) -> Result<Vec<f64>, DpError> {
    sensitivity(q)?;
    match &q.kind {
        QueryKind::CountOptIn(s) => {
            Ok(vec![db.rows.iter().filter(|r| r.optin_services.contains(s)).count() as f64])
        }
        QueryKind::CategoryHistogram | QueryKind::MostRequestedService => {
            if taxonomy.len() != q.output_dim {
                return Err(DpError::UnsupportedQuery(format!(
                    "histogram of dimension {} over {} categories",
                    q.output_dim,
                    taxonomy.len()
                )));
            }
            let index: BTreeMap<&CategoryId, usize> = taxonomy.iter().enumerate().map(|(i, c)| (c, i)).collect();
            let mut counts = vec![0.0; taxonomy.len()];
            for r in &db.rows {
                if let Some(i) = r.dominant_category().and_then(|c| index.get(c)) {
                    counts[*i] += 1.0;
                }
            }
            Ok(counts)
        }
    }
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

fn jaccard(a: &BTreeSet<&CategoryId>, b: &BTreeSet<&CategoryId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Greedy first-fit grouping by row order: a row joins the first group whose
/// seed (first member) has Jaccard similarity at least `threshold` with it
/// over category ids. Returns row indices per group.
pub fn group_profiles(rows: &[ProfileRow], threshold: f64) -> Result<Vec<Vec<usize>>, DpError> {
    if !(MIN_GROUP_THRESHOLD..=1.0).contains(&threshold) {
        return Err(DpError::ThresholdOutOfRange(threshold));
    }
    let sets: Vec<_> = rows.iter().map(ProfileRow::category_set).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        match groups.iter_mut().find(|g| jaccard(&sets[g[0]], set) >= threshold) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    Ok(groups)
}

/// Inverse-CDF transform of `u` in `(-1/2, 1/2)` to a Laplace(0, lambda) draw.
pub fn laplace_from_uniform(lambda: f64, u: f64) -> f64 {
    if lambda == 0.0 || u == 0.0 {
        return 0.0;
    }
    -lambda * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One Laplace(0, lambda) sample. `lambda == 0` returns 0 without drawing.
pub fn laplace_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    loop {
        let u = rng.random::<f64>() - 0.5;
        if u > -0.5 {
            return laplace_from_uniform(lambda, u);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOutput {
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub sensitivity: f64,
    pub lambda: f64,
}

fn check_epsilon(epsilon: f64) -> Result<(), DpError> {
    if epsilon > 0.0 {
        Ok(())
    } else {
        Err(DpError::NonPositiveEpsilon(epsilon))
    }
}

/// `o = c + Lap(delta / epsilon)^d`.
pub fn perturb<R: Rng + ?Sized>(c: &[f64], delta: f64, epsilon: f64, rng: &mut R) -> Result<NoisyOutput, DpError> {
    check_epsilon(epsilon)?;
    if !(delta >= 0.0) {
        return Err(DpError::NegativeSensitivity(delta));
    }
    let lambda = delta / epsilon;
    Ok(NoisyOutput {
        values: c.iter().map(|x| x + laplace_sample(lambda, rng)).collect(),
        epsilon,
        sensitivity: delta,
        lambda,
    })
}

/// `sqrt(2) * delta / epsilon`, the standard deviation of the added noise.
pub fn expected_error(delta: f64, epsilon: f64) -> Result<f64, DpError> {
    check_epsilon(epsilon)?;
    Ok(std::f64::consts::SQRT_2 * delta / epsilon)
}

/// `delta / epsilon`, the expected absolute noise.
pub fn mean_abs_error(delta: f64, epsilon: f64) -> Result<f64, DpError> {
    check_epsilon(epsilon)?;
    Ok(delta / epsilon)
}

/// Perturbs every weight with Laplace(zeta_max / epsilon), in the order
/// category, browsing, interaction weights and by id within each, then clamps
/// into `[ZETA_FLOOR, zeta_max]`. The key sets are preserved. The result
/// carries `zeta_min = 0` since noisy weights may fall below the input floor.
pub fn privatize_profile<R: Rng + ?Sized>(
    p: &InterestProfile,
    epsilon: f64,
    bounds: WeightBounds,
    rng: &mut R,
) -> Result<InterestProfile, DpError> {
    check_epsilon(epsilon)?;
    let zmax = bounds.zeta_max();
    let lambda = zmax / epsilon;
    let mut noisy = |m: &BTreeMap<CategoryId, f64>| -> BTreeMap<CategoryId, f64> {
        m.iter()
            .map(|(k, &w)| (k.clone(), (w + laplace_sample(lambda, rng)).clamp(ZETA_FLOOR, zmax)))
            .collect()
    };
    let weights = noisy(p.weights());
    let browsing = noisy(p.browsing());
    let interactions = noisy(p.interactions());
    Ok(InterestProfile::from_parts(
        weights,
        browsing,
        interactions,
        p.timestamp(),
        p.slot(),
        p.state(),
        WeightBounds::new(0.0, zmax)?,
    )?)
}

/// CSV rows `query_kind,dim,epsilon,delta,lambda,values...`.
pub fn write_noisy_csv<W: std::io::Write>(out: W, rows: &[(QueryKind, NoisyOutput)]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["query_kind", "dim", "epsilon", "delta", "lambda", "values"])?;
    for (kind, o) in rows {
        let mut rec = vec![
            kind.label(),
            o.values.len().to_string(),
            o.epsilon.to_string(),
            o.sensitivity.to_string(),
            o.lambda.to_string(),
        ];
        rec.extend(o.values.iter().map(|v| format!("{v:.9}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use statrs::distribution::{ContinuousCDF, Laplace};

    fn row(id: &str, cats: &[(&str, f64)]) -> ProfileRow {
        ProfileRow {
            temp_id: id.into(),
            interests: InterestProfile::from_weights(
                cats.iter().map(|(c, w)| (CategoryId::from(*c), *w)),
                WeightBounds::new(0.0, 1.0).unwrap(),
            )
            .unwrap(),
            optin_services: BTreeSet::new(),
        }
    }

    #[test]
    fn grouping_examples() {
        let same: Vec<_> = (0..4).map(|i| row(&i.to_string(), &[("A", 0.5), ("B", 0.2)])).collect();
        assert_eq!(group_profiles(&same, 1.0).unwrap(), vec![vec![0, 1, 2, 3]]);
        let disjoint = vec![row("a", &[("A", 0.5)]), row("b", &[("B", 0.5)])];
        assert_eq!(group_profiles(&disjoint, 0.6).unwrap(), vec![vec![0], vec![1]]);
        assert!(matches!(group_profiles(&same, 0.5), Err(DpError::ThresholdOutOfRange(_))));
        assert!(group_profiles(&same, 1.01).is_err());
    }

    #[test]
    fn grouping_six_row_fixture() {
        // r0 {A,B,C}; r1 {A,B,C,D}: J(r0,r1)=3/4; r2 {A,B}: J(r0,r2)=2/3;
        // r3 {D,E}: J(r0,r3)=0 -> new seed; r4 {D,E,F}: J(r0)=0, J(r3)=2/3;
        // r5 {A,D}: J(r0)=1/4, J(r3)=1/3 -> new seed.
        let w = 0.1;
        let rows = vec![
            row("0", &[("A", w), ("B", w), ("C", w)]),
            row("1", &[("A", w), ("B", w), ("C", w), ("D", w)]),
            row("2", &[("A", w), ("B", w)]),
            row("3", &[("D", w), ("E", w)]),
            row("4", &[("D", w), ("E", w), ("F", w)]),
            row("5", &[("A", w), ("D", w)]),
        ];
        assert_eq!(
            group_profiles(&rows, 0.6).unwrap(),
            vec![vec![0, 1, 2], vec![3, 4], vec![5]]
        );
        // at 0.7 only r1 still joins r0
        assert_eq!(
            group_profiles(&rows, 0.7).unwrap(),
            vec![vec![0, 1], vec![2], vec![3], vec![4], vec![5]]
        );
    }

    #[test]
    fn analytic_sensitivities() {
        let tax: Vec<CategoryId> = vec!["A".into(), "B".into()];
        assert_eq!(sensitivity(&StatQuery::count_optin(ServiceId(1, 1))).unwrap(), 1.0);
        assert_eq!(sensitivity(&StatQuery::histogram(&tax)).unwrap(), 1.0);
        assert_eq!(sensitivity(&StatQuery::most_requested(&tax)).unwrap(), 1.0);
        let bad = StatQuery {
            kind: QueryKind::CountOptIn(ServiceId(1, 1)),
            output_dim: 2,
        };
        assert!(matches!(sensitivity(&bad), Err(DpError::UnsupportedQuery(_))));
    }

    /// Maximum L1 distance between answers on every database of up to
    /// `max_rows` rows and each of its one-row-removed neighbours.
    fn brute_force_sensitivity(choices: &[ProfileRow], max_rows: usize, q: &StatQuery, tax: &[CategoryId]) -> f64 {
        let mut best: f64 = 0.0;
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        while let Some(db) = stack.pop() {
            if db.len() < max_rows {
                for c in 0..choices.len() {
                    let mut next = db.clone();
                    next.push(c);
                    stack.push(next);
                }
            }
            let build = |idx: &[usize]| {
                let rows = idx
                    .iter()
                    .enumerate()
                    .map(|(n, &c)| ProfileRow {
                        temp_id: n.to_string(),
                        ..choices[c].clone()
                    })
                    .collect();
                answer(&ProfileDatabase::new(rows).unwrap(), q, tax).unwrap()
            };
            let full = build(&db);
            for drop in 0..db.len() {
                let mut nb = db.clone();
                nb.remove(drop);
                let l1: f64 = full.iter().zip(build(&nb)).map(|(a, b)| (a - b).abs()).sum();
                best = best.max(l1);
            }
        }
        best
    }

    #[test]
    fn sensitivity_matches_exhaustive_neighbours_on_tiny_domain() {
        let tax: Vec<CategoryId> = vec!["A".into(), "B".into()];
        let mut a = row("x", &[("A", 0.6), ("B", 0.1)]);
        a.optin_services.insert(ServiceId(1, 1));
        let choices = vec![a, row("x", &[("B", 0.3)])];
        for q in [StatQuery::histogram(&tax), StatQuery::count_optin(ServiceId(1, 1))] {
            assert_eq!(brute_force_sensitivity(&choices, 3, &q, &tax), sensitivity(&q).unwrap());
        }
    }

    proptest! {
        #[test]
        fn histogram_sensitivity_on_random_domains(
            profiles in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 3), 1..4),
            rows in 1usize..=4,
        ) {
            let tax: Vec<CategoryId> = vec!["A".into(), "B".into(), "C".into()];
            let choices: Vec<_> = profiles.iter().map(|w| row("x", &[("A", w[0]), ("B", w[1]), ("C", w[2])])).collect();
            let q = StatQuery::histogram(&tax);
            let bf = brute_force_sensitivity(&choices, rows, &q, &tax);
            prop_assert!(bf <= sensitivity(&q).unwrap());
            prop_assert_eq!(bf, 1.0);
        }

        #[test]
        fn grouping_is_a_partition(
            sets in proptest::collection::vec(proptest::collection::btree_set(0u8..6, 0..5), 0..12),
            threshold in 0.6f64..=1.0,
        ) {
            let rows: Vec<_> = sets.iter().enumerate().map(|(i, s)| {
                let cats: Vec<(String, f64)> = s.iter().map(|c| (format!("c{c}"), 0.1)).collect();
                let refs: Vec<(&str, f64)> = cats.iter().map(|(c, w)| (c.as_str(), *w)).collect();
                row(&i.to_string(), &refs)
            }).collect();
            let groups = group_profiles(&rows, threshold).unwrap();
            let mut all: Vec<usize> = groups.concat();
            all.sort();
            prop_assert_eq!(all, (0..rows.len()).collect::<Vec<_>>());
        }

        #[test]
        fn privatize_keeps_keys_and_range(
            ws in proptest::collection::btree_map("[a-z]{1,3}", 0.01f64..0.6, 1..6),
            eps in 0.05f64..10.0,
            seed: u64,
        ) {
            let bounds = WeightBounds::new(0.0, 0.6).unwrap();
            let p = InterestProfile::from_weights(ws.iter().map(|(k, w)| (CategoryId::new(k.clone()), *w)), bounds).unwrap();
            let out = privatize_profile(&p, eps, bounds, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            prop_assert!(out.weights().keys().eq(p.weights().keys()));
            for &w in out.weights().values() {
                prop_assert!(w > 0.0 && w <= 0.6);
            }
        }
    }

    #[test]
    fn laplace_edge_cases() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert_eq!(laplace_sample(0.0, &mut rng), 0.0);
        assert_eq!(laplace_from_uniform(3.0, 0.0), 0.0);
        assert!(laplace_from_uniform(1.0, 0.25) > 0.0);
        assert!(laplace_from_uniform(1.0, -0.25) < 0.0);
    }

    #[test]
    fn laplace_moments() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| laplace_sample(1.0, &mut rng)).collect();
        let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean_abs - 1.0).abs() < 0.03, "{mean_abs}");
        assert!((sd - 2f64.sqrt()).abs() < 0.03 * 2f64.sqrt(), "{sd}");
    }

    #[test]
    fn perturb_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let c = [3.0, 1.0, 4.0];
        let out = perturb(&c, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(out.values, c);
        assert!(matches!(perturb(&c, 1.0, 0.0, &mut rng), Err(DpError::NonPositiveEpsilon(_))));

        // replay the seeded uniforms through an independent Laplace quantile
        let out = perturb(&c, 1.0, 0.5, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(out.lambda, 2.0);
        let dist = Laplace::new(0.0, 2.0).unwrap();
        let mut replay = ChaCha20Rng::seed_from_u64(9);
        for (o, ci) in out.values.iter().zip(c) {
            let u: f64 = rand::Rng::random(&mut replay);
            assert!((o - (ci + dist.inverse_cdf(u))).abs() < 1e-9);
        }
    }

    #[test]
    fn error_formulas() {
        assert!((expected_error(1.0, 1.0).unwrap() - 1.41421356).abs() < 1e-8);
        assert_eq!(expected_error(0.0, 1.0).unwrap(), 0.0);
        assert!((expected_error(2.0, 0.5).unwrap() - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_abs_error(2.0, 0.5).unwrap(), 4.0);
        assert!(expected_error(1.0, -1.0).is_err());

        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| laplace_sample(4.0, &mut rng)).collect();
        let sd = (xs.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        let want = expected_error(2.0, 0.5).unwrap();
        assert!((sd - want).abs() / want < 0.03, "{sd} vs {want}");
    }

    #[test]
    fn privatize_examples() {
        let bounds = WeightBounds::new(0.05, 0.6).unwrap();
        let p = InterestProfile::from_weights([("A".into(), 0.3), ("B".into(), 0.55)], bounds).unwrap();
        let out = privatize_profile(&p, 1e12, bounds, &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
        for (k, w) in p.weights() {
            assert!((out.weight(k).unwrap() - w).abs() < 1e-9);
        }

        let out = privatize_profile(&p, 2.0, bounds, &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        let dist = Laplace::new(0.0, 0.3).unwrap();
        let mut replay = ChaCha20Rng::seed_from_u64(5);
        for (k, w) in p.weights() {
            let u: f64 = rand::Rng::random(&mut replay);
            let want = (w + dist.inverse_cdf(u)).clamp(ZETA_FLOOR, 0.6);
            assert!((out.weight(k).unwrap() - want).abs() < 1e-12);
        }
        assert!(privatize_profile(&p, 0.0, bounds, &mut replay).is_err());
    }

    #[test]
    fn histogram_counts_dominant_category() {
        let tax: Vec<CategoryId> = vec!["A".into(), "B".into(), "C".into()];
        let db = ProfileDatabase::new(vec![
            row("1", &[("A", 0.5), ("B", 0.2)]),
            row("2", &[("A", 0.1), ("B", 0.2)]),
            row("3", &[("B", 0.3), ("C", 0.3)]),
        ])
        .unwrap();
        assert_eq!(answer(&db, &StatQuery::histogram(&tax), &tax).unwrap(), vec![1.0, 2.0, 0.0]);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), Some(1));
        assert!(ProfileDatabase::new(vec![row("1", &[("A", 0.5)]), row("1", &[("A", 0.5)])]).is_err());
    }

    #[test]
    fn csv_output() {
        let rows = vec![(
            QueryKind::CountOptIn(ServiceId(1, 2)),
            NoisyOutput {
                values: vec![3.5],
                epsilon: 1.0,
                sensitivity: 1.0,
                lambda: 1.0,
            },
        )];
        let mut buf = Vec::new();
        write_noisy_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "query_kind,dim,epsilon,delta,lambda,values\ncount_optin:1:2,1,1,1,1,3.500000000\n"
        );
    }

    #[test]
    fn temp_ids_are_128_bit_hex() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let a = fresh_temp_id(&mut rng);
        assert_eq!(a.len(), 32);
        assert_ne!(a, fresh_temp_id(&mut rng));
    }
}
