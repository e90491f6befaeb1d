use std::collections::BTreeSet;

use dualring_core::dp::{laplace_sample, perturb};
use dualring_core::entropy::{privacy_loss, AttributeDistribution};
use dualring_core::ids::{CategoryId, ServiceId};
use dualring_core::matcher::{select_services, CatalogEntry, InterestCorpus};
use dualring_core::pir::{
    decode_recursive, encode_query_recursive, server_compute_levels, DatabaseMatrix, GaloisField, PirParams,
    QueryShape,
};
use dualring_core::profile::{detect_state, InterestProfile, WeightBounds};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn pir_case() -> impl Strategy<Value = (usize, usize, u32, usize, usize, usize, u64)> {
    (1usize..=64, 1usize..=64, prop::sample::select(vec![8u32, 10, 16, 20]), 3usize..=6, any::<u64>())
        .prop_flat_map(|(n, rs, w, l, seed)| (Just(n), Just(rs), Just(w), Just(l), 1..=l - 2, 1usize..=3, Just(seed)))
        .prop_filter("decodable", |(_, _, _, l, t, d, _)| d * t + 1 <= *l)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn any_quorum_of_replies_recovers_the_record((n, rs, w, l, t, d, seed) in pir_case()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let db = DatabaseMatrix::from_fn(n, rs, w, |_, buf| rng.fill_bytes(buf)).unwrap();
        let params = PirParams::new(l, t, w, d).unwrap();
        let shape = QueryShape::recursive(n, db.row_words(), d).unwrap();
        let beta = rng.random_range(0..n);
        let shares = encode_query_recursive(beta, &shape, &params, &mut rng).unwrap();
        let mut replies: Vec<_> = shares.iter().map(|s| server_compute_levels(s, &shape, &db).unwrap()).collect();
        replies.shuffle(&mut rng);
        replies.truncate(d * t + 1);
        prop_assert_eq!(decode_recursive(&replies, &params, d, rs).unwrap(), db.record(beta));
    }

    #[test]
    fn selection_ignores_weight_scale(ws in proptest::collection::vec(0.05f64..0.3, 3), k in 0.5f64..2.0) {
        let b = WeightBounds::new(0.01, 0.6).unwrap();
        let names = ["sport", "music", "travel"];
        let corpus = InterestCorpus::from_pairs(
            names.iter().map(|n| (*n, vec![n.to_string(), format!("{n}x"), "common".to_string()])),
        ).unwrap();
        let catalog: Vec<CatalogEntry> = (0..9)
            .map(|i| CatalogEntry {
                index: i,
                service_id: ServiceId(i as u32, 0),
                keywords: BTreeSet::from([names[i % 3].to_string(), if i % 2 == 0 { "common".into() } else { format!("{}x", names[(i + 1) % 3]) }]),
            })
            .collect();
        let p = InterestProfile::from_weights(names.iter().zip(&ws).map(|(n, w)| (CategoryId::from(*n), *w)), b).unwrap();
        let q = InterestProfile::from_weights(names.iter().zip(&ws).map(|(n, w)| (CategoryId::from(*n), w * k)), b).unwrap();
        prop_assert_eq!(select_services(&p, &catalog, &corpus, 4).unwrap(), select_services(&q, &catalog, &corpus, 4).unwrap());
    }

    #[test]
    fn loss_plus_entropy_is_the_maximum(raw in proptest::collection::vec(0.001f64..1.0, 1..16)) {
        let s: f64 = raw.iter().sum();
        let d = AttributeDistribution::unlabelled(raw.iter().map(|x| x / s).collect()).unwrap();
        let st = privacy_loss(&d, 0);
        prop_assert!((st.loss + st.h - st.h_max).abs() <= 1e-12);
        prop_assert!(st.loss >= -1e-12);
    }

    #[test]
    fn state_ignores_insertion_order(seed in any::<u64>(), steps in 2usize..6) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let b = WeightBounds::new(0.05, 0.6).unwrap();
        let keys = ["a", "b", "c", "d"];
        let mut fwd = Vec::new();
        let mut rev = Vec::new();
        for _ in 0..steps {
            let ws: Vec<(CategoryId, f64)> = keys.iter().map(|k| (CategoryId::from(*k), rng.random_range(0.05..0.6))).collect();
            fwd.push(InterestProfile::from_weights(ws.clone(), b).unwrap());
            rev.push(InterestProfile::from_weights(ws.into_iter().rev(), b).unwrap());
        }
        prop_assert_eq!(detect_state(&fwd, 1e-3, 2), detect_state(&rev, 1e-3, 2));
    }
}

#[test]
fn field_laws_hold_exhaustively_on_gf256() {
    let f = GaloisField::get(8).unwrap();
    for a in 0..256 {
        if a != 0 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
        for b in 0..256 {
            assert_eq!(f.mul(a, b), f.mul(b, a));
            assert_eq!(f.add(a, b), f.add(b, a));
            for c in 0..256 {
                assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            }
        }
    }
}

#[test]
fn field_laws_hold_on_samples_of_wide_fields() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for bits in [10, 16, 20] {
        let f = GaloisField::get(bits).unwrap();
        for _ in 0..20_000 {
            let [a, b, c] = [0; 3].map(|_| rng.random_range(0..f.order()));
            assert_eq!(f.mul(a, b), f.mul(b, a));
            assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a)), 1);
            }
        }
    }
}

#[test]
fn perturbation_residuals_are_laplace() {
    const N: usize = 100_000;
    let lambda = 2.0;
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let c = [3.0, -1.0, 10.0, 0.0];
    let mut residuals = Vec::with_capacity(N);
    while residuals.len() < N {
        let o = perturb(&c, 1.0, 1.0 / lambda, &mut rng).unwrap();
        residuals.extend(o.values.iter().zip(&c).map(|(o, c)| o - c));
    }
    residuals.truncate(N);
    residuals.sort_by(f64::total_cmp);
    let cdf = |x: f64| if x < 0.0 { 0.5 * (x / lambda).exp() } else { 1.0 - 0.5 * (-x / lambda).exp() };
    let n = N as f64;
    let ks = residuals
        .iter()
        .enumerate()
        .map(|(i, &x)| (cdf(x) - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf(x)).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 1.628 / n.sqrt(), "KS {ks}");
    // zero scale adds nothing
    assert_eq!(laplace_sample(0.0, &mut rng), 0.0);
}
