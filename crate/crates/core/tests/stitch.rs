use std::collections::HashMap;

use proptest::prelude::*;
use sdc_hawkes::{
    censor, make_ground_truth, predecessor_distribution, resolve_overlap, sample_stitched,
    similarity, simulate_many, stitch_dataset, successor_distribution, Event, EventSequence,
    GroundTruthSpec, ObservationWindow, StitchConfig, TruthKind,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn seg(id: &str, begin: f64, end: f64, times: &[f64]) -> EventSequence {
    let events = times.iter().map(|&t| Event::new(t, 0)).collect();
    EventSequence::new(id, events, vec![ObservationWindow::new(begin, end).unwrap()]).unwrap()
}

fn sdc_pool(seed: u64) -> Vec<EventSequence> {
    let window = ObservationWindow::new(0.0, 50.0).unwrap();
    let truth = make_ground_truth(&GroundTruthSpec {
        kind: TruthKind::TimeInvariant,
        n_types: 2,
        window,
        seed,
    })
    .unwrap();
    let complete = simulate_many(&truth, window, 40, seed + 1).unwrap();
    censor(&complete, 10, seed + 2).unwrap().sequences
}

#[test]
fn similarity_reference_values() {
    let cfg = StitchConfig::default();
    let a = seg("a", 0.0, 5.0, &[1.0]);
    let touching = seg("b", 5.0, 10.0, &[]);
    let gap2 = seg("c", 7.0, 12.0, &[]);
    let overlapping = seg("d", 4.0, 9.0, &[]);
    assert_eq!(similarity(&a, &touching, &cfg).unwrap(), 1.0);
    assert!((similarity(&a, &gap2, &cfg).unwrap() - 0.01831563888873418).abs() < 1e-15);
    assert_eq!(similarity(&a, &overlapping, &cfg).unwrap(), 0.0);
    assert_eq!(similarity(&touching, &a, &cfg).unwrap(), 0.0);
    let lenient = StitchConfig {
        allow_overlap: true,
        ..cfg
    };
    assert!((similarity(&a, &overlapping, &lenient).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn feature_kernel_multiplies_and_checks_dimensions() {
    let cfg = StitchConfig {
        use_features: true,
        ..StitchConfig::default()
    };
    let a = seg("a", 0.0, 5.0, &[]).with_feature(Some(vec![0.0, 1.0]));
    let b = seg("b", 5.0, 9.0, &[]).with_feature(Some(vec![1.0, 1.0]));
    assert!((similarity(&a, &b, &cfg).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    let c = seg("c", 5.0, 9.0, &[]).with_feature(Some(vec![1.0]));
    assert!(similarity(&a, &c, &cfg).is_err());
}

#[test]
fn distributions_normalize() {
    let cfg = StitchConfig::default();
    let target = seg("t", 10.0, 15.0, &[]);
    let pool = vec![
        target.clone(),
        seg("p1", 3.0, 8.0, &[]),
        seg("p2", 12.0, 17.0, &[]),
        seg("p3", 3.0, 8.0, &[]),
    ];
    let d = predecessor_distribution(&target, &pool, &cfg).unwrap();
    assert_eq!(d, vec![(1, 0.5), (3, 0.5)]);
    assert!(successor_distribution(&target, &pool, &cfg).unwrap().is_empty());
    let single = vec![target.clone(), seg("p", 0.0, 9.0, &[])];
    assert_eq!(predecessor_distribution(&target, &single, &cfg).unwrap(), vec![(1, 1.0)]);
}

#[test]
fn predecessor_frequencies_match_the_categorical() {
    let target = seg("t", 10.0, 15.0, &[11.0]);
    let pool = vec![
        target.clone(),
        seg("near", 5.0, 9.5, &[6.0]),
        seg("mid", 3.0, 9.0, &[4.0]),
        seg("far", 1.0, 8.8, &[2.0]),
    ];
    let cfg = StitchConfig {
        depth: 1,
        replicates: 100_000,
        seed: 13,
        ..StitchConfig::default()
    };
    let dist = predecessor_distribution(&target, &pool, &cfg).unwrap();
    assert_eq!(dist.len(), 3);
    let draws = sample_stitched(&target, &pool, &cfg).unwrap();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &draws {
        assert_eq!(s.segments.len(), 2);
        *counts.entry(s.segments[0].as_str()).or_default() += 1;
    }
    let n = draws.len() as f64;
    let chi2: f64 = dist
        .iter()
        .map(|&(k, p)| {
            let observed = *counts.get(pool[k].id.as_str()).unwrap_or(&0) as f64;
            (observed - n * p).powi(2) / (n * p)
        })
        .sum();
    let p = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2} p {p}");
    let total: f64 = draws.iter().map(|s| s.weight).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn chain_weight_is_product_of_similarities() {
    let pool = vec![
        seg("a", 0.0, 4.0, &[1.0]),
        seg("b", 4.5, 9.0, &[5.0]),
        seg("c", 9.0, 14.0, &[10.0]),
        seg("d", 14.5, 20.0, &[15.0, 19.0]),
    ];
    let cfg = StitchConfig {
        depth: 2,
        replicates: 3,
        ..StitchConfig::default()
    };
    let out = sample_stitched(&pool[1], &pool, &cfg).unwrap();
    for s in &out {
        assert_eq!(s.segments, vec!["a", "b", "c", "d"]);
        assert!((s.raw_weight - (-0.5f64).exp()).abs() < 1e-15);
        assert!((s.weight - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.sequence.len(), 5);
        assert_eq!(s.sequence.windows().len(), 4);
    }
}

#[test]
fn zero_depth_and_empty_pool_give_copies() {
    let target = seg("t", 10.0, 15.0, &[12.0]);
    let pool = [target.clone(), seg("p", 0.0, 10.0, &[1.0])];
    for (pool, depth) in [(&pool[..], 0), (&pool[..1], 2), (&[][..], 2)] {
        let cfg = StitchConfig {
            depth,
            ..StitchConfig::default()
        };
        let out = sample_stitched(&target, pool, &cfg).unwrap();
        assert_eq!(out.len(), 5);
        for s in out {
            assert_eq!(s.sequence.events(), target.events());
            assert_eq!(s.sequence.windows(), target.windows());
            assert!((s.weight - 0.2).abs() < 1e-15);
        }
    }
}

#[test]
fn overlap_resolution_is_a_fair_coin() {
    let pred = seg("p", 0.0, 6.0, &[1.0, 5.5]);
    let succ = seg("s", 4.0, 10.0, &[4.5, 8.0]);
    let mut keep_pred = 0;
    for seed in 0..10_000 {
        let (p, s) = resolve_overlap(&pred, &succ, seed).unwrap();
        assert!(p.end() <= s.begin());
        if s.begin() == 6.0 {
            keep_pred += 1;
            assert_eq!(p, pred);
            assert_eq!(s.events(), &[Event::new(8.0, 0)]);
        } else {
            assert_eq!(p.end(), 4.0);
            assert_eq!(p.events(), &[Event::new(1.0, 0)]);
            assert_eq!(s, succ);
        }
    }
    let freq = keep_pred as f64 / 10_000.0;
    assert!((freq - 0.5).abs() <= 0.02, "{freq}");
}

#[test]
fn overlap_edge_cases() {
    let pred = seg("p", 0.0, 6.0, &[1.0]);
    let disjoint = seg("s", 7.0, 9.0, &[8.0]);
    assert_eq!(
        resolve_overlap(&pred, &disjoint, 0).unwrap(),
        (pred.clone(), disjoint.clone())
    );
    let nested = seg("n", 2.0, 5.0, &[3.0]);
    assert!(resolve_overlap(&pred, &nested, 0).is_none());
    let quiet = seg("q", 4.0, 10.0, &[8.0]);
    for seed in 0..20 {
        let (p, s) = resolve_overlap(&pred, &quiet, seed).unwrap();
        assert_eq!(p.events(), pred.events());
        assert_eq!(s.events(), quiet.events());
    }
}

#[test]
fn overlapping_stitches_stay_valid() {
    let cfg = StitchConfig {
        allow_overlap: true,
        seed: 4,
        ..StitchConfig::default()
    };
    let pool = sdc_pool(3);
    let data = stitch_dataset(&pool, &cfg).unwrap();
    for s in &data.sequences {
        s.validate().unwrap();
    }
}

#[test]
fn dataset_weights_per_origin_sum_to_one() {
    let pool = sdc_pool(5);
    let data = stitch_dataset(&pool, &StitchConfig::default()).unwrap();
    assert_eq!(data.len(), 5 * pool.len());
    let mut sums = vec![0.0; pool.len()];
    for (&o, &w) in data.origins.iter().zip(&data.weights) {
        sums[o] += w;
    }
    assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-12));
    for (s, o) in data.sequences.iter().zip(&data.origins) {
        s.validate().unwrap();
        assert_eq!(s.origin.as_deref(), Some(pool[*o].id.as_str()));
        assert!(s.events().windows(2).all(|w| w[0].time <= w[1].time));
    }
}

#[test]
fn raw_weights_recompute_from_segments() {
    let pool = sdc_pool(6);
    let cfg = StitchConfig::default();
    let data = stitch_dataset(&pool, &cfg).unwrap();
    let by_id: HashMap<&str, &EventSequence> = pool.iter().map(|s| (s.id.as_str(), s)).collect();
    for (segs, raw) in data.segments.iter().zip(&data.raw_weights) {
        let w: f64 = segs
            .windows(2)
            .map(|p| similarity(by_id[p[0].as_str()], by_id[p[1].as_str()], &cfg).unwrap())
            .product();
        assert!((w - raw).abs() <= 1e-12 * raw.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stitching_is_deterministic_and_ignores_unused_features(seed in any::<u64>()) {
        let pool = sdc_pool(seed % 1000);
        let cfg = StitchConfig { seed, ..StitchConfig::default() };
        let a = stitch_dataset(&pool, &cfg).unwrap();
        prop_assert_eq!(&a, &stitch_dataset(&pool, &cfg).unwrap());
        let featured: Vec<_> = pool
            .iter()
            .enumerate()
            .map(|(i, s)| s.clone().with_feature(Some(vec![i as f64])))
            .collect();
        let b = stitch_dataset(&featured, &cfg).unwrap();
        prop_assert_eq!(a.weights, b.weights);
        prop_assert_eq!(a.segments, b.segments);
    }
}
