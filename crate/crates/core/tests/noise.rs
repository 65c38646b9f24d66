use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use una_core::noise::{
    bogus_size, inject, inject_bogus, inject_categorization, inject_localization, inject_missing, inject_una,
    make_bogus_box, perturb_box, select_targets, target_count, SizePool,
};
use una_core::rng::{stream, Purpose};
use una_core::{
    AnnotationId, BogusSizePolicy, BoundingBox, CategoryId, Dataset, NoiseConfig, NoiseError, NoiseKind,
    NoiseType,
};
use una_testkit::fixtures::{ann, category, image, micro_dataset, synthetic_dataset};

/// Mean IoU between a box and its perturbation for `[100, 100, 50, 50]` in a
/// 640x480 image at delta 0.4, from a 2e7-draw NumPy simulation of the
/// center-shift / size-scale formula.
const LOC_MEAN_IOU_BAND_CENTER: f64 = 0.4478;
const LOC_MEAN_IOU_TOLERANCE: f64 = 0.02;

fn one_category_dataset(n: u64, n_categories: u64, cat: u64) -> Dataset {
    Dataset::new(
        vec![image(1, 640, 480)],
        (1..=n).map(|i| ann(i, 1, cat, [10.0, 10.0, 20.0, 20.0])).collect(),
        (1..=n_categories).map(category).collect(),
    )
    .unwrap()
}

#[test]
fn select_targets_exact_count_and_determinism() {
    let ds = synthetic_dataset(100, 5, 3, 1);
    let a = select_targets(&ds, 0.2, 42, NoiseKind::Missing);
    assert_eq!(a.len(), 20);
    assert_eq!(a, select_targets(&ds, 0.2, 42, NoiseKind::Missing));
    assert_ne!(a, select_targets(&ds, 0.2, 42, NoiseKind::Categorization));
    assert_ne!(a, select_targets(&ds, 0.2, 43, NoiseKind::Missing));
    assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 20);

    let seven = synthetic_dataset(7, 2, 3, 1);
    assert_eq!(select_targets(&seven, 0.2, 0, NoiseKind::Bogus).len(), 1);
}

#[test]
fn select_targets_ignores_record_order() {
    let ds = synthetic_dataset(300, 10, 4, 3);
    let (images, mut anns, cats) = ds.clone().into_parts();
    anns.reverse();
    let shuffled = Dataset::new(images.into_iter().rev().collect(), anns, cats).unwrap();
    assert_eq!(
        select_targets(&ds, 0.3, 5, NoiseKind::Localization),
        select_targets(&shuffled, 0.3, 5, NoiseKind::Localization)
    );
}

#[test]
fn crowd_annotations_are_never_selected() {
    let mut anns: Vec<_> = (1..=20).map(|i| ann(i, 1, 1, [0.0, 0.0, 5.0, 5.0])).collect();
    for a in anns.iter_mut().take(10) {
        a.iscrowd = true;
    }
    let ds = Dataset::new(vec![image(1, 50, 50)], anns, vec![category(1), category(2)]).unwrap();
    let picked = select_targets(&ds, 1.0, 0, NoiseKind::Categorization);
    assert_eq!(picked.len(), 10);
    assert!(picked.iter().all(|id| !ds.annotation(*id).unwrap().iscrowd));

    let (out, _) = inject_una(&ds, 1.0, 0.4, 0, BogusSizePolicy::SampleExisting).unwrap();
    for crowd in ds.annotations().iter().filter(|a| a.iscrowd) {
        assert_eq!(out.annotation(crowd.id), Some(crowd));
    }
    assert_eq!(out.annotations().len(), ds.annotations().len());
}

#[test]
fn zero_ratio_is_identity_for_every_type() {
    let ds = synthetic_dataset(50, 4, 3, 9);
    for t in NoiseType::ALL {
        let (out, log) = inject(&ds, &NoiseConfig::new(t, 0.0, 1)).unwrap();
        assert_eq!(out, ds, "{t}");
        assert!(log.is_empty(), "{t}");
    }
}

#[test]
fn categorization_two_classes_flips_everything() {
    let ds = Dataset::new(
        vec![image(1, 100, 100)],
        vec![
            ann(1, 1, 1, [0.0, 0.0, 5.0, 5.0]),
            ann(2, 1, 2, [0.0, 0.0, 5.0, 5.0]),
            ann(3, 1, 1, [1.0, 1.0, 5.0, 5.0]),
        ],
        vec![category(1), category(2)],
    )
    .unwrap();
    let (out, log) = inject_categorization(&ds, 1.0, 3).unwrap();
    for (before, after) in ds.annotations().iter().zip(out.annotations()) {
        assert_ne!(before.category_id, after.category_id);
        assert_eq!(before.bbox, after.bbox);
        let entry = log.entry(before.id).unwrap();
        assert_eq!(entry.original_category, Some(before.category_id));
        assert_eq!(entry.kinds(), vec![NoiseKind::Categorization]);
    }
}

#[test]
fn categorization_needs_two_categories() {
    let ds = one_category_dataset(5, 1, 1);
    assert_eq!(inject_categorization(&ds, 0.2, 0).unwrap_err(), NoiseError::TooFewCategories(1));
    assert_eq!(
        inject_una(&ds, 0.2, 0.4, 0, BogusSizePolicy::SampleExisting).unwrap_err(),
        NoiseError::TooFewCategories(1)
    );
}

/// Pools flips of category 40 (of 80) over many seeds and checks the
/// replacement is uniform over the other 79 with a chi-square test.
#[test]
fn categorization_replacement_is_uniform() {
    let ds = one_category_dataset(1000, 80, 40);
    let mut counts: BTreeMap<CategoryId, u64> = BTreeMap::new();
    for seed in 0..50 {
        let (out, log) = inject_categorization(&ds, 0.2, seed).unwrap();
        assert_eq!(log.count(NoiseKind::Categorization), 200);
        let changed = out.annotations().iter().filter(|a| a.category_id != CategoryId(40));
        assert_eq!(changed.clone().count(), 200);
        for a in changed {
            *counts.entry(a.category_id).or_default() += 1;
        }
    }
    assert!(!counts.contains_key(&CategoryId(40)));
    assert_eq!(counts.len(), 79);
    let total: u64 = counts.values().sum();
    let expected = total as f64 / 79.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(78.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
}

/// Independent simulation of the localization formula with a different RNG.
fn simulated_mean_iou(b: BoundingBox, width: f64, height: f64, delta: f64, draws: usize) -> f64 {
    let mut rng = StdRng::seed_from_u64(0xfeed);
    let mut total = 0.0;
    for _ in 0..draws {
        let mut u = || rng.random_range(-1.0..=1.0);
        let (cx, cy) = (b.x + b.w / 2.0 + u() * delta * b.w, b.y + b.h / 2.0 + u() * delta * b.h);
        let (w, h) = (b.w * (1.0 + u() * delta), b.h * (1.0 + u() * delta));
        let x1 = (cx - w / 2.0).clamp(0.0, width);
        let x2 = (cx + w / 2.0).clamp(0.0, width);
        let y1 = (cy - h / 2.0).clamp(0.0, height);
        let y2 = (cy + h / 2.0).clamp(0.0, height);
        let iw = ((b.x + b.w).min(x2) - b.x.max(x1)).max(0.0);
        let ih = ((b.y + b.h).min(y2) - b.y.max(y1)).max(0.0);
        let inter = iw * ih;
        total += inter / (b.w * b.h + (x2 - x1) * (y2 - y1) - inter);
    }
    total / draws as f64
}

#[test]
fn localization_mean_iou_matches_monte_carlo_band() {
    let b = BoundingBox::new(100.0, 100.0, 50.0, 50.0);
    let img = image(1, 640, 480);

    let reference = simulated_mean_iou(b, 640.0, 480.0, 0.4, 200_000);
    assert!((reference - LOC_MEAN_IOU_BAND_CENTER).abs() < 0.005, "oracle drifted: {reference}");

    let draws = 10_000u64;
    let mean = (0..draws)
        .map(|i| {
            let p = perturb_box(&b, &img, 0.4, &mut stream(2024, Purpose::BoxPerturb, i));
            assert!(p.is_within(640.0, 480.0));
            b.iou(&p)
        })
        .sum::<f64>()
        / draws as f64;
    assert!((mean - LOC_MEAN_IOU_BAND_CENTER).abs() <= LOC_MEAN_IOU_TOLERANCE, "mean IoU {mean}");
}

#[test]
fn localization_small_delta_converges_to_identity() {
    let b = BoundingBox::new(100.0, 100.0, 50.0, 50.0);
    let img = image(1, 640, 480);
    let mut previous = f64::INFINITY;
    for delta in [0.4, 0.1, 0.01, 0.001] {
        let worst = (0..200)
            .map(|i| {
                let p = perturb_box(&b, &img, delta, &mut stream(1, Purpose::BoxPerturb, i));
                (p.x - b.x).abs().max((p.w - b.w).abs()).max((p.y - b.y).abs()).max((p.h - b.h).abs())
            })
            .fold(0.0, f64::max);
        assert!(worst <= 50.0 * delta * 1.5 + 1e-12);
        assert!(worst < previous);
        previous = worst;
    }
}

#[test]
fn localization_hits_all_targets_within_bounds() {
    let ds = Dataset::new(
        vec![image(1, 64, 48), image(2, 30, 30)],
        vec![
            ann(1, 1, 1, [0.0, 0.0, 64.0, 48.0]),
            ann(2, 2, 1, [28.0, 28.0, 2.0, 2.0]),
            ann(3, 1, 2, [10.0, 5.0, 20.0, 8.0]),
        ],
        vec![category(1), category(2)],
    )
    .unwrap();
    let (out, log) = inject_localization(&ds, 1.0, 0.4, 11).unwrap();
    assert_eq!(log.count(NoiseKind::Localization), 3);
    for (before, after) in ds.annotations().iter().zip(out.annotations()) {
        let (w, h) = out.image(after.image_id).unwrap().size();
        assert_ne!(before.bbox, after.bbox);
        assert!(after.bbox.is_within(w, h));
        assert_eq!(after.area, after.bbox.area());
        assert_eq!(before.category_id, after.category_id);
        assert_eq!(log.entry(before.id).unwrap().original_bbox, Some(before.bbox));
    }
}

#[test]
fn localization_targets_match_sampling_primitive() {
    let ds = synthetic_dataset(1000, 20, 5, 4);
    let (out, log) = inject_localization(&ds, 0.2, 0.4, 77).unwrap();
    let changed: Vec<AnnotationId> =
        ds.annotations().iter().zip(out.annotations()).filter(|(a, b)| a != b).map(|(a, _)| a.id).collect();
    assert_eq!(changed.len(), 200);
    assert_eq!(changed, select_targets(&ds, 0.2, 77, NoiseKind::Localization));
    assert_eq!(log.corrupted.iter().map(|e| e.id).collect::<Vec<_>>(), changed);
}

#[test]
fn missing_counts() {
    let ds = synthetic_dataset(10, 3, 2, 5);
    let (out, log) = inject_missing(&ds, 0.5, 1).unwrap();
    assert_eq!(out.annotations().len(), 5);
    assert_eq!(log.removed.len(), 5);
    for a in out.annotations() {
        assert_eq!(ds.annotation(a.id), Some(a));
    }

    let (empty, _) = inject_missing(&ds, 1.0, 1).unwrap();
    assert!(empty.annotations().is_empty());
    assert_eq!(empty.images(), ds.images());
    assert_eq!(empty.categories(), ds.categories());
}

#[test]
fn bogus_counts_and_seeds() {
    let ds = synthetic_dataset(100, 10, 4, 6);
    let (a, log_a) = inject_bogus(&ds, 0.2, 1, BogusSizePolicy::SampleExisting).unwrap();
    let (b, log_b) = inject_bogus(&ds, 0.2, 2, BogusSizePolicy::SampleExisting).unwrap();
    assert_eq!(a.annotations().len(), 120);
    assert_eq!(b.annotations().len(), 120);
    assert_eq!(log_a.added, log_b.added);
    assert_ne!(a, b);
    for id in &log_a.added {
        assert!(ds.annotation(*id).is_none());
        let added = a.annotation(*id).unwrap();
        let (w, h) = a.image(added.image_id).unwrap().size();
        assert!(added.bbox.is_within(w, h));
        assert!(!added.iscrowd);
    }
    assert_eq!(&a.annotations()[..100], ds.annotations());
}

#[test]
fn bogus_sample_existing_copies_the_only_size() {
    let ds = Dataset::new(
        vec![image(1, 4000, 4000), image(2, 4000, 4000)],
        vec![ann(1, 1, 1, [10.0, 10.0, 50.0, 60.0])],
        vec![category(1), category(2)],
    )
    .unwrap();
    let pool = SizePool::from_dataset(&ds);
    for draw in 0..2000 {
        let mut rng = stream(3, Purpose::BogusBox, draw);
        let img = &ds.images()[(draw % 2) as usize];
        assert_eq!(bogus_size(img, &pool, BogusSizePolicy::SampleExisting, &mut rng), (50.0, 60.0));

        let mut rng = stream(3, Purpose::BogusBox, draw);
        let a = make_bogus_box(
            img,
            &pool,
            ds.categories(),
            BogusSizePolicy::SampleExisting,
            AnnotationId(9),
            &mut rng,
        );
        let b = a.bbox;
        let touches_border = b.x == 0.0 || b.y == 0.0 || b.x + b.w == 4000.0 || b.y + b.h == 4000.0;
        assert!(touches_border || (b.w == 50.0 && b.h == 60.0), "{b:?}");
    }
}

/// One-sample Kolmogorov-Smirnov statistic against U(lo, hi).
fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn bogus_uniform_fraction_width_is_uniform() {
    let img = image(1, 640, 480);
    let pool = SizePool::default();
    let fractions: Vec<f64> = (0..10_000)
        .map(|i| {
            let mut rng = stream(99, Purpose::BogusBox, i);
            bogus_size(&img, &pool, BogusSizePolicy::UniformFraction, &mut rng).0 / 640.0
        })
        .collect();
    assert!(fractions.iter().all(|f| (0.05..=0.5).contains(f)));
    let d = ks_uniform(fractions, 0.05, 0.5);
    // asymptotic critical value at alpha = 0.01
    let critical = 1.628 / (10_000f64).sqrt();
    assert!(d < critical, "KS D = {d}");
}

#[test]
fn una_counts_and_overlap() {
    let ds = synthetic_dataset(1000, 50, 10, 8);
    let mut overlaps = Vec::new();
    for seed in 0..100 {
        let (out, log) = inject_una(&ds, 0.2, 0.4, seed, BogusSizePolicy::SampleExisting).unwrap();
        assert_eq!(out.annotations().len(), 1000);
        for kind in NoiseKind::ALL {
            assert_eq!(log.count(kind), 200, "{kind}");
        }
        overlaps.push(log.corrupted.iter().filter(|e| e.kinds().len() == 2).count() as f64);
    }
    // independent draws: E|cat ∩ loc| = 200 * 200 / 1000
    let mean = overlaps.iter().sum::<f64>() / overlaps.len() as f64;
    assert!((mean - 40.0).abs() < 2.0, "mean overlap {mean}");
}

#[test]
fn una_removal_overrides_corruption() {
    let ds = synthetic_dataset(200, 10, 5, 10);
    let (out, log) = inject_una(&ds, 0.4, 0.4, 3, BogusSizePolicy::UniformFraction).unwrap();
    let removed: BTreeSet<_> = log.removed.iter().copied().collect();
    let overridden = log.corrupted.iter().filter(|e| removed.contains(&e.id)).count();
    assert!(overridden > 0);
    for id in &removed {
        assert!(out.annotation(*id).is_none());
    }
    for e in &log.corrupted {
        if let Some(a) = out.annotation(e.id) {
            if let Some(c) = e.new_category {
                assert_eq!(a.category_id, c);
            }
            if let Some(b) = e.new_bbox {
                assert_eq!(a.bbox, b);
            }
        }
    }
}

#[test]
fn config_round_trip_through_dispatcher() {
    let ds = synthetic_dataset(100, 5, 3, 2);
    let config = NoiseConfig::new(NoiseType::Una, 0.1, 5)
        .with_loc_delta(0.25)
        .with_bogus_size_policy(BogusSizePolicy::UniformFraction);
    let (a, log) = inject(&ds, &config).unwrap();
    let (b, _) = inject_una(&ds, 0.1, 0.25, 5, BogusSizePolicy::UniformFraction).unwrap();
    assert_eq!(a, b);
    assert_eq!(log.config, config);
    assert_eq!(log.target_count, 10);
    assert_eq!(log.pool_size, 100);
    assert!(inject(&ds, &NoiseConfig::new(NoiseType::Una, 1.5, 5)).is_err());
}

/// Checks every documented post-condition of one injection.
fn check_injection(ds: &Dataset, config: &NoiseConfig) -> Result<(), TestCaseError> {
    let (out, log) = inject(ds, config).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let (images, anns, cats) = out.clone().into_parts();
    prop_assert!(Dataset::new(images, anns, cats).is_ok());

    let pool = ds.non_crowd().count();
    let k = target_count(config.ratio, pool);
    let expect = |kind: NoiseKind| match (config.noise_type, kind) {
        (NoiseType::Una, _) => k,
        (NoiseType::Categorization, NoiseKind::Categorization)
        | (NoiseType::Localization, NoiseKind::Localization)
        | (NoiseType::Missing, NoiseKind::Missing)
        | (NoiseType::Bogus, NoiseKind::Bogus) => k,
        _ => 0,
    };
    for kind in NoiseKind::ALL {
        prop_assert_eq!(log.count(kind), expect(kind), "{}", kind);
    }

    let removed: BTreeSet<_> = log.removed.iter().copied().collect();
    for before in ds.annotations() {
        let after = out.annotation(before.id);
        match log.entry(before.id) {
            None if removed.contains(&before.id) => prop_assert!(after.is_none()),
            None => prop_assert_eq!(after, Some(before)),
            Some(e) => {
                if let (Some(old), Some(new)) = (e.original_category, e.new_category) {
                    prop_assert_ne!(old, new);
                }
                if let Some(new) = e.new_bbox {
                    let (w, h) = ds.image(before.image_id).unwrap().size();
                    prop_assert!(new.is_within(w, h));
                    let o = before.bbox.iou(&new);
                    prop_assert!(o > 0.0 && o < 1.0, "iou {}", o);
                }
            }
        }
    }
    for id in &log.added {
        let a = out.annotation(*id).unwrap();
        let (w, h) = out.image(a.image_id).unwrap().size();
        prop_assert!(a.bbox.is_within(w, h));
        prop_assert!(a.bbox.w >= 1.0 && a.bbox.h >= 1.0);
    }
    if config.noise_type == NoiseType::Una {
        prop_assert_eq!(out.annotations().len(), ds.annotations().len());
    }
    let (again, again_log) = inject(ds, config).unwrap();
    prop_assert_eq!(again, out);
    prop_assert_eq!(again_log, log);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn injection_postconditions(
        ds_seed in any::<u64>(),
        seed in any::<u64>(),
        ratio in prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64],
        delta in 0.05..0.95f64,
        type_index in 0..5usize,
        uniform in any::<bool>(),
    ) {
        let ds = micro_dataset(ds_seed);
        let policy = if uniform { BogusSizePolicy::UniformFraction } else { BogusSizePolicy::SampleExisting };
        let config = NoiseConfig::new(NoiseType::ALL[type_index], ratio, seed)
            .with_loc_delta(delta)
            .with_bogus_size_policy(policy);
        check_injection(&ds, &config)?;
    }
}
