//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p una --test acceptance`.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use una::coco::serialize_dataset;
use una::diff::{diff, reconcile};
use una::log_file::log_path;
use una_core::metrics::evaluate;
use una_core::noise::{inject, perturb_box, target_count};
use una_core::rng::{stream, Purpose};
use una_core::tide::{classify_errors, tide_report, DetectionLabel, ErrorKind};
use una_core::{AnnotationId, BoundingBox, Dataset, NoiseConfig, NoiseKind, NoiseType};
use una_testkit::fixtures::{
    ann, category, det, image, micro_dataset, micro_instance, perfect_detections, synthetic_dataset,
    synthetic_detections,
};
use una_testkit::oracle::reference_evaluate;

/// Mean IoU between a box and its localization-noised copy for the
/// `[100, 100, 50, 50]` box in a 640x480 image at delta 0.4, from a 2e7-draw
/// simulation of the perturbation formula made before this code existed.
const LOC_MEAN_IOU_BAND_CENTER: f64 = 0.4478;
const LOC_MEAN_IOU_TOLERANCE: f64 = 0.02;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, elapsed: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < limit, || format!("{what} took {elapsed:.2?}, limit {limit:?}"))
}

/// Annotations actually touched, measured from the datasets themselves.
fn observed_counts(clean: &Dataset, noisy: &Dataset) -> [usize; 4] {
    let d = diff(clean, noisy);
    [d.category_changes(), d.bbox_changes(), d.removed.len(), d.added.len()]
}

fn expected_counts(noise_type: NoiseType, k: usize) -> [usize; 4] {
    match noise_type {
        NoiseType::Categorization => [k, 0, 0, 0],
        NoiseType::Localization => [0, k, 0, 0],
        NoiseType::Missing => [0, 0, k, 0],
        NoiseType::Bogus => [0, 0, 0, k],
        NoiseType::Una => [k; 4],
    }
}

fn exact_counts() -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    for n in [7usize, 100, 1000] {
        let ds = synthetic_dataset(n, (n / 8).max(2), 10, n as u64);
        for ratio in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let k = target_count(ratio, n);
            ensure(k == ((ratio * n as f64) + 0.5).floor() as usize, || {
                format!("round({ratio} * {n}) = {k}")
            })?;
            for seed in 0..100 {
                for noise_type in NoiseType::ALL {
                    let (noisy, log) =
                        inject(&ds, &NoiseConfig::new(noise_type, ratio, seed)).map_err(|e| e.to_string())?;
                    let logged = NoiseKind::ALL.map(|kind| log.count(kind));
                    let want = expected_counts(noise_type, k);
                    ensure(logged == want, || {
                        format!("{noise_type} N={n} r={ratio} seed={seed}: log {logged:?}, want {want:?}")
                    })?;
                    if noise_type == NoiseType::Una {
                        ensure(noisy.annotations().len() == n, || {
                            format!(
                                "UNA N={n} r={ratio} seed={seed}: {} annotations out",
                                noisy.annotations().len()
                            )
                        })?;
                    } else {
                        let seen = observed_counts(&ds, &noisy);
                        ensure(seen == want, || {
                            format!("{noise_type} N={n} r={ratio} seed={seed}: dataset shows {seen:?}, want {want:?}")
                        })?;
                    }
                    runs += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    within(Duration::from_secs(10), elapsed, "count sweep")?;
    Ok(format!("{runs} injections, all exact, {elapsed:.2?}"))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clean = dir.path().join("clean.json");
    fs::write(&clean, serialize_dataset(&synthetic_dataset(5000, 400, 20, 77))).map_err(|e| e.to_string())?;

    let run = |name: &str, noise_type: &str, threads: Option<&str>| -> Result<(Vec<u8>, Vec<u8>), String> {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_una"));
        cmd.args([
            "inject",
            "--ann",
            path(&clean),
            "--out",
            path(&out),
            "--type",
            noise_type,
            "--ratio",
            "0.2",
            "--seed",
            "123",
        ]);
        if let Some(n) = threads {
            cmd.args(["--threads", n]);
        }
        let o = cmd.env_remove("UNA_SEED").output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
        Ok((fs::read(&out).map_err(|e| e.to_string())?, fs::read(log_path(&out)).map_err(|e| e.to_string())?))
    };

    for noise_type in ["categorization", "localization", "missing", "bogus", "una"] {
        let first = run(&format!("{noise_type}-a.json"), noise_type, None)?;
        let second = run(&format!("{noise_type}-b.json"), noise_type, None)?;
        let one = run(&format!("{noise_type}-t1.json"), noise_type, Some("1"))?;
        let eight = run(&format!("{noise_type}-t8.json"), noise_type, Some("8"))?;
        ensure(first == second, || format!("{noise_type}: two runs differ"))?;
        ensure(first == one, || format!("{noise_type}: --threads 1 differs"))?;
        ensure(first == eight, || format!("{noise_type}: --threads 8 differs"))?;
    }
    Ok("5 noise types x (2 runs, --threads 1, --threads 8), dataset and log byte-identical".into())
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn validity() -> Outcome {
    let mut checked = 0;
    for seed in 0..1000u64 {
        let ds = micro_dataset(seed);
        let ratio = [0.05, 0.2, 0.5, 1.0][(seed % 4) as usize];
        for noise_type in NoiseType::ALL {
            let (noisy, log) = inject(&ds, &NoiseConfig::new(noise_type, ratio, seed))
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let (images, annotations, categories) = noisy.clone().into_parts();
            Dataset::new(images, annotations, categories)
                .map_err(|e| format!("seed {seed} {noise_type}: {e}"))?;

            let written = log
                .corrupted
                .iter()
                .filter(|e| e.original_bbox.is_some())
                .map(|e| e.id)
                .chain(log.added.iter().copied());
            for id in written {
                let Some(a) = noisy.annotation(id) else { continue };
                let img = noisy.image(a.image_id).expect("validated");
                let (w, h) = img.size();
                ensure(a.bbox.is_within(w, h) && a.bbox.w > 0.0 && a.bbox.h > 0.0, || {
                    format!("seed {seed} {noise_type}: box {:?} of {id} outside {w}x{h}", a.bbox)
                })?;
            }
            for e in &log.corrupted {
                if let (Some(old), Some(new)) = (e.original_category, e.new_category) {
                    ensure(old != new, || {
                        format!("seed {seed} {noise_type}: category flip of {} is a no-op", e.id)
                    })?;
                    if let Some(a) = noisy.annotation(e.id) {
                        ensure(a.category_id == new, || format!("seed {seed}: {} not relabelled", e.id))?;
                    }
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} injected micro-datasets valid, in bounds, no no-op flips"))
}

fn ap_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..1000 {
        let (ds, dets) = micro_instance(seed);
        let got = evaluate(&ds, &dets).map_err(|e| e.to_string())?;
        let want = reference_evaluate(&ds, &dets);
        for t in 0..10 {
            worst = worst.max((got.ap_by_threshold[t] - want.ap_by_threshold[t]).abs());
        }
        worst = worst.max((got.ap - want.ap).abs());
        ensure(worst <= 1e-9, || {
            format!("seed {seed}: {:?} vs {:?}", got.ap_by_threshold, want.ap_by_threshold)
        })?;
    }
    let elapsed = start.elapsed();
    within(Duration::from_secs(30), elapsed, "oracle sweep")?;
    Ok(format!("1000 instances, max |diff| {worst:e}, {elapsed:.2?}"))
}

fn ap_fixtures() -> Outcome {
    let single =
        Dataset::new(vec![image(1, 100, 100)], vec![ann(1, 1, 1, [0.0, 0.0, 10.0, 10.0])], vec![category(1)])
            .map_err(|e| e.to_string())?;
    let double = Dataset::new(
        vec![image(1, 100, 100)],
        vec![ann(1, 1, 1, [0.0, 0.0, 10.0, 10.0]), ann(2, 1, 1, [50.0, 50.0, 10.0, 10.0])],
        vec![category(1)],
    )
    .map_err(|e| e.to_string())?;

    let perfect = evaluate(&single, &[det(1, 1, [0.0, 0.0, 10.0, 10.0], 1.0)]).map_err(|e| e.to_string())?;
    ensure(perfect.ap == 1.0 && perfect.ap50 == 1.0 && perfect.ap75 == 1.0, || {
        format!("perfect: {perfect:?}")
    })?;

    let half = evaluate(&double, &[det(1, 1, [0.0, 0.0, 10.0, 10.0], 0.9)]).map_err(|e| e.to_string())?;
    ensure(half.ap50 == 51.0 / 101.0, || format!("one of two found: ap50 {}", half.ap50))?;

    let fp_first =
        evaluate(&single, &[det(1, 1, [60.0, 60.0, 5.0, 5.0], 0.9), det(1, 1, [0.0, 0.0, 10.0, 10.0], 0.8)])
            .map_err(|e| e.to_string())?;
    ensure(fp_first.ap50 == 0.5, || format!("FP then TP: ap50 {}", fp_first.ap50))?;
    Ok("AP = 1.0, 51/101 and 0.5 reproduced exactly".into())
}

fn tide_properties() -> Outcome {
    let start = Instant::now();
    let mut labelled = 0;
    for seed in 0..1000 {
        let (ds, dets) = micro_instance(seed);
        let labels = classify_errors(&ds, &dets, 0.5, 0.1).map_err(|e| e.to_string())?;
        let summary = evaluate(&ds, &dets).map_err(|e| e.to_string())?;
        let mut tp = 0;
        for (i, l) in labels.detections.iter().enumerate() {
            match l {
                DetectionLabel::TruePositive { .. } => tp += 1,
                DetectionLabel::Dropped => return Err(format!("seed {seed}: detection {i} unlabelled")),
                _ => labelled += 1,
            }
        }
        let errors: usize = ErrorKind::ALL[..5].iter().map(|&k| labels.count(k)).sum();
        ensure(tp + errors == summary.num_detections, || {
            format!("seed {seed}: {tp} TP + {errors} errors != {}", summary.num_detections)
        })?;

        let report = tide_report(&ds, &dets, 0.5, 0.1).map_err(|e| e.to_string())?;
        for kind in ErrorKind::ALL {
            ensure(report.oracle(kind) >= report.baseline_ap50, || {
                format!(
                    "seed {seed}: {kind} oracle {} < baseline {}",
                    report.oracle(kind),
                    report.baseline_ap50
                )
            })?;
        }

        let perfect = tide_report(&ds, &perfect_detections(&ds), 0.5, 0.1).map_err(|e| e.to_string())?;
        ensure(perfect.delta_ap == [0.0; 6], || {
            format!("seed {seed}: perfect input has ΔAP {:?}", perfect.delta_ap)
        })?;
    }
    let elapsed = start.elapsed();
    within(Duration::from_secs(60), elapsed, "TIDE sweep")?;
    Ok(format!("1000 instances, {labelled} false positives each with one label, ΔAP >= 0, {elapsed:.2?}"))
}

fn localization_band() -> Outcome {
    let b = BoundingBox::new(100.0, 100.0, 50.0, 50.0);
    let img = image(1, 640, 480);
    let draws = 10_000u64;
    let mean = (0..draws)
        .map(|i| b.iou(&perturb_box(&b, &img, 0.4, &mut stream(0x5eed, Purpose::BoxPerturb, i))))
        .sum::<f64>()
        / draws as f64;
    ensure((mean - LOC_MEAN_IOU_BAND_CENTER).abs() <= LOC_MEAN_IOU_TOLERANCE, || {
        format!("mean IoU {mean:.4} outside {LOC_MEAN_IOU_BAND_CENTER} ± {LOC_MEAN_IOU_TOLERANCE}")
    })?;
    Ok(format!(
        "mean IoU {mean:.4} over {draws} draws, band {LOC_MEAN_IOU_BAND_CENTER} ± {LOC_MEAN_IOU_TOLERANCE}"
    ))
}

fn diff_reconciliation() -> Outcome {
    let clean = synthetic_dataset(1000, 100, 12, 5);
    for noise_type in NoiseType::ALL {
        let (noisy, log) =
            inject(&clean, &NoiseConfig::new(noise_type, 0.2, 31)).map_err(|e| e.to_string())?;
        let d = diff(&clean, &noisy);
        let problems = reconcile(&d, &log);
        ensure(problems.is_empty(), || format!("{noise_type}: {}", problems.join("; ")))?;
        let removed: std::collections::BTreeSet<AnnotationId> = log.removed.iter().copied().collect();
        let surviving = |kind: fn(&una_core::noise::CorruptionEntry) -> bool| {
            log.corrupted.iter().filter(|e| kind(e) && !removed.contains(&e.id)).count()
        };
        ensure(d.category_changes() == surviving(|e| e.original_category.is_some()), || {
            format!("{noise_type}: category count")
        })?;
        ensure(d.bbox_changes() == surviving(|e| e.original_bbox.is_some()), || {
            format!("{noise_type}: bbox count")
        })?;
        ensure(
            d.removed.len() == log.count(NoiseKind::Missing) && d.added.len() == log.count(NoiseKind::Bogus),
            || format!("{noise_type}: removed/added counts"),
        )?;
    }
    Ok("all 5 noise types at r = 0.2 on 1000 annotations reconcile exactly".into())
}

fn scale() -> Outcome {
    let ds = synthetic_dataset(100_000, 10_000, 80, 1);
    let start = Instant::now();
    let (noisy, log) = inject(&ds, &NoiseConfig::new(NoiseType::Una, 0.2, 9)).map_err(|e| e.to_string())?;
    let inject_time = start.elapsed();
    ensure(noisy.annotations().len() == 100_000 && log.count(NoiseKind::Bogus) == 20_000, || {
        "UNA counts".into()
    })?;
    within(Duration::from_secs(5), inject_time, "UNA 20% on 100k annotations")?;

    let gt = synthetic_dataset(20_000, 2_000, 80, 2);
    let dets = synthetic_detections(&gt, 50_000, 3);
    let start = Instant::now();
    let summary = evaluate(&gt, &dets).map_err(|e| e.to_string())?;
    let eval_time = start.elapsed();
    ensure(summary.num_ground_truths == 20_000, || "GT count".into())?;
    within(Duration::from_secs(30), eval_time, "evaluating 50k detections")?;
    Ok(format!("UNA 20% on 100k annotations {inject_time:.2?}; eval 50k dets vs 20k GT {eval_time:.2?}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("injection counts", exact_counts),
        ("CLI determinism", cli_determinism),
        ("validity", validity),
        ("AP oracle equivalence", ap_oracle),
        ("hand-computed AP fixtures", ap_fixtures),
        ("TIDE properties", tide_properties),
        ("localization calibration", localization_band),
        ("diff/log reconciliation", diff_reconciliation),
        ("scale", scale),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {}. {name}: {reason}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
