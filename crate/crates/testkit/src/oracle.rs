//! Brute-force reference for COCO-style AP.
//!
//! For every distinct score `s` the detections with score ≥ `s` are matched
//! from scratch, giving one precision/recall point per threshold. The
//! 101-point interpolation is then taken literally: for each recall level,
//! the maximum precision over all points at or above it.
//!
//! With tied scores this differs from per-rank accumulation, so callers
//! should feed it instances with distinct scores.

use std::collections::BTreeMap;

use una_core::{BoundingBox, Dataset, Detection};

pub fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax2, ay2) = (a.x + a.w, a.y + a.h);
    let (bx2, by2) = (b.x + b.w, b.y + b.h);
    let ix = (ax2.min(bx2) - a.x.max(b.x)).max(0.0);
    let iy = (ay2.min(by2) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.w * a.h + b.w * b.h - inter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSummary {
    pub ap_by_threshold: [f64; 10],
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
}

pub fn thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Indices of the detections that survive the 100-per-image cap.
fn capped(dets: &[Detection]) -> Vec<usize> {
    let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_image.entry(d.image_id.0).or_default().push(i);
    }
    let mut keep = Vec::new();
    for mut idx in by_image.into_values() {
        idx.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
        keep.extend(idx.into_iter().take(100));
    }
    keep.sort();
    keep
}

/// True positives among `subset` (indices into `dets`, one category) when
/// matched greedily per image at IoU ≥ `t`.
fn count_true_positives(
    gts: &[(u64, u64, BoundingBox)],
    dets: &[Detection],
    subset: &[usize],
    t: f64,
) -> usize {
    let mut order = subset.to_vec();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    let mut used = vec![false; gts.len()];
    let mut tp = 0;
    for d in order {
        let det = &dets[d];
        let mut best: Option<usize> = None;
        let mut best_iou = -1.0;
        // gts are in id order, so strict '>' keeps the lowest id on ties
        for (g, (_, image, bbox)) in gts.iter().enumerate() {
            if used[g] || *image != det.image_id.0 {
                continue;
            }
            let o = oracle_iou(&det.bbox, bbox);
            if o >= t && o > best_iou {
                best = Some(g);
                best_iou = o;
            }
        }
        if let Some(g) = best {
            used[g] = true;
            tp += 1;
        }
    }
    tp
}

fn reference_category_ap(
    gts: &[(u64, u64, BoundingBox)],
    dets: &[Detection],
    cat_dets: &[usize],
    t: f64,
) -> f64 {
    let n_gt = gts.len();
    let mut scores: Vec<f64> = cat_dets.iter().map(|&d| dets[d].score).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    scores.dedup();

    let points: Vec<(f64, f64)> = scores
        .iter()
        .map(|&s| {
            let subset: Vec<usize> = cat_dets.iter().copied().filter(|&d| dets[d].score >= s).collect();
            let tp = count_true_positives(gts, dets, &subset, t);
            (tp as f64 / subset.len() as f64, tp as f64 / n_gt as f64)
        })
        .collect();

    let mut sum = 0.0;
    for r in 0..=100 {
        let level = r as f64 / 100.0;
        let best = points.iter().filter(|(_, recall)| *recall >= level).map(|(p, _)| *p).fold(0.0, f64::max);
        sum += best;
    }
    sum / 101.0
}

pub fn reference_evaluate(gt: &Dataset, dets: &[Detection]) -> ReferenceSummary {
    let keep = capped(dets);
    let ts = thresholds();
    let mut per_threshold = [0.0; 10];
    let mut n_categories = 0;
    for cat in gt.categories() {
        let gts: Vec<(u64, u64, BoundingBox)> = gt
            .annotations()
            .iter()
            .filter(|a| a.category_id == cat.id && !a.iscrowd)
            .map(|a| (a.id.0, a.image_id.0, a.bbox))
            .collect();
        if gts.is_empty() {
            continue;
        }
        n_categories += 1;
        let cat_dets: Vec<usize> = keep.iter().copied().filter(|&d| dets[d].category_id == cat.id).collect();
        for (slot, &t) in per_threshold.iter_mut().zip(ts.iter()) {
            *slot += reference_category_ap(&gts, dets, &cat_dets, t);
        }
    }
    if n_categories > 0 {
        for v in per_threshold.iter_mut() {
            *v /= n_categories as f64;
        }
    }
    ReferenceSummary {
        ap: per_threshold.iter().sum::<f64>() / 10.0,
        ap50: per_threshold[0],
        ap75: per_threshold[5],
        ap_by_threshold: per_threshold,
    }
}
