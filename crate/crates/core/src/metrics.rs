//! COCO-style box AP.
//!
//! Protocol: detections are ranked by descending score with ties kept in
//! input order; at most [`MAX_DETS_PER_IMAGE`] detections per image are
//! kept; matching is greedy per (image, category); AP is the 101-point
//! interpolated area under the precision/recall curve, averaged over the
//! categories that have ground truth. Crowd annotations are not ground
//! truth here, so a detection that only overlaps a crowd region is a false
//! positive. No area-range breakdown is computed.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::bbox::BoundingBox;
use crate::dataset::{CategoryId, Dataset, Detection, DetectionError, ImageId};

/// IoU thresholds 0.50:0.05:0.95.
pub const IOU_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];
pub const MAX_DETS_PER_IMAGE: usize = 100;
/// Recall levels 0.00, 0.01, ..., 1.00.
pub const RECALL_POINTS: usize = 101;

const AP50: usize = 0;
const AP75: usize = 5;

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}

/// Outcome of greedy matching within one (image, category) cell.
/// Indices refer to the slices passed to [`match_greedy`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub threshold: f64,
    pub det_to_gt: Vec<Option<usize>>,
    pub gt_to_det: Vec<Option<usize>>,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.det_to_gt.iter().filter(|m| m.is_some()).count()
    }
}

/// Greedy matching. `dets` must already be in rank order.
///
/// Each detection in turn takes the unmatched ground truth with the highest
/// IoU among those with IoU ≥ `threshold` (lowest index on ties).
pub fn match_greedy(dets: &[BoundingBox], gts: &[BoundingBox], threshold: f64) -> MatchResult {
    let ious = iou_matrix(dets, gts);
    match_with_ious(&ious, dets.len(), gts.len(), threshold)
}

/// Row-major `dets x gts` IoU table.
pub(crate) fn iou_matrix(dets: &[BoundingBox], gts: &[BoundingBox]) -> Vec<f64> {
    let mut out = Vec::with_capacity(dets.len() * gts.len());
    for d in dets {
        out.extend(gts.iter().map(|g| d.iou(g)));
    }
    out
}

pub(crate) fn match_with_ious(ious: &[f64], n_det: usize, n_gt: usize, threshold: f64) -> MatchResult {
    let mut det_to_gt = vec![None; n_det];
    let mut gt_to_det = vec![None; n_gt];
    for (d, slot) in det_to_gt.iter_mut().enumerate() {
        let row = &ious[d * n_gt..(d + 1) * n_gt];
        let mut best: Option<(usize, f64)> = None;
        for (g, &overlap) in row.iter().enumerate() {
            if gt_to_det[g].is_some() || overlap < threshold {
                continue;
            }
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        if let Some((g, _)) = best {
            *slot = Some(g);
            gt_to_det[g] = Some(d);
        }
    }
    MatchResult { threshold, det_to_gt, gt_to_det }
}

/// One ranked detection as seen by [`average_precision`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedOutcome {
    pub score: f64,
    /// Input position, used to break score ties.
    pub order: usize,
    pub true_positive: bool,
}

/// 101-point interpolated AP.
///
/// Outcomes are ranked by `(score desc, order asc)`. With precision `p(i)`
/// and recall `q(i)` after the first `i + 1` detections,
/// `AP = 1/101 * sum over r in {0, 0.01, ..., 1} of max{p(i) : q(i) >= r}`,
/// an empty max counting as zero. Returns 0 when `n_gt` is 0.
pub fn average_precision(outcomes: &[RankedOutcome], n_gt: usize) -> f64 {
    if n_gt == 0 || outcomes.is_empty() {
        return 0.0;
    }
    let mut ranked = outcomes.to_vec();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.order.cmp(&b.order)));
    ap_from_ranked(ranked.iter().map(|o| o.true_positive), n_gt)
}

/// AP over outcomes that are already in rank order.
pub(crate) fn ap_from_ranked(outcomes: impl Iterator<Item = bool>, n_gt: usize) -> f64 {
    let mut tp_cum = Vec::new();
    let mut precision = Vec::new();
    let mut tp = 0usize;
    for (i, hit) in outcomes.enumerate() {
        tp += usize::from(hit);
        tp_cum.push(tp);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    // precision envelope, non-increasing from the right
    for i in (0..precision.len().saturating_sub(1)).rev() {
        if precision[i + 1] > precision[i] {
            precision[i] = precision[i + 1];
        }
    }
    // recall(i) >= j/100  <=>  100 * tp(i) >= j * n_gt, checked in integers
    let mut sum = 0.0;
    let mut i = 0;
    for j in 0..RECALL_POINTS {
        while i < tp_cum.len() && tp_cum[i] * 100 < j * n_gt {
            i += 1;
        }
        if i == tp_cum.len() {
            break;
        }
        sum += precision[i];
    }
    sum / RECALL_POINTS as f64
}

/// Detection indices sorted by descending score, ties in input order.
pub fn rank_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

/// The highest-ranked `max_per_image` detections of every image, as
/// indices in global rank order.
pub fn keep_top_per_image(dets: &[Detection], max_per_image: usize) -> Vec<usize> {
    let mut seen: BTreeMap<ImageId, usize> = BTreeMap::new();
    rank_order(dets)
        .into_iter()
        .filter(|&i| {
            let n = seen.entry(dets[i].image_id).or_insert(0);
            *n += 1;
            *n <= max_per_image
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryEval {
    pub category_id: CategoryId,
    pub num_gt: usize,
    pub num_det: usize,
    /// AP at each of [`IOU_THRESHOLDS`].
    pub ap_by_threshold: [f64; 10],
}

impl CategoryEval {
    pub fn ap(&self) -> f64 {
        self.ap_by_threshold.iter().sum::<f64>() / IOU_THRESHOLDS.len() as f64
    }

    pub fn ap50(&self) -> f64 {
        self.ap_by_threshold[AP50]
    }

    pub fn ap75(&self) -> f64 {
        self.ap_by_threshold[AP75]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    /// Mean of `ap_by_threshold`.
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    /// Category-mean AP at each of [`IOU_THRESHOLDS`].
    pub ap_by_threshold: [f64; 10],
    /// Every category of the ground truth, in id order. Categories without
    /// ground truth are listed but excluded from the means.
    pub per_category: Vec<CategoryEval>,
    /// Detections that took part (after the per-image cap).
    pub num_detections: usize,
    /// Non-crowd ground-truth annotations.
    pub num_ground_truths: usize,
}

/// Evaluates `dets` against the non-crowd annotations of `gt`.
pub fn evaluate(gt: &Dataset, dets: &[Detection]) -> Result<EvalSummary, DetectionError> {
    gt.check_detections(dets)?;
    let kept = keep_top_per_image(dets, MAX_DETS_PER_IMAGE);
    let per_category: Vec<CategoryEval> = category_aps(gt, dets, &kept, &IOU_THRESHOLDS)
        .into_iter()
        .map(|c| CategoryEval {
            category_id: c.category_id,
            num_gt: c.num_gt,
            num_det: c.num_det,
            ap_by_threshold: c.aps.try_into().expect("one AP per threshold"),
        })
        .collect();

    let mut ap_by_threshold = [0.0; 10];
    for (t, slot) in ap_by_threshold.iter_mut().enumerate() {
        *slot = mean_over_annotated(per_category.iter().map(|c| (c.num_gt, c.ap_by_threshold[t])));
    }
    Ok(EvalSummary {
        ap: ap_by_threshold.iter().sum::<f64>() / IOU_THRESHOLDS.len() as f64,
        ap50: ap_by_threshold[AP50],
        ap75: ap_by_threshold[AP75],
        ap_by_threshold,
        per_category,
        num_detections: kept.len(),
        num_ground_truths: gt.non_crowd().count(),
    })
}

/// Category-mean AP at one threshold over an already-capped detection set.
pub(crate) fn mean_ap_at(gt: &Dataset, dets: &[Detection], kept: &[usize], threshold: f64) -> f64 {
    let cats = category_aps(gt, dets, kept, &[threshold]);
    mean_over_annotated(cats.iter().map(|c| (c.num_gt, c.aps[0])))
}

fn mean_over_annotated(values: impl Iterator<Item = (usize, f64)>) -> f64 {
    let (sum, n) =
        values.filter(|(num_gt, _)| *num_gt > 0).fold((0.0, 0usize), |(s, n), (_, ap)| (s + ap, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Ground-truth and detection indices for one (image, category) pair.
/// Ground truths are in id order, detections in rank order.
#[derive(Debug, Default)]
pub(crate) struct Cell {
    pub gts: Vec<usize>,
    pub dets: Vec<usize>,
}

pub(crate) type CellMap = BTreeMap<CategoryId, BTreeMap<ImageId, Cell>>;

/// Groups non-crowd ground truth and the `kept` detections by category,
/// then image. Every ground-truth category gets an entry.
pub(crate) fn group_cells(gt: &Dataset, dets: &[Detection], kept: &[usize]) -> CellMap {
    let mut cells: CellMap = gt.categories().iter().map(|c| (c.id, BTreeMap::new())).collect();
    for (i, ann) in gt.annotations().iter().enumerate() {
        if ann.iscrowd {
            continue;
        }
        let by_image = cells.entry(ann.category_id).or_default();
        by_image.entry(ann.image_id).or_default().gts.push(i);
    }
    for &d in kept {
        let det = &dets[d];
        let by_image = cells.entry(det.category_id).or_default();
        by_image.entry(det.image_id).or_default().dets.push(d);
    }
    cells
}

struct CategoryAps {
    category_id: CategoryId,
    num_gt: usize,
    num_det: usize,
    aps: Vec<f64>,
}

fn category_aps(gt: &Dataset, dets: &[Detection], kept: &[usize], thresholds: &[f64]) -> Vec<CategoryAps> {
    let cells = group_cells(gt, dets, kept);
    let one = |(category_id, by_image): (&CategoryId, &BTreeMap<ImageId, Cell>)| {
        category_ap(gt, dets, *category_id, by_image, thresholds)
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let entries: Vec<_> = cells.iter().collect();
        entries.into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cells.iter().map(one).collect()
    }
}

fn category_ap(
    gt: &Dataset,
    dets: &[Detection],
    category_id: CategoryId,
    by_image: &BTreeMap<ImageId, Cell>,
    thresholds: &[f64],
) -> CategoryAps {
    let anns = gt.annotations();
    let mut num_gt = 0;
    // (detection index, per-threshold hit)
    let mut outcomes: Vec<(usize, Vec<bool>)> = Vec::new();
    for cell in by_image.values() {
        num_gt += cell.gts.len();
        if cell.dets.is_empty() {
            continue;
        }
        let det_boxes: Vec<BoundingBox> = cell.dets.iter().map(|&d| dets[d].bbox).collect();
        let gt_boxes: Vec<BoundingBox> = cell.gts.iter().map(|&g| anns[g].bbox).collect();
        let ious = iou_matrix(&det_boxes, &gt_boxes);
        let matches: Vec<MatchResult> =
            thresholds.iter().map(|&t| match_with_ious(&ious, det_boxes.len(), gt_boxes.len(), t)).collect();
        for (row, &d) in cell.dets.iter().enumerate() {
            outcomes.push((d, matches.iter().map(|m| m.det_to_gt[row].is_some()).collect()));
        }
    }
    outcomes.sort_by(|a, b| dets[b.0].score.total_cmp(&dets[a.0].score).then(a.0.cmp(&b.0)));

    let aps = (0..thresholds.len())
        .map(|t| ap_from_ranked(outcomes.iter().map(|(_, hits)| hits[t]), num_gt))
        .collect();
    CategoryAps { category_id, num_gt, num_det: outcomes.len(), aps }
}
