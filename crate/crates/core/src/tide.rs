//! TIDE-style error decomposition.
//!
//! After greedy matching at the foreground threshold `t_f`, every unmatched
//! detection gets exactly one label, first match wins:
//!
//! | label | condition |
//! |-------|-----------|
//! | Cls   | IoU ≥ `t_f` with a ground truth of another class |
//! | Loc   | best same-class IoU in `[t_b, t_f)` |
//! | Both  | best other-class IoU in `[t_b, t_f)` |
//! | Dupe  | IoU ≥ `t_f` with an already matched same-class ground truth |
//! | Bkg   | IoU < `t_b` with every ground truth |
//!
//! A ground truth is Miss when it is unmatched and no Cls or Loc detection
//! overlaps it by at least `t_b`.
//!
//! Each oracle fixes one component, starting from the baseline each time,
//! and AP at `t_f` is recomputed. Cls and Loc fixes turn the detection into
//! a hit on its target ground truth only when that ground truth was not
//! matched at baseline and no higher-ranked fix has claimed it; otherwise the
//! detection is dropped. Both, Dupe and Bkg detections are dropped and Miss
//! ground truths are removed. None of these can lower AP, so every ΔAP is
//! non-negative.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::dataset::{AnnotationId, Dataset, Detection, DetectionError, ImageId};
use crate::metrics::{
    group_cells, iou_matrix, keep_top_per_image, match_with_ious, mean_ap_at, MAX_DETS_PER_IMAGE,
};

pub const DEFAULT_FOREGROUND_IOU: f64 = 0.5;
pub const DEFAULT_BACKGROUND_IOU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorKind {
    Cls,
    Loc,
    Both,
    Dupe,
    Bkg,
    Miss,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 6] =
        [ErrorKind::Cls, ErrorKind::Loc, ErrorKind::Both, ErrorKind::Dupe, ErrorKind::Bkg, ErrorKind::Miss];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Cls => "Cls",
            ErrorKind::Loc => "Loc",
            ErrorKind::Both => "Both",
            ErrorKind::Dupe => "Dupe",
            ErrorKind::Bkg => "Bkg",
            ErrorKind::Miss => "Miss",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdict for one input detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionLabel {
    TruePositive {
        gt: AnnotationId,
    },
    /// `gt` is the best-overlapping ground truth of another class.
    Cls {
        gt: AnnotationId,
    },
    /// `gt` is the best-overlapping ground truth of the same class.
    Loc {
        gt: AnnotationId,
    },
    Both,
    Dupe {
        gt: AnnotationId,
    },
    Bkg,
    /// Beyond the per-image detection cap; not evaluated.
    Dropped,
}

impl DetectionLabel {
    pub fn error(&self) -> Option<ErrorKind> {
        match self {
            DetectionLabel::Cls { .. } => Some(ErrorKind::Cls),
            DetectionLabel::Loc { .. } => Some(ErrorKind::Loc),
            DetectionLabel::Both => Some(ErrorKind::Both),
            DetectionLabel::Dupe { .. } => Some(ErrorKind::Dupe),
            DetectionLabel::Bkg => Some(ErrorKind::Bkg),
            DetectionLabel::TruePositive { .. } | DetectionLabel::Dropped => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorLabels {
    pub foreground_iou: f64,
    pub background_iou: f64,
    /// One label per input detection, in input order.
    pub detections: Vec<DetectionLabel>,
    /// Miss ground truths, sorted.
    pub missed: Vec<AnnotationId>,
}

impl ErrorLabels {
    pub fn count(&self, kind: ErrorKind) -> usize {
        match kind {
            ErrorKind::Miss => self.missed.len(),
            _ => self.detections.iter().filter(|l| l.error() == Some(kind)).count(),
        }
    }

    fn matched_gts(&self) -> BTreeSet<AnnotationId> {
        self.detections
            .iter()
            .filter_map(|l| match l {
                DetectionLabel::TruePositive { gt } => Some(*gt),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TideError {
    #[error("thresholds must satisfy 0 <= tb < tf <= 1 (got tf = {foreground}, tb = {background})")]
    InvalidThresholds { foreground: f64, background: f64 },
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

pub fn check_thresholds(foreground: f64, background: f64) -> Result<(), TideError> {
    if (0.0..=1.0).contains(&background) && (0.0..=1.0).contains(&foreground) && background < foreground {
        Ok(())
    } else {
        Err(TideError::InvalidThresholds { foreground, background })
    }
}

/// Labels every evaluated detection and finds the Miss ground truths.
pub fn classify_errors(
    gt: &Dataset,
    dets: &[Detection],
    foreground_iou: f64,
    background_iou: f64,
) -> Result<ErrorLabels, TideError> {
    check_thresholds(foreground_iou, background_iou)?;
    gt.check_detections(dets)?;

    let anns = gt.annotations();
    let kept = keep_top_per_image(dets, MAX_DETS_PER_IMAGE);
    let mut labels = vec![DetectionLabel::Dropped; dets.len()];
    let mut gt_matched = vec![false; anns.len()];

    for by_image in group_cells(gt, dets, &kept).values() {
        for cell in by_image.values() {
            if cell.dets.is_empty() || cell.gts.is_empty() {
                continue;
            }
            let det_boxes: Vec<_> = cell.dets.iter().map(|&d| dets[d].bbox).collect();
            let gt_boxes: Vec<_> = cell.gts.iter().map(|&g| anns[g].bbox).collect();
            let ious = iou_matrix(&det_boxes, &gt_boxes);
            let m = match_with_ious(&ious, det_boxes.len(), gt_boxes.len(), foreground_iou);
            for (row, hit) in m.det_to_gt.iter().enumerate() {
                if let Some(col) = hit {
                    let g = cell.gts[*col];
                    gt_matched[g] = true;
                    labels[cell.dets[row]] = DetectionLabel::TruePositive { gt: anns[g].id };
                }
            }
        }
    }

    let mut gts_by_image: BTreeMap<ImageId, Vec<usize>> = BTreeMap::new();
    for (i, ann) in anns.iter().enumerate().filter(|(_, a)| !a.iscrowd) {
        gts_by_image.entry(ann.image_id).or_default().push(i);
    }

    let mut covered = vec![false; anns.len()];
    for &d in &kept {
        if matches!(labels[d], DetectionLabel::TruePositive { .. }) {
            continue;
        }
        let det = &dets[d];
        let image_gts = gts_by_image.get(&det.image_id).map_or(&[][..], Vec::as_slice);
        let mut same = Best::default();
        let mut other = Best::default();
        let mut same_matched = Best::default();
        for &g in image_gts {
            let overlap = det.bbox.iou(&anns[g].bbox);
            if anns[g].category_id == det.category_id {
                same.offer(g, overlap);
                if gt_matched[g] {
                    same_matched.offer(g, overlap);
                }
            } else {
                other.offer(g, overlap);
            }
        }
        let fg = |b: &Best| b.reaches(foreground_iou);
        let mid = |b: &Best| b.reaches(background_iou) && b.iou < foreground_iou;
        let id = |b: &Best| anns[b.index.expect("checked by reaches")].id;

        labels[d] = if fg(&other) {
            DetectionLabel::Cls { gt: id(&other) }
        } else if mid(&same) {
            DetectionLabel::Loc { gt: id(&same) }
        } else if mid(&other) {
            DetectionLabel::Both
        } else if fg(&same_matched) {
            DetectionLabel::Dupe { gt: id(&same_matched) }
        } else {
            DetectionLabel::Bkg
        };

        if matches!(labels[d], DetectionLabel::Cls { .. } | DetectionLabel::Loc { .. }) {
            for &g in image_gts {
                if det.bbox.iou(&anns[g].bbox) >= background_iou {
                    covered[g] = true;
                }
            }
        }
    }

    let missed = anns
        .iter()
        .enumerate()
        .filter(|(i, a)| !a.iscrowd && !gt_matched[*i] && !covered[*i])
        .map(|(_, a)| a.id)
        .collect();

    Ok(ErrorLabels { foreground_iou, background_iou, detections: labels, missed })
}

/// Highest IoU seen so far; the first index wins ties.
#[derive(Default)]
struct Best {
    index: Option<usize>,
    iou: f64,
}

impl Best {
    fn reaches(&self, threshold: f64) -> bool {
        self.index.is_some() && self.iou >= threshold
    }

    fn offer(&mut self, index: usize, iou: f64) {
        if self.index.is_none() || iou > self.iou {
            self.index = Some(index);
            self.iou = iou;
        }
    }
}

/// Ground truth and detections with one error component fixed.
///
/// Detections beyond the per-image cap are not part of the result.
pub fn apply_oracle(
    gt: &Dataset,
    dets: &[Detection],
    labels: &ErrorLabels,
    kind: ErrorKind,
) -> (Dataset, Vec<Detection>) {
    if kind == ErrorKind::Miss {
        let (images, mut annotations, categories) = gt.clone().into_parts();
        annotations.retain(|a| labels.missed.binary_search(&a.id).is_err());
        let kept = (0..dets.len())
            .filter(|&i| labels.detections[i] != DetectionLabel::Dropped)
            .map(|i| dets[i].clone())
            .collect();
        return (Dataset::from_sorted_parts(images, annotations, categories), kept);
    }

    let mut fixed: Vec<Option<Detection>> = dets.iter().cloned().map(Some).collect();
    let mut claimed = labels.matched_gts();
    for d in keep_top_per_image(dets, MAX_DETS_PER_IMAGE) {
        let label = labels.detections[d];
        if label.error() != Some(kind) {
            continue;
        }
        fixed[d] = match label {
            DetectionLabel::Cls { gt: target } if claimed.insert(target) => {
                let g = gt.annotation(target).expect("label refers to ground truth");
                Some(Detection { category_id: g.category_id, ..dets[d].clone() })
            }
            DetectionLabel::Loc { gt: target } if claimed.insert(target) => {
                let g = gt.annotation(target).expect("label refers to ground truth");
                Some(Detection { bbox: g.bbox, ..dets[d].clone() })
            }
            _ => None,
        };
    }
    let out = fixed
        .into_iter()
        .zip(&labels.detections)
        .filter(|(_, l)| **l != DetectionLabel::Dropped)
        .filter_map(|(d, _)| d)
        .collect();
    (gt.clone(), out)
}

/// Baseline AP at `t_f` plus oracle AP and ΔAP for every component.
#[derive(Debug, Clone, PartialEq)]
pub struct TideReport {
    pub foreground_iou: f64,
    pub background_iou: f64,
    /// Category-mean AP at `t_f` (AP50 with the default thresholds).
    pub baseline_ap50: f64,
    /// Indexed by [`ErrorKind`] in [`ErrorKind::ALL`] order.
    pub oracle_ap: [f64; 6],
    pub delta_ap: [f64; 6],
    pub error_counts: [usize; 6],
}

impl TideReport {
    pub fn oracle(&self, kind: ErrorKind) -> f64 {
        self.oracle_ap[kind.index()]
    }

    pub fn delta(&self, kind: ErrorKind) -> f64 {
        self.delta_ap[kind.index()]
    }

    pub fn count(&self, kind: ErrorKind) -> usize {
        self.error_counts[kind.index()]
    }
}

pub fn tide_report(
    gt: &Dataset,
    dets: &[Detection],
    foreground_iou: f64,
    background_iou: f64,
) -> Result<TideReport, TideError> {
    let labels = classify_errors(gt, dets, foreground_iou, background_iou)?;
    let kept = keep_top_per_image(dets, MAX_DETS_PER_IMAGE);
    let baseline = mean_ap_at(gt, dets, &kept, foreground_iou);

    let oracle_for = |kind: ErrorKind| {
        if labels.count(kind) == 0 {
            return baseline;
        }
        let (gt_fixed, dets_fixed) = apply_oracle(gt, dets, &labels, kind);
        let kept_fixed = keep_top_per_image(&dets_fixed, MAX_DETS_PER_IMAGE);
        mean_ap_at(&gt_fixed, &dets_fixed, &kept_fixed, foreground_iou)
    };

    #[cfg(feature = "parallel")]
    let oracle: Vec<f64> = {
        use rayon::prelude::*;
        ErrorKind::ALL.par_iter().map(|k| oracle_for(*k)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let oracle: Vec<f64> = ErrorKind::ALL.iter().map(|k| oracle_for(*k)).collect();

    let mut report = TideReport {
        foreground_iou,
        background_iou,
        baseline_ap50: baseline,
        oracle_ap: [0.0; 6],
        delta_ap: [0.0; 6],
        error_counts: [0; 6],
    };
    for kind in ErrorKind::ALL {
        let i = kind.index();
        report.oracle_ap[i] = oracle[i];
        report.delta_ap[i] = oracle[i] - baseline;
        report.error_counts[i] = labels.count(kind);
    }
    Ok(report)
}
