//! Annotation-level differences between two datasets, and a check that a
//! difference is exactly what an injection log says happened.

use std::collections::BTreeSet;

use una_core::{AnnotationId, BoundingBox, CategoryId, Dataset, InjectionLog};

#[derive(Debug, Clone, PartialEq)]
pub struct Change {
    pub id: AnnotationId,
    pub category: Option<(CategoryId, CategoryId)>,
    pub bbox: Option<(BoundingBox, BoundingBox)>,
    /// Other fields that differ (`image_id`, `iscrowd`, `area`). `area` is
    /// only listed when the box did not change.
    pub other: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetDiff {
    /// Annotations present in both with at least one differing field, by id.
    pub changed: Vec<Change>,
    /// Ids only in the first dataset, sorted.
    pub removed: Vec<AnnotationId>,
    /// Ids only in the second dataset, sorted.
    pub added: Vec<AnnotationId>,
}

impl DatasetDiff {
    pub fn is_empty(&self) -> bool {
        self.changed.is_empty() && self.removed.is_empty() && self.added.is_empty()
    }

    pub fn category_changes(&self) -> usize {
        self.changed.iter().filter(|c| c.category.is_some()).count()
    }

    pub fn bbox_changes(&self) -> usize {
        self.changed.iter().filter(|c| c.bbox.is_some()).count()
    }
}

pub fn diff(a: &Dataset, b: &Dataset) -> DatasetDiff {
    let mut out = DatasetDiff::default();
    let (xs, ys) = (a.annotations(), b.annotations());
    let (mut i, mut j) = (0, 0);
    // both sides are sorted by id
    while i < xs.len() || j < ys.len() {
        match (xs.get(i), ys.get(j)) {
            (Some(x), Some(y)) if x.id == y.id => {
                let mut change = Change { id: x.id, category: None, bbox: None, other: Vec::new() };
                if x.category_id != y.category_id {
                    change.category = Some((x.category_id, y.category_id));
                }
                if x.bbox != y.bbox {
                    change.bbox = Some((x.bbox, y.bbox));
                } else if x.area.to_bits() != y.area.to_bits() {
                    change.other.push("area");
                }
                if x.image_id != y.image_id {
                    change.other.push("image_id");
                }
                if x.iscrowd != y.iscrowd {
                    change.other.push("iscrowd");
                }
                if change.category.is_some() || change.bbox.is_some() || !change.other.is_empty() {
                    out.changed.push(change);
                }
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.id < y.id => {
                out.removed.push(x.id);
                i += 1;
            }
            (Some(x), None) => {
                out.removed.push(x.id);
                i += 1;
            }
            (_, Some(y)) => {
                out.added.push(y.id);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Every way in which `d` disagrees with `log`; empty when they reconcile.
///
/// Removed and added ids must match exactly. Each logged corruption of an
/// annotation that survives must show up as precisely the logged category
/// and box change, and nothing else may have changed.
pub fn reconcile(d: &DatasetDiff, log: &InjectionLog) -> Vec<String> {
    let mut problems = Vec::new();
    compare_ids("removed", &d.removed, &log.removed, &mut problems);
    compare_ids("added", &d.added, &log.added, &mut problems);

    let removed: BTreeSet<AnnotationId> = log.removed.iter().copied().collect();
    let mut expected = log.corrupted.iter().filter(|e| !removed.contains(&e.id)).peekable();
    let mut seen = d.changed.iter().peekable();
    loop {
        match (expected.peek(), seen.peek()) {
            (Some(e), Some(c)) if e.id == c.id => {
                let want_cat = e.original_category.zip(e.new_category);
                if c.category != want_cat {
                    problems.push(format!(
                        "annotation {}: category change {:?}, log says {:?}",
                        c.id, c.category, want_cat
                    ));
                }
                let want_box = e.original_bbox.zip(e.new_bbox);
                if c.bbox != want_box {
                    problems.push(format!(
                        "annotation {}: bbox change {:?}, log says {:?}",
                        c.id, c.bbox, want_box
                    ));
                }
                if !c.other.is_empty() {
                    problems.push(format!("annotation {}: unlogged change to {}", c.id, c.other.join(", ")));
                }
                expected.next();
                seen.next();
            }
            (Some(e), c) if c.is_none_or(|c| e.id < c.id) => {
                problems.push(format!("annotation {}: logged as corrupted but unchanged", e.id));
                expected.next();
            }
            (_, Some(c)) => {
                problems.push(format!("annotation {}: changed but not in the log", c.id));
                seen.next();
            }
            _ => break,
        }
    }
    problems
}

fn compare_ids(what: &str, got: &[AnnotationId], logged: &[AnnotationId], problems: &mut Vec<String>) {
    let got: BTreeSet<_> = got.iter().collect();
    let logged: BTreeSet<_> = logged.iter().collect();
    for id in got.difference(&logged) {
        problems.push(format!("annotation {id}: {what} but not in the log"));
    }
    for id in logged.difference(&got) {
        problems.push(format!("annotation {id}: logged as {what} but not in the diff"));
    }
}
