use alloc::vec::Vec;

use super::{NoiseConfig, NoiseKind};
use crate::bbox::BoundingBox;
use crate::dataset::{AnnotationId, CategoryId};

/// Record of one annotation whose category and/or box was rewritten.
///
/// `original_*` / `new_*` are set only for the fields that changed. Under
/// UNA an entry may also appear in [`InjectionLog::removed`] when the
/// annotation was later dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionEntry {
    pub id: AnnotationId,
    pub original_category: Option<CategoryId>,
    pub new_category: Option<CategoryId>,
    pub original_bbox: Option<BoundingBox>,
    pub new_bbox: Option<BoundingBox>,
}

impl CorruptionEntry {
    pub(crate) fn new(id: AnnotationId) -> Self {
        Self { id, original_category: None, new_category: None, original_bbox: None, new_bbox: None }
    }

    /// Noise kinds applied to this annotation, in application order.
    pub fn kinds(&self) -> Vec<NoiseKind> {
        let mut kinds = Vec::with_capacity(2);
        if self.original_category.is_some() {
            kinds.push(NoiseKind::Categorization);
        }
        if self.original_bbox.is_some() {
            kinds.push(NoiseKind::Localization);
        }
        kinds
    }
}

/// Everything an injector did, enough to undo or audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionLog {
    pub config: NoiseConfig,
    /// Number of non-crowd annotations in the input (`N`).
    pub pool_size: usize,
    /// `round(ratio * N)`, the per-kind event count.
    pub target_count: usize,
    /// Sorted by id.
    pub corrupted: Vec<CorruptionEntry>,
    /// Sorted ids of annotations present in the input but not the output.
    pub removed: Vec<AnnotationId>,
    /// Sorted ids of annotations present in the output but not the input.
    pub added: Vec<AnnotationId>,
}

impl InjectionLog {
    pub(crate) fn empty(config: NoiseConfig, pool_size: usize, target_count: usize) -> Self {
        Self {
            config,
            pool_size,
            target_count,
            corrupted: Vec::new(),
            removed: Vec::new(),
            added: Vec::new(),
        }
    }

    /// Number of events of the given kind.
    pub fn count(&self, kind: NoiseKind) -> usize {
        match kind {
            NoiseKind::Categorization => {
                self.corrupted.iter().filter(|e| e.original_category.is_some()).count()
            }
            NoiseKind::Localization => self.corrupted.iter().filter(|e| e.original_bbox.is_some()).count(),
            NoiseKind::Missing => self.removed.len(),
            NoiseKind::Bogus => self.added.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.corrupted.is_empty() && self.removed.is_empty() && self.added.is_empty()
    }

    pub fn entry(&self, id: AnnotationId) -> Option<&CorruptionEntry> {
        self.corrupted.binary_search_by_key(&id, |e| e.id).ok().map(|i| &self.corrupted[i])
    }
}
