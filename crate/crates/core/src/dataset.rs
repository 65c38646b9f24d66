//! Images, annotations and categories with referential integrity.
//!
//! A [`Dataset`] can only be built through [`Dataset::new`], which validates
//! every record and stores each collection sorted by id. Two datasets holding
//! the same records therefore compare equal regardless of input order.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::bbox::BoundingBox;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(
    /// Identifier of an [`ImageRecord`].
    ImageId
);
id_type!(
    /// Identifier of an [`Annotation`].
    AnnotationId
);
id_type!(
    /// Identifier of a [`Category`].
    CategoryId
);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: ImageId,
    pub width: u32,
    pub height: u32,
    pub file_name: String,
}

impl ImageRecord {
    pub fn size(&self) -> (f64, f64) {
        (f64::from(self.width), f64::from(self.height))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
    pub supercategory: Option<String>,
}

/// One labeled object instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub id: AnnotationId,
    pub image_id: ImageId,
    pub category_id: CategoryId,
    pub bbox: BoundingBox,
    pub area: f64,
    pub iscrowd: bool,
}

/// One predicted box. `score` only orders detections; ties keep input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: ImageId,
    pub category_id: CategoryId,
    pub bbox: BoundingBox,
    pub score: f64,
}

/// Which top-level collection a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Images,
    Annotations,
    Categories,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Images => "images",
            Section::Annotations => "annotations",
            Section::Categories => "categories",
        })
    }
}

/// A single integrity violation. `index` is the record's position in the
/// collection that was handed to [`Dataset::new`].
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    DuplicateId { section: Section, index: usize, id: u64 },
    InvalidImageSize { index: usize, image: ImageId },
    DanglingImage { index: usize, annotation: AnnotationId, image: ImageId },
    DanglingCategory { index: usize, annotation: AnnotationId, category: CategoryId },
    NonPositiveBox { index: usize, annotation: AnnotationId },
    NonFiniteBox { index: usize, annotation: AnnotationId },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DuplicateId { section, index, id } => {
                write!(f, "{section}[{index}]: duplicate id {id}")
            }
            Issue::InvalidImageSize { index, image } => {
                write!(f, "images[{index}] (id {image}): width and height must be positive")
            }
            Issue::DanglingImage { index, annotation, image } => {
                write!(f, "annotations[{index}] (id {annotation}): image_id {image} does not exist")
            }
            Issue::DanglingCategory { index, annotation, category } => {
                write!(f, "annotations[{index}] (id {annotation}): category_id {category} does not exist")
            }
            Issue::NonPositiveBox { index, annotation } => {
                write!(f, "annotations[{index}] (id {annotation}): bbox width and height must be positive")
            }
            Issue::NonFiniteBox { index, annotation } => {
                write!(f, "annotations[{index}] (id {annotation}): bbox is not finite")
            }
        }
    }
}

/// Every violation found while building a [`Dataset`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ValidationError {
    pub issues: Vec<Issue>,
}

impl ValidationError {
    /// Ids of annotations rejected for zero or negative box extent.
    pub fn non_positive_boxes(&self) -> Vec<AnnotationId> {
        self.issues
            .iter()
            .filter_map(|issue| match issue {
                Issue::NonPositiveBox { annotation, .. } => Some(*annotation),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation issue(s)", self.issues.len())?;
        let empty = self.non_positive_boxes();
        if !empty.is_empty() {
            f.write_str("; non-positive boxes in annotation ids [")?;
            for (i, id) in empty.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{id}")?;
            }
            f.write_str("]")?;
        }
        for issue in &self.issues {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

/// A validated detection dataset. Collections are sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    images: Vec<ImageRecord>,
    annotations: Vec<Annotation>,
    categories: Vec<Category>,
}

impl Dataset {
    /// Validates the records and sorts each collection by id.
    pub fn new(
        mut images: Vec<ImageRecord>,
        mut annotations: Vec<Annotation>,
        mut categories: Vec<Category>,
    ) -> Result<Self, ValidationError> {
        let mut issues = Vec::new();

        let mut image_ids = BTreeSet::new();
        for (index, image) in images.iter().enumerate() {
            if !image_ids.insert(image.id) {
                issues.push(Issue::DuplicateId { section: Section::Images, index, id: image.id.0 });
            }
            if image.width == 0 || image.height == 0 {
                issues.push(Issue::InvalidImageSize { index, image: image.id });
            }
        }

        let mut category_ids = BTreeSet::new();
        for (index, category) in categories.iter().enumerate() {
            if !category_ids.insert(category.id) {
                issues.push(Issue::DuplicateId { section: Section::Categories, index, id: category.id.0 });
            }
        }

        let mut annotation_ids = BTreeSet::new();
        for (index, ann) in annotations.iter().enumerate() {
            if !annotation_ids.insert(ann.id) {
                issues.push(Issue::DuplicateId { section: Section::Annotations, index, id: ann.id.0 });
            }
            if !image_ids.contains(&ann.image_id) {
                issues.push(Issue::DanglingImage { index, annotation: ann.id, image: ann.image_id });
            }
            if !category_ids.contains(&ann.category_id) {
                issues.push(Issue::DanglingCategory { index, annotation: ann.id, category: ann.category_id });
            }
            if !ann.bbox.is_finite() || !ann.area.is_finite() {
                issues.push(Issue::NonFiniteBox { index, annotation: ann.id });
            } else if ann.bbox.w <= 0.0 || ann.bbox.h <= 0.0 {
                issues.push(Issue::NonPositiveBox { index, annotation: ann.id });
            }
        }

        if !issues.is_empty() {
            return Err(ValidationError { issues });
        }

        images.sort_by_key(|i| i.id);
        annotations.sort_by_key(|a| a.id);
        categories.sort_by_key(|c| c.id);
        Ok(Self { images, annotations, categories })
    }

    /// Rebuilds a dataset from parts already known to be valid and sorted.
    pub(crate) fn from_sorted_parts(
        images: Vec<ImageRecord>,
        annotations: Vec<Annotation>,
        categories: Vec<Category>,
    ) -> Self {
        debug_assert!(annotations.windows(2).all(|w| w[0].id < w[1].id));
        Self { images, annotations, categories }
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn into_parts(self) -> (Vec<ImageRecord>, Vec<Annotation>, Vec<Category>) {
        (self.images, self.annotations, self.categories)
    }

    pub fn image(&self, id: ImageId) -> Option<&ImageRecord> {
        self.images.binary_search_by_key(&id, |i| i.id).ok().map(|i| &self.images[i])
    }

    pub fn annotation(&self, id: AnnotationId) -> Option<&Annotation> {
        self.annotation_index(id).map(|i| &self.annotations[i])
    }

    pub fn annotation_index(&self, id: AnnotationId) -> Option<usize> {
        self.annotations.binary_search_by_key(&id, |a| a.id).ok()
    }

    pub fn category(&self, id: CategoryId) -> Option<&Category> {
        self.categories.binary_search_by_key(&id, |c| c.id).ok().map(|i| &self.categories[i])
    }

    /// Annotations eligible for noise injection and evaluation.
    pub fn non_crowd(&self) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(|a| !a.iscrowd)
    }

    /// Largest annotation id in use, if any.
    pub fn max_annotation_id(&self) -> Option<AnnotationId> {
        self.annotations.last().map(|a| a.id)
    }

    /// Annotations whose box extends past their image. These are accepted
    /// as-is; callers typically report them as warnings.
    pub fn out_of_bounds(&self) -> Vec<AnnotationId> {
        self.annotations
            .iter()
            .filter(|a| {
                self.image(a.image_id).is_some_and(|img| {
                    let (w, h) = img.size();
                    !a.bbox.is_within(w, h)
                })
            })
            .map(|a| a.id)
            .collect()
    }

    /// Checks detections against this dataset. Errors carry the record index.
    pub fn check_detections(&self, detections: &[Detection]) -> Result<(), DetectionError> {
        for (index, det) in detections.iter().enumerate() {
            if !det.score.is_finite() {
                return Err(DetectionError::NonFiniteScore { index });
            }
            if !det.bbox.is_finite() || det.bbox.w < 0.0 || det.bbox.h < 0.0 {
                return Err(DetectionError::InvalidBox { index });
            }
            if self.image(det.image_id).is_none() {
                return Err(DetectionError::UnknownImage { index, image: det.image_id });
            }
            if self.category(det.category_id).is_none() {
                return Err(DetectionError::UnknownCategory { index, category: det.category_id });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectionError {
    #[error("detection [{index}]: score is not finite")]
    NonFiniteScore { index: usize },
    #[error("detection [{index}]: bbox must be finite with non-negative width and height")]
    InvalidBox { index: usize },
    #[error("detection [{index}]: image_id {image} does not exist")]
    UnknownImage { index: usize, image: ImageId },
    #[error("detection [{index}]: category_id {category} does not exist")]
    UnknownCategory { index: usize, category: CategoryId },
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn image(id: u64) -> ImageRecord {
        ImageRecord { id: ImageId(id), width: 640, height: 480, file_name: "a.jpg".into() }
    }

    fn category(id: u64) -> Category {
        Category { id: CategoryId(id), name: "c".into(), supercategory: None }
    }

    fn ann(id: u64, image: u64, cat: u64, bbox: BoundingBox) -> Annotation {
        Annotation {
            id: AnnotationId(id),
            image_id: ImageId(image),
            category_id: CategoryId(cat),
            bbox,
            area: bbox.area(),
            iscrowd: false,
        }
    }

    #[test]
    fn minimal_dataset() {
        let ds = Dataset::new(
            vec![image(1)],
            vec![ann(1, 1, 1, BoundingBox::new(0.0, 0.0, 10.0, 10.0))],
            vec![category(1), category(2)],
        )
        .unwrap();
        assert_eq!((ds.images().len(), ds.annotations().len(), ds.categories().len()), (1, 1, 2));
    }

    #[test]
    fn dangling_image_reference() {
        let err = Dataset::new(
            vec![image(1)],
            vec![ann(5, 99, 1, BoundingBox::new(0.0, 0.0, 1.0, 1.0))],
            vec![category(1)],
        )
        .unwrap_err();
        assert_eq!(
            err.issues,
            vec![Issue::DanglingImage { index: 0, annotation: AnnotationId(5), image: ImageId(99) }]
        );
        let text = err.to_string();
        assert!(text.contains("annotations[0] (id 5): image_id 99"), "{text}");
    }

    #[test]
    fn non_positive_boxes_are_listed() {
        let err = Dataset::new(
            vec![image(1)],
            vec![
                ann(3, 1, 1, BoundingBox::new(0.0, 0.0, 0.0, 4.0)),
                ann(4, 1, 1, BoundingBox::new(0.0, 0.0, 4.0, 4.0)),
                ann(7, 1, 1, BoundingBox::new(0.0, 0.0, 4.0, -1.0)),
            ],
            vec![category(1)],
        )
        .unwrap_err();
        assert_eq!(err.non_positive_boxes(), vec![AnnotationId(3), AnnotationId(7)]);
        assert!(err.to_string().contains("[3, 7]"));
    }

    #[test]
    fn duplicate_ids() {
        let err = Dataset::new(vec![image(1), image(1)], vec![], vec![category(2), category(2)]).unwrap_err();
        assert_eq!(err.issues.len(), 2);
        assert!(matches!(err.issues[0], Issue::DuplicateId { section: Section::Images, index: 1, id: 1 }));
    }

    #[test]
    fn order_independent_equality() {
        let b = BoundingBox::new(1.0, 1.0, 2.0, 2.0);
        let a =
            Dataset::new(vec![image(2), image(1)], vec![ann(9, 1, 1, b), ann(2, 2, 1, b)], vec![category(1)])
                .unwrap();
        let c =
            Dataset::new(vec![image(1), image(2)], vec![ann(2, 2, 1, b), ann(9, 1, 1, b)], vec![category(1)])
                .unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn out_of_bounds_is_reported_not_rejected() {
        let ds = Dataset::new(
            vec![image(1)],
            vec![ann(1, 1, 1, BoundingBox::new(630.0, 0.0, 10.5, 5.0))],
            vec![category(1)],
        )
        .unwrap();
        assert_eq!(ds.out_of_bounds(), vec![AnnotationId(1)]);
    }

    #[test]
    fn detection_checks() {
        let ds = Dataset::new(vec![image(1)], vec![], vec![category(1)]).unwrap();
        let det = |cat: u64, score: f64| Detection {
            image_id: ImageId(1),
            category_id: CategoryId(cat),
            bbox: BoundingBox::new(0.0, 0.0, 1.0, 1.0),
            score,
        };
        assert!(ds.check_detections(&[det(1, 0.5)]).is_ok());
        assert_eq!(
            ds.check_detections(&[det(1, 0.5), det(3, 0.5)]),
            Err(DetectionError::UnknownCategory { index: 1, category: CategoryId(3) })
        );
        assert_eq!(
            ds.check_detections(&[det(1, f64::NAN)]),
            Err(DetectionError::NonFiniteScore { index: 0 })
        );
    }
}
