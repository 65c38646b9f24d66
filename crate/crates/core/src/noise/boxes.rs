use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use super::BogusSizePolicy;
use crate::bbox::BoundingBox;
use crate::dataset::{Annotation, AnnotationId, Category, Dataset, ImageId, ImageRecord};

/// Draws before falling back to a forced minimum-size box.
const MAX_PERTURB_ATTEMPTS: usize = 64;
/// Smallest side length, in pixels, of any box the injectors write.
const MIN_SIDE: f64 = 1.0;
/// Side range of `UniformFraction` bogus boxes, relative to the image.
const FRACTION_RANGE: (f64, f64) = (0.05, 0.5);

/// Localization noise for one box.
///
/// The center moves by `(u1 * delta * w, u2 * delta * h)` and the size is
/// scaled by `(1 + u3 * delta, 1 + u4 * delta)` with each `u` uniform on
/// `[-1, 1]`. The result is clipped to the image. Draws that leave a side
/// under one pixel, or whose IoU with the input is not strictly between 0
/// and 1, are redrawn; after [`MAX_PERTURB_ATTEMPTS`] the last draw is grown
/// to one pixel in place.
pub fn perturb_box<R: Rng + ?Sized>(
    b: &BoundingBox,
    img: &ImageRecord,
    delta: f64,
    rng: &mut R,
) -> BoundingBox {
    let (width, height) = img.size();
    let (cx, cy) = b.center();
    let mut last = *b;
    for _ in 0..MAX_PERTURB_ATTEMPTS {
        let u: [f64; 4] = core::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        let w = b.w * (1.0 + u[2] * delta);
        let h = b.h * (1.0 + u[3] * delta);
        let ncx = cx + u[0] * delta * b.w;
        let ncy = cy + u[1] * delta * b.h;
        let candidate = BoundingBox::new(ncx - w / 2.0, ncy - h / 2.0, w, h).clip(width, height);
        if candidate.w >= MIN_SIDE && candidate.h >= MIN_SIDE {
            let overlap = b.iou(&candidate);
            if overlap > 0.0 && overlap < 1.0 {
                return candidate;
            }
        }
        last = candidate;
    }
    last.with_min_side(MIN_SIDE, width, height)
}

/// Existing box sizes, per image and dataset-wide, for
/// [`BogusSizePolicy::SampleExisting`].
#[derive(Debug, Clone, Default)]
pub struct SizePool {
    by_image: BTreeMap<ImageId, Vec<(f64, f64)>>,
    all: Vec<(f64, f64)>,
}

impl SizePool {
    /// Collects the sizes of all non-crowd annotations, in id order.
    pub fn from_dataset(ds: &Dataset) -> Self {
        let mut pool = Self::default();
        for ann in ds.non_crowd() {
            let size = (ann.bbox.w, ann.bbox.h);
            pool.by_image.entry(ann.image_id).or_default().push(size);
            pool.all.push(size);
        }
        pool
    }

    /// Sizes on `image` if there are any, otherwise every size in the dataset.
    fn candidates(&self, image: ImageId) -> &[(f64, f64)] {
        match self.by_image.get(&image) {
            Some(sizes) if !sizes.is_empty() => sizes,
            _ => &self.all,
        }
    }
}

/// Pre-clip `(w, h)` of a bogus box on `img`.
pub fn bogus_size<R: Rng + ?Sized>(
    img: &ImageRecord,
    sizes: &SizePool,
    policy: BogusSizePolicy,
    rng: &mut R,
) -> (f64, f64) {
    let candidates = sizes.candidates(img.id);
    match policy {
        BogusSizePolicy::SampleExisting if !candidates.is_empty() => {
            candidates[rng.random_range(0..candidates.len())]
        }
        _ => {
            let (width, height) = img.size();
            let (lo, hi) = FRACTION_RANGE;
            (rng.random_range(lo..=hi) * width, rng.random_range(lo..=hi) * height)
        }
    }
}

/// A bogus annotation on `img` with a uniformly chosen category and a center
/// uniform over the image. Draw order: category, center x, center y, size.
///
/// `categories` must be non-empty.
pub fn make_bogus_box<R: Rng + ?Sized>(
    img: &ImageRecord,
    sizes: &SizePool,
    categories: &[Category],
    policy: BogusSizePolicy,
    id: AnnotationId,
    rng: &mut R,
) -> Annotation {
    let (width, height) = img.size();
    let category = &categories[rng.random_range(0..categories.len())];
    let cx = rng.random::<f64>() * width;
    let cy = rng.random::<f64>() * height;

    let (w, h) = bogus_size(img, sizes, policy, rng);
    let bbox = BoundingBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
        .clip(width, height)
        .with_min_side(MIN_SIDE, width, height);
    Annotation { id, image_id: img.id, category_id: category.id, bbox, area: bbox.area(), iscrowd: false }
}
