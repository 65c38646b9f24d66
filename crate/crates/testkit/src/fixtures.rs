use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use una_core::{
    Annotation, AnnotationId, BoundingBox, Category, CategoryId, Dataset, Detection, ImageId, ImageRecord,
};

pub fn image(id: u64, width: u32, height: u32) -> ImageRecord {
    ImageRecord { id: ImageId(id), width, height, file_name: format!("{id:012}.jpg") }
}

pub fn category(id: u64) -> Category {
    Category { id: CategoryId(id), name: format!("class{id}"), supercategory: None }
}

pub fn ann(id: u64, image: u64, cat: u64, bbox: [f64; 4]) -> Annotation {
    let bbox = BoundingBox::new(bbox[0], bbox[1], bbox[2], bbox[3]);
    Annotation {
        id: AnnotationId(id),
        image_id: ImageId(image),
        category_id: CategoryId(cat),
        bbox,
        area: bbox.area(),
        iscrowd: false,
    }
}

pub fn det(image: u64, cat: u64, bbox: [f64; 4], score: f64) -> Detection {
    Detection {
        image_id: ImageId(image),
        category_id: CategoryId(cat),
        bbox: BoundingBox::new(bbox[0], bbox[1], bbox[2], bbox[3]),
        score,
    }
}

/// Detections that reproduce every non-crowd annotation exactly, score 1.
pub fn perfect_detections(ds: &Dataset) -> Vec<Detection> {
    ds.non_crowd()
        .map(|a| Detection { image_id: a.image_id, category_id: a.category_id, bbox: a.bbox, score: 1.0 })
        .collect()
}

fn random_box<R: Rng>(rng: &mut R, width: u32, height: u32) -> [f64; 4] {
    let w = rng.random_range(1..=width.min(12)) as f64;
    let h = rng.random_range(1..=height.min(12)) as f64;
    let x = rng.random_range(0.0..=(width as f64 - w));
    let y = rng.random_range(0.0..=(height as f64 - h));
    [x, y, w, h]
}

/// A small evaluation problem: at most 5 images, 6 ground truths,
/// 8 detections and 3 categories, on 24x24 images so boxes overlap often.
/// Scores are distinct. Some ground truths are crowd regions.
pub fn micro_instance(seed: u64) -> (Dataset, Vec<Detection>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_images = rng.random_range(1..=5u64);
    let n_cats = rng.random_range(1..=3u64);
    let n_gt = rng.random_range(0..=6u64);
    let n_det = rng.random_range(0..=8usize);

    let images: Vec<_> = (1..=n_images).map(|i| image(i, 24, 24)).collect();
    let categories: Vec<_> = (1..=n_cats).map(category).collect();
    let annotations: Vec<_> = (1..=n_gt)
        .map(|id| {
            let mut a = ann(
                id * 3,
                rng.random_range(1..=n_images),
                rng.random_range(1..=n_cats),
                random_box(&mut rng, 24, 24),
            );
            a.iscrowd = rng.random_bool(0.1);
            a
        })
        .collect();

    let mut scores: Vec<u32> = (1..=n_det as u32).collect();
    scores.shuffle(&mut rng);
    let dets = scores
        .into_iter()
        .map(|s| {
            let score = f64::from(s) / 10.0;
            // half of the detections start from a ground-truth box
            if !annotations.is_empty() && rng.random_bool(0.5) {
                let a = &annotations[rng.random_range(0..annotations.len())];
                let jitter = |rng: &mut StdRng| rng.random_range(-2i32..=2) as f64;
                let x = (a.bbox.x + jitter(&mut rng)).max(0.0);
                let y = (a.bbox.y + jitter(&mut rng)).max(0.0);
                let w = (a.bbox.w + jitter(&mut rng)).max(1.0);
                let h = (a.bbox.h + jitter(&mut rng)).max(1.0);
                let cat = if rng.random_bool(0.8) { a.category_id.0 } else { rng.random_range(1..=n_cats) };
                det(a.image_id.0, cat, [x, y, w, h], score)
            } else {
                det(
                    rng.random_range(1..=n_images),
                    rng.random_range(1..=n_cats),
                    random_box(&mut rng, 24, 24),
                    score,
                )
            }
        })
        .collect();

    let ds = Dataset::new(images, annotations, categories).expect("generated dataset is valid");
    (ds, dets)
}

/// A small dataset for noise-injection sweeps: 1-5 images of varied size,
/// 2-4 categories, up to 12 annotations (some crowd, some touching the
/// image border, some smaller than two pixels).
pub fn micro_dataset(seed: u64) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_images = rng.random_range(1..=5u64);
    let n_cats = rng.random_range(2..=4u64);
    let images: Vec<_> =
        (1..=n_images).map(|i| image(i, rng.random_range(8..=200), rng.random_range(8..=200))).collect();
    let categories: Vec<_> = (1..=n_cats).map(|c| category(c * 7)).collect();
    let n_ann = rng.random_range(0..=12u64);
    let annotations = (0..n_ann)
        .map(|k| {
            let img = &images[rng.random_range(0..images.len())];
            let (iw, ih) = (img.width as f64, img.height as f64);
            let bbox = match rng.random_range(0..4) {
                0 => [0.0, 0.0, iw, ih],
                1 => [iw - 1.5, ih - 1.5, 1.5, 1.5],
                _ => {
                    let w = rng.random_range(1.0..=iw);
                    let h = rng.random_range(1.0..=ih);
                    [rng.random_range(0.0..=iw - w), rng.random_range(0.0..=ih - h), w, h]
                }
            };
            let mut a = ann(100 + k * 2, img.id.0, rng.random_range(1..=n_cats) * 7, bbox);
            a.iscrowd = rng.random_bool(0.1);
            a
        })
        .collect();
    Dataset::new(images, annotations, categories).expect("generated dataset is valid")
}

/// `n_annotations` boxes spread over `n_images` 640x480 images and
/// `n_categories` categories. Annotation ids are 1..=n.
pub fn synthetic_dataset(n_annotations: usize, n_images: usize, n_categories: usize, seed: u64) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let images: Vec<_> = (1..=n_images as u64).map(|i| image(i, 640, 480)).collect();
    let categories: Vec<_> = (1..=n_categories as u64).map(category).collect();
    let annotations = (1..=n_annotations as u64)
        .map(|id| {
            let w = rng.random_range(4.0..200.0);
            let h = rng.random_range(4.0..200.0);
            let x = rng.random_range(0.0..640.0 - w);
            let y = rng.random_range(0.0..480.0 - h);
            ann(
                id,
                rng.random_range(1..=n_images as u64),
                rng.random_range(1..=n_categories as u64),
                [x, y, w, h],
            )
        })
        .collect();
    Dataset::new(images, annotations, categories).expect("generated dataset is valid")
}

/// Noisy copies of ground-truth boxes mixed with random boxes.
pub fn synthetic_detections(ds: &Dataset, n: usize, seed: u64) -> Vec<Detection> {
    let mut rng = StdRng::seed_from_u64(seed);
    let anns = ds.annotations();
    let n_images = ds.images().len() as u64;
    let n_cats = ds.categories().len() as u64;
    (0..n)
        .map(|_| {
            let score = rng.random::<f64>();
            if !anns.is_empty() && rng.random_bool(0.6) {
                let a = &anns[rng.random_range(0..anns.len())];
                let s = a.bbox.w.min(a.bbox.h) * 0.15;
                let b = [
                    (a.bbox.x + rng.random_range(-s..=s)).max(0.0),
                    (a.bbox.y + rng.random_range(-s..=s)).max(0.0),
                    a.bbox.w,
                    a.bbox.h,
                ];
                det(a.image_id.0, a.category_id.0, b, score)
            } else {
                let w = rng.random_range(4.0..200.0);
                let h = rng.random_range(4.0..200.0);
                det(
                    rng.random_range(1..=n_images),
                    rng.random_range(1..=n_cats),
                    [rng.random_range(0.0..440.0), rng.random_range(0.0..280.0), w, h],
                    score,
                )
            }
        })
        .collect()
}
