use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use super::boxes::{make_bogus_box, perturb_box, SizePool};
use super::log::{CorruptionEntry, InjectionLog};
use super::{
    check_delta, check_ratio, select_targets, target_count, BogusSizePolicy, NoiseConfig, NoiseError,
    NoiseKind, NoiseType,
};
use crate::bbox::BoundingBox;
use crate::dataset::{Annotation, AnnotationId, Dataset};
use crate::rng::{stream, Purpose};

type Injected = Result<(Dataset, InjectionLog), NoiseError>;

/// Runs the injector selected by `config.noise_type`.
pub fn inject(ds: &Dataset, config: &NoiseConfig) -> Injected {
    config.validate()?;
    let mut run = Run::new(ds, config);
    match config.noise_type {
        NoiseType::Categorization => run.categorize()?,
        NoiseType::Localization => run.localize(),
        NoiseType::Missing => run.remove(),
        NoiseType::Bogus => run.add_bogus()?,
        NoiseType::Una => {
            run.require_categories()?;
            run.categorize()?;
            run.localize();
            run.remove();
            run.add_bogus()?;
        }
    }
    Ok(run.finish())
}

/// Flips the category of `round(ratio * N)` annotations to a different
/// category chosen uniformly.
pub fn inject_categorization(ds: &Dataset, ratio: f64, seed: u64) -> Injected {
    inject(ds, &NoiseConfig::new(NoiseType::Categorization, ratio, seed))
}

/// Replaces the box of `round(ratio * N)` annotations with [`perturb_box`].
pub fn inject_localization(ds: &Dataset, ratio: f64, loc_delta: f64, seed: u64) -> Injected {
    check_delta(loc_delta)?;
    inject(ds, &NoiseConfig::new(NoiseType::Localization, ratio, seed).with_loc_delta(loc_delta))
}

/// Drops `round(ratio * N)` annotations.
pub fn inject_missing(ds: &Dataset, ratio: f64, seed: u64) -> Injected {
    inject(ds, &NoiseConfig::new(NoiseType::Missing, ratio, seed))
}

/// Adds `round(ratio * N)` bogus boxes, each on a uniformly chosen image.
pub fn inject_bogus(ds: &Dataset, ratio: f64, seed: u64, policy: BogusSizePolicy) -> Injected {
    inject(ds, &NoiseConfig::new(NoiseType::Bogus, ratio, seed).with_bogus_size_policy(policy))
}

/// All four kinds at the same ratio.
///
/// The categorization, localization and missing targets are drawn
/// independently from the original pool. Category flips are applied first,
/// then box perturbations (one annotation may get both), then removals,
/// which override earlier corruption of the same annotation. Finally
/// `round(ratio * N)` bogus boxes are added, so the annotation count is
/// unchanged.
pub fn inject_una(ds: &Dataset, ratio: f64, loc_delta: f64, seed: u64, policy: BogusSizePolicy) -> Injected {
    let config = NoiseConfig::new(NoiseType::Una, ratio, seed)
        .with_loc_delta(loc_delta)
        .with_bogus_size_policy(policy);
    inject(ds, &config)
}

struct Run<'a> {
    input: &'a Dataset,
    config: &'a NoiseConfig,
    k: usize,
    annotations: Vec<Annotation>,
    entries: BTreeMap<AnnotationId, CorruptionEntry>,
    removed: Vec<AnnotationId>,
    added: Vec<AnnotationId>,
}

impl<'a> Run<'a> {
    fn new(input: &'a Dataset, config: &'a NoiseConfig) -> Self {
        debug_assert!(check_ratio(config.ratio).is_ok());
        let pool = input.non_crowd().count();
        Self {
            input,
            config,
            k: target_count(config.ratio, pool),
            annotations: input.annotations().to_vec(),
            entries: BTreeMap::new(),
            removed: Vec::new(),
            added: Vec::new(),
        }
    }

    fn require_categories(&self) -> Result<(), NoiseError> {
        let n = self.input.categories().len();
        if n < 2 {
            Err(NoiseError::TooFewCategories(n))
        } else {
            Ok(())
        }
    }

    fn targets(&self, kind: NoiseKind) -> Vec<AnnotationId> {
        select_targets(self.input, self.config.ratio, self.config.seed, kind)
    }

    /// Position of `id` in the working copy. Only valid before removals.
    fn slot(&self, id: AnnotationId) -> usize {
        self.input.annotation_index(id).expect("target ids come from the input")
    }

    fn categorize(&mut self) -> Result<(), NoiseError> {
        self.require_categories()?;
        let categories = self.input.categories();
        for id in self.targets(NoiseKind::Categorization) {
            let slot = self.slot(id);
            let ann = &mut self.annotations[slot];
            let original = ann.category_id;
            let mut rng = stream(self.config.seed, Purpose::CategoryFlip, id.0);
            // uniform over the other categories: draw from n-1 slots and
            // skip over the original
            let original_pos =
                categories.binary_search_by_key(&original, |c| c.id).expect("validated reference");
            let mut pick = rng.random_range(0..categories.len() - 1);
            if pick >= original_pos {
                pick += 1;
            }
            ann.category_id = categories[pick].id;

            let entry = self.entries.entry(id).or_insert_with(|| CorruptionEntry::new(id));
            entry.original_category = Some(original);
            entry.new_category = Some(ann.category_id);
        }
        Ok(())
    }

    fn localize(&mut self) {
        let targets = self.targets(NoiseKind::Localization);
        let input = self.input;
        let (seed, delta) = (self.config.seed, self.config.loc_delta);
        let perturb = |id: &AnnotationId| -> BoundingBox {
            let ann = input.annotation(*id).expect("target ids come from the input");
            let image = input.image(ann.image_id).expect("validated reference");
            let mut rng = stream(seed, Purpose::BoxPerturb, id.0);
            perturb_box(&ann.bbox, image, delta, &mut rng)
        };

        #[cfg(feature = "parallel")]
        let boxes: Vec<BoundingBox> = {
            use rayon::prelude::*;
            targets.par_iter().map(perturb).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let boxes: Vec<BoundingBox> = targets.iter().map(perturb).collect();

        for (id, bbox) in targets.into_iter().zip(boxes) {
            let slot = self.slot(id);
            let ann = &mut self.annotations[slot];
            let original = ann.bbox;
            ann.bbox = bbox;
            ann.area = bbox.area();

            let entry = self.entries.entry(id).or_insert_with(|| CorruptionEntry::new(id));
            entry.original_bbox = Some(original);
            entry.new_bbox = Some(bbox);
        }
    }

    fn remove(&mut self) {
        let targets = self.targets(NoiseKind::Missing);
        self.annotations.retain(|a| targets.binary_search(&a.id).is_err());
        self.removed = targets;
    }

    fn add_bogus(&mut self) -> Result<(), NoiseError> {
        if self.k == 0 {
            return Ok(());
        }
        let images = self.input.images();
        let categories = self.input.categories();
        if images.is_empty() || categories.is_empty() {
            return Err(NoiseError::NothingToPlace);
        }
        let sizes = SizePool::from_dataset(self.input);
        let first_id = self.input.max_annotation_id().map_or(1, |id| id.0 + 1);
        for draw in 0..self.k as u64 {
            let mut rng = stream(self.config.seed, Purpose::BogusBox, draw);
            let image = &images[rng.random_range(0..images.len())];
            let id = AnnotationId(first_id + draw);
            let ann = make_bogus_box(image, &sizes, categories, self.config.bogus_size_policy, id, &mut rng);
            self.annotations.push(ann);
            self.added.push(id);
        }
        Ok(())
    }

    fn finish(self) -> (Dataset, InjectionLog) {
        let pool = self.input.non_crowd().count();
        let mut log = InjectionLog::empty(self.config.clone(), pool, self.k);
        log.corrupted = self.entries.into_values().collect();
        log.removed = self.removed;
        log.added = self.added;
        let ds = Dataset::from_sorted_parts(
            self.input.images().to_vec(),
            self.annotations,
            self.input.categories().to_vec(),
        );
        (ds, log)
    }
}
