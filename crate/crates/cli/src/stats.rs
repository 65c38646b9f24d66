use una_core::{CategoryId, Dataset};

/// Quantile levels reported for box sizes.
pub const QUANTILES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryCount {
    pub id: CategoryId,
    pub name: String,
    pub annotations: usize,
    pub crowd: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub images: usize,
    pub annotations: usize,
    pub crowd: usize,
    pub categories: Vec<CategoryCount>,
    /// Box width, height and area at each of [`QUANTILES`], over non-crowd
    /// annotations. `None` when there are none.
    pub width: Option<[f64; 5]>,
    pub height: Option<[f64; 5]>,
    pub area: Option<[f64; 5]>,
    pub out_of_bounds: usize,
}

/// Linear interpolation between closest ranks; `sorted` must be non-empty.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn quantiles(mut values: Vec<f64>) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(QUANTILES.map(|q| quantile(&values, q)))
}

pub fn dataset_stats(ds: &Dataset) -> DatasetStats {
    let mut categories: Vec<CategoryCount> = ds
        .categories()
        .iter()
        .map(|c| CategoryCount { id: c.id, name: c.name.clone(), annotations: 0, crowd: 0 })
        .collect();
    for a in ds.annotations() {
        let slot = categories
            .binary_search_by_key(&a.category_id, |c| c.id)
            .expect("annotations reference known categories");
        categories[slot].annotations += 1;
        categories[slot].crowd += a.iscrowd as usize;
    }
    let boxes: Vec<_> = ds.non_crowd().map(|a| a.bbox).collect();
    DatasetStats {
        images: ds.images().len(),
        annotations: ds.annotations().len(),
        crowd: ds.annotations().iter().filter(|a| a.iscrowd).count(),
        categories,
        width: quantiles(boxes.iter().map(|b| b.w).collect()),
        height: quantiles(boxes.iter().map(|b| b.h).collect()),
        area: quantiles(boxes.iter().map(|b| b.area()).collect()),
        out_of_bounds: ds.out_of_bounds().len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        assert_eq!(quantiles(vec![4.0, 1.0, 3.0, 2.0]), Some([1.0, 1.75, 2.5, 3.25, 4.0]));
        assert_eq!(quantiles(vec![7.0]), Some([7.0; 5]));
        assert_eq!(quantiles(Vec::new()), None);
    }

    #[test]
    fn empty_dataset() {
        let s = dataset_stats(&Dataset::default());
        assert_eq!((s.images, s.annotations, s.crowd), (0, 0, 0));
        assert!(s.width.is_none() && s.categories.is_empty());
    }
}
