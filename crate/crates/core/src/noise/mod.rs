//! Synthetic annotation noise.
//!
//! Four kinds of corruption are supported, each hitting exactly
//! `round(r * N)` items where `N` is the number of non-crowd annotations in
//! the input:
//!
//! - categorization: the category is replaced by a different one, uniformly;
//! - localization: the box is shifted and rescaled by at most `loc_delta`
//!   of its own size ([`perturb_box`]);
//! - missing: the annotation is dropped;
//! - bogus: a box of a random category at a random position is added
//!   ([`make_bogus_box`]).
//!
//! [`NoiseType::Una`] applies all four at the same ratio. Crowd annotations
//! pass through untouched and are never selected.

mod boxes;
mod inject;
mod log;

use core::fmt;
use core::str::FromStr;

use alloc::vec::Vec;

pub use boxes::{bogus_size, make_bogus_box, perturb_box, SizePool};
pub use inject::{
    inject, inject_bogus, inject_categorization, inject_localization, inject_missing, inject_una,
};
pub use log::{CorruptionEntry, InjectionLog};

use crate::dataset::{AnnotationId, Dataset};
use crate::rng::{self, Purpose};

/// Default relative magnitude of localization noise.
pub const DEFAULT_LOC_DELTA: f64 = 0.4;

/// Which injector to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseType {
    Categorization,
    Localization,
    Missing,
    Bogus,
    Una,
}

/// A single kind of corruption event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoiseKind {
    Categorization,
    Localization,
    Missing,
    Bogus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BogusSizePolicy {
    /// Copy `(w, h)` from an existing annotation, preferring the same image.
    #[default]
    SampleExisting,
    /// Width and height uniform in `[0.05, 0.5]` of the image dimensions.
    UniformFraction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub noise_type: NoiseType,
    pub ratio: f64,
    pub seed: u64,
    pub loc_delta: f64,
    pub bogus_size_policy: BogusSizePolicy,
}

impl NoiseConfig {
    pub fn new(noise_type: NoiseType, ratio: f64, seed: u64) -> Self {
        Self {
            noise_type,
            ratio,
            seed,
            loc_delta: DEFAULT_LOC_DELTA,
            bogus_size_policy: BogusSizePolicy::default(),
        }
    }

    pub fn with_loc_delta(mut self, loc_delta: f64) -> Self {
        self.loc_delta = loc_delta;
        self
    }

    pub fn with_bogus_size_policy(mut self, policy: BogusSizePolicy) -> Self {
        self.bogus_size_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        check_ratio(self.ratio)?;
        check_delta(self.loc_delta)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NoiseError {
    #[error("ratio must be in [0, 1], got {0}")]
    InvalidRatio(f64),
    #[error("loc-delta must be in (0, 1), got {0}")]
    InvalidLocDelta(f64),
    #[error("categorization noise needs at least 2 categories, dataset has {0}")]
    TooFewCategories(usize),
    #[error("bogus boxes need at least one image and one category")]
    NothingToPlace,
}

pub(crate) fn check_ratio(ratio: f64) -> Result<(), NoiseError> {
    if (0.0..=1.0).contains(&ratio) {
        Ok(())
    } else {
        Err(NoiseError::InvalidRatio(ratio))
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<(), NoiseError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(NoiseError::InvalidLocDelta(delta))
    }
}

/// `round(ratio * pool)` with halves rounded up.
///
/// A 1e-9 slack absorbs binary representation error so that, for example,
/// `0.15 * 10` counts as the half it is meant to be.
pub fn target_count(ratio: f64, pool: usize) -> usize {
    let exact = ratio * pool as f64;
    let k = libm::floor(exact + 0.5 + 1e-9) as usize;
    k.min(pool)
}

/// Picks exactly [`target_count`] distinct non-crowd annotation ids.
///
/// Each annotation gets a priority from the stream keyed by
/// `(seed, kind, annotation id)`; the `k` lowest priorities win (ties by id).
/// The result is sorted by id and does not depend on record order.
pub fn select_targets(ds: &Dataset, ratio: f64, seed: u64, kind: NoiseKind) -> Vec<AnnotationId> {
    let pool: Vec<AnnotationId> = ds.non_crowd().map(|a| a.id).collect();
    let k = target_count(ratio, pool.len());
    if k == 0 {
        return Vec::new();
    }
    let priority = |id: &AnnotationId| {
        use rand::RngCore;
        (rng::stream(seed, Purpose::Select(kind), id.0).next_u64(), *id)
    };

    #[cfg(feature = "parallel")]
    let mut ranked: Vec<(u64, AnnotationId)> = {
        use rayon::prelude::*;
        pool.par_iter().map(priority).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut ranked: Vec<(u64, AnnotationId)> = pool.iter().map(priority).collect();

    if k < ranked.len() {
        ranked.select_nth_unstable(k);
        ranked.truncate(k);
    }
    let mut ids: Vec<AnnotationId> = ranked.into_iter().map(|(_, id)| id).collect();
    ids.sort_unstable();
    ids
}

impl NoiseType {
    pub const ALL: [NoiseType; 5] = [
        NoiseType::Categorization,
        NoiseType::Localization,
        NoiseType::Missing,
        NoiseType::Bogus,
        NoiseType::Una,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseType::Categorization => "categorization",
            NoiseType::Localization => "localization",
            NoiseType::Missing => "missing",
            NoiseType::Bogus => "bogus",
            NoiseType::Una => "una",
        }
    }

    /// Whether `loc_delta` has any effect for this type.
    pub fn uses_loc_delta(self) -> bool {
        matches!(self, NoiseType::Localization | NoiseType::Una)
    }

    /// Whether `bogus_size_policy` has any effect for this type.
    pub fn uses_bogus_policy(self) -> bool {
        matches!(self, NoiseType::Bogus | NoiseType::Una)
    }
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] =
        [NoiseKind::Categorization, NoiseKind::Localization, NoiseKind::Missing, NoiseKind::Bogus];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Categorization => "categorization",
            NoiseKind::Localization => "localization",
            NoiseKind::Missing => "missing",
            NoiseKind::Bogus => "bogus",
        }
    }
}

impl BogusSizePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            BogusSizePolicy::SampleExisting => "sample_existing",
            BogusSizePolicy::UniformFraction => "uniform_fraction",
        }
    }
}

/// Error returned when parsing an enum name fails.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {what} `{value}` (expected one of: {expected})")]
pub struct ParseNameError {
    pub what: &'static str,
    pub value: alloc::string::String,
    pub expected: &'static str,
}

impl FromStr for NoiseType {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoiseType::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| ParseNameError {
            what: "noise type",
            value: s.into(),
            expected: "categorization, localization, missing, bogus, una",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoiseKind::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| ParseNameError {
            what: "noise kind",
            value: s.into(),
            expected: "categorization, localization, missing, bogus",
        })
    }
}

impl FromStr for BogusSizePolicy {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sample_existing" => Ok(BogusSizePolicy::SampleExisting),
            "uniform_fraction" => Ok(BogusSizePolicy::UniformFraction),
            _ => Err(ParseNameError {
                what: "bogus size policy",
                value: s.into(),
                expected: "sample_existing, uniform_fraction",
            }),
        }
    }
}

impl fmt::Display for NoiseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for BogusSizePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
