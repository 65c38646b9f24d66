//! Annotation-noise injection and detection evaluation for COCO-style datasets.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs: the noise injectors draw from counter-based
//! ChaCha8 streams keyed by `(seed, purpose, item)`, so their output does not
//! depend on record order or on how the work is split across threads.
//!
//! Modules:
//! - [`bbox`] and [`dataset`]: domain types and validation.
//! - [`noise`]: categorization, localization, missing and bogus-box noise, and
//!   their union ("UNA") at a single ratio.
//! - [`metrics`]: IoU, greedy matching, 101-point interpolated AP and the
//!   AP / AP50 / AP75 summary.
//! - [`tide`]: error decomposition into Cls, Loc, Both, Dupe, Bkg and Miss with
//!   oracle AP and ΔAP per component.
//!
//! Enable the `parallel` feature to spread per-item work over rayon.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bbox;
pub mod dataset;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod tide;

pub use bbox::BoundingBox;
pub use dataset::{
    Annotation, AnnotationId, Category, CategoryId, Dataset, Detection, DetectionError, ImageId, ImageRecord,
    Issue, ValidationError,
};
pub use metrics::{average_precision, evaluate, iou, match_greedy, EvalSummary, MatchResult};
pub use noise::{BogusSizePolicy, InjectionLog, NoiseConfig, NoiseError, NoiseKind, NoiseType};
pub use tide::{tide_report, ErrorKind, TideError, TideReport};
