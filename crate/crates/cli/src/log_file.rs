//! The `.log.json` sidecar written next to every injected dataset.
//!
//! ```json
//! {
//!   "format": "una-injection-log",
//!   "version": 1,
//!   "config": {"noise_type": "una", "ratio": 0.2, "seed": 42,
//!              "loc_delta": 0.4, "bogus_size_policy": "sample_existing"},
//!   "pool_size": 1000,
//!   "target_count": 200,
//!   "counts": {"categorization": 200, "localization": 200, "missing": 200, "bogus": 200},
//!   "corrupted": [{"id": 7, "kinds": ["categorization"],
//!                  "original_category_id": 3, "new_category_id": 5}, ...],
//!   "removed": [12, ...],
//!   "added": [1001, ...]
//! }
//! ```
//!
//! `corrupted` is sorted by id; `original_bbox` / `new_bbox` appear only on
//! localization entries. `removed` and `added` are sorted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use una_core::noise::{CorruptionEntry, NoiseConfig};
use una_core::{AnnotationId, BoundingBox, CategoryId, InjectionLog, NoiseKind};

const FORMAT: &str = "una-injection-log";
const VERSION: u32 = 1;

/// `data.json` -> `data.log.json`; other names get `.log.json` appended.
pub fn log_path(out: &Path) -> PathBuf {
    match out.extension() {
        Some(ext) if ext == "json" => out.with_extension("log.json"),
        _ => {
            let mut name = out.as_os_str().to_owned();
            name.push(".log.json");
            PathBuf::from(name)
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogDoc {
    format: String,
    version: u32,
    config: ConfigDoc,
    pool_size: usize,
    target_count: usize,
    counts: CountsDoc,
    corrupted: Vec<EntryDoc>,
    removed: Vec<u64>,
    added: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    noise_type: String,
    ratio: f64,
    seed: u64,
    loc_delta: f64,
    bogus_size_policy: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountsDoc {
    categorization: usize,
    localization: usize,
    missing: usize,
    bogus: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    id: u64,
    kinds: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    original_category_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    new_category_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    original_bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    new_bbox: Option<[f64; 4]>,
}

fn xywh(b: &BoundingBox) -> [f64; 4] {
    [b.x, b.y, b.w, b.h]
}

fn from_xywh(v: [f64; 4]) -> BoundingBox {
    BoundingBox::new(v[0], v[1], v[2], v[3])
}

pub fn serialize_log(log: &InjectionLog) -> Vec<u8> {
    let c = &log.config;
    let doc = LogDoc {
        format: FORMAT.into(),
        version: VERSION,
        config: ConfigDoc {
            noise_type: c.noise_type.as_str().into(),
            ratio: c.ratio,
            seed: c.seed,
            loc_delta: c.loc_delta,
            bogus_size_policy: c.bogus_size_policy.as_str().into(),
        },
        pool_size: log.pool_size,
        target_count: log.target_count,
        counts: CountsDoc {
            categorization: log.count(NoiseKind::Categorization),
            localization: log.count(NoiseKind::Localization),
            missing: log.count(NoiseKind::Missing),
            bogus: log.count(NoiseKind::Bogus),
        },
        corrupted: log
            .corrupted
            .iter()
            .map(|e| EntryDoc {
                id: e.id.0,
                kinds: e.kinds().iter().map(|k| k.as_str().to_string()).collect(),
                original_category_id: e.original_category.map(|c| c.0),
                new_category_id: e.new_category.map(|c| c.0),
                original_bbox: e.original_bbox.as_ref().map(xywh),
                new_bbox: e.new_bbox.as_ref().map(xywh),
            })
            .collect(),
        removed: log.removed.iter().map(|id| id.0).collect(),
        added: log.added.iter().map(|id| id.0).collect(),
    };
    let mut out = serde_json::to_vec(&doc).expect("log values are finite");
    out.push(b'\n');
    out
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("malformed injection log: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not an injection log (format `{0}`)")]
    Format(String),
    #[error("unsupported injection log version {0}")]
    Version(u32),
    #[error("injection log: {0}")]
    Value(String),
}

pub fn parse_log(bytes: &[u8]) -> Result<InjectionLog, LogError> {
    let doc: LogDoc = serde_json::from_slice(bytes)?;
    if doc.format != FORMAT {
        return Err(LogError::Format(doc.format));
    }
    if doc.version != VERSION {
        return Err(LogError::Version(doc.version));
    }
    let value = |e: una_core::noise::ParseNameError| LogError::Value(e.to_string());
    let config =
        NoiseConfig::new(doc.config.noise_type.parse().map_err(value)?, doc.config.ratio, doc.config.seed)
            .with_loc_delta(doc.config.loc_delta)
            .with_bogus_size_policy(doc.config.bogus_size_policy.parse().map_err(value)?);

    let corrupted = doc
        .corrupted
        .into_iter()
        .map(|e| CorruptionEntry {
            id: AnnotationId(e.id),
            original_category: e.original_category_id.map(CategoryId),
            new_category: e.new_category_id.map(CategoryId),
            original_bbox: e.original_bbox.map(from_xywh),
            new_bbox: e.new_bbox.map(from_xywh),
        })
        .collect();
    let log = InjectionLog {
        config,
        pool_size: doc.pool_size,
        target_count: doc.target_count,
        corrupted,
        removed: doc.removed.into_iter().map(AnnotationId).collect(),
        added: doc.added.into_iter().map(AnnotationId).collect(),
    };
    let counts = [
        (NoiseKind::Categorization, doc.counts.categorization),
        (NoiseKind::Localization, doc.counts.localization),
        (NoiseKind::Missing, doc.counts.missing),
        (NoiseKind::Bogus, doc.counts.bogus),
    ];
    for (kind, stated) in counts {
        if log.count(kind) != stated {
            return Err(LogError::Value(format!(
                "counts.{kind} is {stated} but the log lists {} events",
                log.count(kind)
            )));
        }
    }
    Ok(log)
}
