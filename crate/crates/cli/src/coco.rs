//! COCO instances files and COCO results files.
//!
//! Only the fields the toolkit uses are read; anything else (`info`,
//! `licenses`, `segmentation`, ...) is ignored and not written back.
//!
//! [`serialize_dataset`] writes one compact JSON document with a fixed
//! layout so that equal datasets give identical bytes:
//!
//! - top level: `images`, `annotations`, `categories`, each sorted by id;
//! - image: `id`, `width`, `height`, `file_name`;
//! - annotation: `id`, `image_id`, `category_id`, `bbox` (`[x, y, w, h]`),
//!   `area`, `iscrowd` (`0` or `1`);
//! - category: `id`, `name`, then `supercategory` when present.
//!
//! Floats use the shortest decimal that reads back to the same value, and
//! the document ends with a newline.

use serde::Serialize;
use serde_json::{Map, Value};

use una_core::{
    Annotation, AnnotationId, BoundingBox, Category, CategoryId, Dataset, Detection, DetectionError, ImageId,
    ImageRecord, ValidationError,
};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("{0}")]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

fn field_error(path: &str, message: impl Into<String>) -> FormatError {
    FormatError::Field { path: path.to_string(), message: message.into() }
}

/// A JSON object together with its location, for error messages.
struct Record<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl<'a> Record<'a> {
    fn new(path: String, value: &'a Value) -> Result<Self, FormatError> {
        match value {
            Value::Object(map) => Ok(Record { path, map }),
            _ => Err(field_error(&path, "expected an object")),
        }
    }

    fn field_path(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn get(&self, key: &str) -> Result<&'a Value, FormatError> {
        self.map.get(key).ok_or_else(|| field_error(&self.path, format!("missing field `{key}`")))
    }

    fn id(&self, key: &str) -> Result<u64, FormatError> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| field_error(&self.field_path(key), "expected a non-negative integer"))
    }

    fn dimension(&self, key: &str) -> Result<u32, FormatError> {
        self.get(key)?
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| field_error(&self.field_path(key), "expected a non-negative 32-bit integer"))
    }

    fn number(&self, key: &str) -> Result<f64, FormatError> {
        self.get(key)?.as_f64().ok_or_else(|| field_error(&self.field_path(key), "expected a number"))
    }

    fn string(&self, key: &str) -> Result<String, FormatError> {
        self.get(key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| field_error(&self.field_path(key), "expected a string"))
    }

    fn bbox(&self) -> Result<BoundingBox, FormatError> {
        let path = self.field_path("bbox");
        let values = self
            .get("bbox")?
            .as_array()
            .filter(|a| a.len() == 4)
            .ok_or_else(|| field_error(&path, "expected [x, y, w, h]"))?;
        let mut xywh = [0.0; 4];
        for (slot, v) in xywh.iter_mut().zip(values) {
            *slot = v.as_f64().ok_or_else(|| field_error(&path, "expected [x, y, w, h]"))?;
        }
        Ok(BoundingBox::new(xywh[0], xywh[1], xywh[2], xywh[3]))
    }

    fn crowd(&self) -> Result<bool, FormatError> {
        match self.map.get("iscrowd") {
            None | Some(Value::Null) => Ok(false),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => match v.as_u64() {
                Some(0) => Ok(false),
                Some(1) => Ok(true),
                _ => Err(field_error(&self.field_path("iscrowd"), "expected 0, 1 or a boolean")),
            },
        }
    }
}

fn section<'a>(doc: &'a Map<String, Value>, key: &str) -> Result<&'a Vec<Value>, FormatError> {
    match doc.get(key) {
        Some(Value::Array(items)) => Ok(items),
        Some(_) => Err(field_error(key, "expected an array")),
        None => Err(field_error("$", format!("missing field `{key}`"))),
    }
}

/// Parses and validates a COCO instances document.
///
/// Boxes that stick out of their image are accepted unchanged; see
/// [`Dataset::out_of_bounds`].
pub fn parse_dataset(bytes: &[u8]) -> Result<Dataset, FormatError> {
    let doc: Value = serde_json::from_slice(bytes)?;
    let doc = match &doc {
        Value::Object(map) => map,
        _ => return Err(field_error("$", "expected an object")),
    };

    let mut images = Vec::new();
    for (i, v) in section(doc, "images")?.iter().enumerate() {
        let r = Record::new(format!("images[{i}]"), v)?;
        images.push(ImageRecord {
            id: ImageId(r.id("id")?),
            width: r.dimension("width")?,
            height: r.dimension("height")?,
            file_name: r.string("file_name")?,
        });
    }

    let mut annotations = Vec::new();
    for (i, v) in section(doc, "annotations")?.iter().enumerate() {
        let r = Record::new(format!("annotations[{i}]"), v)?;
        let bbox = r.bbox()?;
        let area = match r.map.get("area") {
            None | Some(Value::Null) => bbox.area(),
            Some(_) => r.number("area")?,
        };
        annotations.push(Annotation {
            id: AnnotationId(r.id("id")?),
            image_id: ImageId(r.id("image_id")?),
            category_id: CategoryId(r.id("category_id")?),
            bbox,
            area,
            iscrowd: r.crowd()?,
        });
    }

    let mut categories = Vec::new();
    for (i, v) in section(doc, "categories")?.iter().enumerate() {
        let r = Record::new(format!("categories[{i}]"), v)?;
        let supercategory = match r.map.get("supercategory") {
            None | Some(Value::Null) => None,
            Some(_) => Some(r.string("supercategory")?),
        };
        categories.push(Category { id: CategoryId(r.id("id")?), name: r.string("name")?, supercategory });
    }

    Ok(Dataset::new(images, annotations, categories)?)
}

/// Parses a COCO results array and checks every record against `ds`.
/// File order is preserved.
pub fn parse_detections(bytes: &[u8], ds: &Dataset) -> Result<Vec<Detection>, FormatError> {
    let doc: Value = serde_json::from_slice(bytes)?;
    let items = doc.as_array().ok_or_else(|| field_error("$", "expected an array of detections"))?;
    let mut dets = Vec::with_capacity(items.len());
    for (i, v) in items.iter().enumerate() {
        let r = Record::new(format!("[{i}]"), v)?;
        dets.push(Detection {
            image_id: ImageId(r.id("image_id")?),
            category_id: CategoryId(r.id("category_id")?),
            bbox: r.bbox()?,
            score: r.number("score")?,
        });
    }
    ds.check_detections(&dets)?;
    Ok(dets)
}

#[derive(Serialize)]
struct DocOut<'a> {
    images: Vec<ImageOut<'a>>,
    annotations: Vec<AnnotationOut>,
    categories: Vec<CategoryOut<'a>>,
}

#[derive(Serialize)]
struct ImageOut<'a> {
    id: u64,
    width: u32,
    height: u32,
    file_name: &'a str,
}

#[derive(Serialize)]
struct AnnotationOut {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    area: f64,
    iscrowd: u8,
}

#[derive(Serialize)]
struct CategoryOut<'a> {
    id: u64,
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    supercategory: Option<&'a str>,
}

pub fn serialize_dataset(ds: &Dataset) -> Vec<u8> {
    let doc = DocOut {
        images: ds
            .images()
            .iter()
            .map(|i| ImageOut { id: i.id.0, width: i.width, height: i.height, file_name: &i.file_name })
            .collect(),
        annotations: ds
            .annotations()
            .iter()
            .map(|a| AnnotationOut {
                id: a.id.0,
                image_id: a.image_id.0,
                category_id: a.category_id.0,
                bbox: [a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h],
                area: a.area,
                iscrowd: a.iscrowd as u8,
            })
            .collect(),
        categories: ds
            .categories()
            .iter()
            .map(|c| CategoryOut { id: c.id.0, name: &c.name, supercategory: c.supercategory.as_deref() })
            .collect(),
    };
    let mut out = serde_json::to_vec(&doc).expect("dataset values are finite");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct DetectionOut {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    score: f64,
}

/// Writes detections as a COCO results array, in the given order.
pub fn serialize_detections(dets: &[Detection]) -> Vec<u8> {
    let out: Vec<DetectionOut> = dets
        .iter()
        .map(|d| DetectionOut {
            image_id: d.image_id.0,
            category_id: d.category_id.0,
            bbox: [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h],
            score: d.score,
        })
        .collect();
    let mut bytes = serde_json::to_vec(&out).expect("detection values are finite");
    bytes.push(b'\n');
    bytes
}
