//! Rendering of evaluation, TIDE, stats and diff results.
//!
//! Text and CSV show AP-family values multiplied by 100 with one decimal.
//! JSON keeps the raw fractions in `[0, 1]`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use una_core::tide::ErrorKind;
use una_core::{Dataset, EvalSummary, TideReport};

use crate::diff::DatasetDiff;
use crate::stats::{DatasetStats, QUANTILES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected text, csv or json)")),
        }
    }
}

pub fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn csv_doc(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv input is utf-8")
}

fn json_doc<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values are finite");
    s.push('\n');
    s
}

/// `left` leading columns are left-aligned, the rest right-aligned.
fn table(header: &[&str], rows: &[Vec<String>], left: usize) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    for row in std::iter::once(&header).chain(rows) {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(&widths).enumerate() {
            let pad = w - cell.chars().count();
            if i > 0 {
                line.push_str("  ");
            }
            if i < left {
                line.push_str(cell);
                line.extend(std::iter::repeat_n(' ', pad));
            } else {
                line.extend(std::iter::repeat_n(' ', pad));
                line.push_str(cell);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct EvalDoc<'a> {
    ap: f64,
    ap50: f64,
    ap75: f64,
    ap_by_threshold: [f64; 10],
    num_ground_truths: usize,
    num_detections: usize,
    categories: Vec<CategoryDoc<'a>>,
}

#[derive(Serialize)]
struct CategoryDoc<'a> {
    id: u64,
    name: &'a str,
    num_gt: usize,
    num_det: usize,
    ap: f64,
    ap50: f64,
    ap75: f64,
}

pub fn render_eval(gt: &Dataset, s: &EvalSummary, format: Format) -> String {
    let name = |i: usize| gt.categories()[i].name.as_str();
    match format {
        Format::Json => json_doc(&EvalDoc {
            ap: s.ap,
            ap50: s.ap50,
            ap75: s.ap75,
            ap_by_threshold: s.ap_by_threshold,
            num_ground_truths: s.num_ground_truths,
            num_detections: s.num_detections,
            categories: s
                .per_category
                .iter()
                .enumerate()
                .map(|(i, c)| CategoryDoc {
                    id: c.category_id.0,
                    name: name(i),
                    num_gt: c.num_gt,
                    num_det: c.num_det,
                    ap: c.ap(),
                    ap50: c.ap50(),
                    ap75: c.ap75(),
                })
                .collect(),
        }),
        Format::Text | Format::Csv => {
            let mut rows: Vec<Vec<String>> = s
                .per_category
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let (ap, ap50, ap75) = if c.num_gt == 0 {
                        ("-".into(), "-".into(), "-".into())
                    } else {
                        (pct(c.ap()), pct(c.ap50()), pct(c.ap75()))
                    };
                    vec![
                        c.category_id.to_string(),
                        name(i).to_string(),
                        c.num_gt.to_string(),
                        c.num_det.to_string(),
                        ap,
                        ap50,
                        ap75,
                    ]
                })
                .collect();
            rows.push(vec![
                "all".into(),
                String::new(),
                s.num_ground_truths.to_string(),
                s.num_detections.to_string(),
                pct(s.ap),
                pct(s.ap50),
                pct(s.ap75),
            ]);
            let header = ["id", "category", "gt", "det", "AP", "AP50", "AP75"];
            if format == Format::Csv {
                csv_doc(&header, &rows)
            } else {
                table(&header, &rows, 2)
            }
        }
    }
}

#[derive(Serialize)]
struct TideDoc {
    foreground_iou: f64,
    background_iou: f64,
    baseline_ap50: f64,
    components: Vec<ComponentDoc>,
}

#[derive(Serialize)]
struct ComponentDoc {
    kind: &'static str,
    count: usize,
    delta_ap: f64,
    oracle_ap: f64,
}

/// `"ΔAP (AP_O)"`, both ×100.
pub fn tide_cell(r: &TideReport, kind: ErrorKind) -> String {
    format!("{} ({})", pct(r.delta(kind)), pct(r.oracle(kind)))
}

pub fn render_tide(r: &TideReport, format: Format) -> String {
    let mut header = vec!["AP50"];
    header.extend(ErrorKind::ALL.iter().map(|k| k.as_str()));
    let mut cells = vec![pct(r.baseline_ap50)];
    cells.extend(ErrorKind::ALL.iter().map(|&k| tide_cell(r, k)));
    match format {
        Format::Json => json_doc(&TideDoc {
            foreground_iou: r.foreground_iou,
            background_iou: r.background_iou,
            baseline_ap50: r.baseline_ap50,
            components: ErrorKind::ALL
                .iter()
                .map(|&k| ComponentDoc {
                    kind: k.as_str(),
                    count: r.count(k),
                    delta_ap: r.delta(k),
                    oracle_ap: r.oracle(k),
                })
                .collect(),
        }),
        Format::Csv => csv_doc(&header, &[cells]),
        Format::Text => {
            let mut counts = vec![String::new()];
            counts.extend(ErrorKind::ALL.iter().map(|&k| r.count(k).to_string()));
            let mut labelled_header = vec![""];
            labelled_header.extend(&header);
            let mut row = vec!["ΔAP (AP_O)".to_string()];
            row.extend(cells);
            let mut count_row = vec!["errors".to_string()];
            count_row.extend(counts);
            let mut out = format!("TIDE at tf = {}, tb = {}\n", r.foreground_iou, r.background_iou);
            out.push_str(&table(&labelled_header, &[row, count_row], 1));
            out
        }
    }
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    images: usize,
    annotations: usize,
    crowd: usize,
    out_of_bounds: usize,
    quantiles: [f64; 5],
    width: Option<[f64; 5]>,
    height: Option<[f64; 5]>,
    area: Option<[f64; 5]>,
    categories: Vec<StatsCategoryDoc<'a>>,
}

#[derive(Serialize)]
struct StatsCategoryDoc<'a> {
    id: u64,
    name: &'a str,
    annotations: usize,
    crowd: usize,
}

fn num(v: f64) -> String {
    format!("{v:.2}")
}

pub fn render_stats(s: &DatasetStats, format: Format) -> String {
    match format {
        Format::Json => json_doc(&StatsDoc {
            images: s.images,
            annotations: s.annotations,
            crowd: s.crowd,
            out_of_bounds: s.out_of_bounds,
            quantiles: QUANTILES,
            width: s.width,
            height: s.height,
            area: s.area,
            categories: s
                .categories
                .iter()
                .map(|c| StatsCategoryDoc {
                    id: c.id.0,
                    name: &c.name,
                    annotations: c.annotations,
                    crowd: c.crowd,
                })
                .collect(),
        }),
        Format::Csv => {
            let mut rows = vec![
                vec!["images".into(), String::new(), s.images.to_string()],
                vec!["annotations".into(), String::new(), s.annotations.to_string()],
                vec!["crowd".into(), String::new(), s.crowd.to_string()],
                vec!["out_of_bounds".into(), String::new(), s.out_of_bounds.to_string()],
            ];
            for c in &s.categories {
                rows.push(vec![format!("category:{}", c.id), c.name.clone(), c.annotations.to_string()]);
            }
            for (label, q) in [("width", s.width), ("height", s.height), ("area", s.area)] {
                for (level, v) in QUANTILES.iter().zip(q.unwrap_or_default()) {
                    rows.push(vec![format!("{label}:q{level}"), String::new(), num(v)]);
                }
            }
            csv_doc(&["key", "name", "value"], &rows)
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "images       {}", s.images);
            let _ = writeln!(out, "annotations  {} ({} crowd)", s.annotations, s.crowd);
            let _ = writeln!(out, "categories   {}", s.categories.len());
            if s.out_of_bounds > 0 {
                let _ = writeln!(out, "out of image {}", s.out_of_bounds);
            }
            out.push('\n');
            let rows: Vec<Vec<String>> = s
                .categories
                .iter()
                .map(|c| {
                    vec![c.id.to_string(), c.name.clone(), c.annotations.to_string(), c.crowd.to_string()]
                })
                .collect();
            out.push_str(&table(&["id", "category", "annotations", "crowd"], &rows, 2));
            out.push('\n');
            let rows: Vec<Vec<String>> = [("width", s.width), ("height", s.height), ("area", s.area)]
                .into_iter()
                .map(|(label, q)| {
                    let mut row = vec![label.to_string()];
                    match q {
                        Some(q) => row.extend(q.iter().map(|&v| num(v))),
                        None => row.extend(QUANTILES.iter().map(|_| "-".to_string())),
                    }
                    row
                })
                .collect();
            out.push_str(&table(&["box", "min", "q25", "median", "q75", "max"], &rows, 1));
            out
        }
    }
}

#[derive(Serialize)]
struct DiffDoc {
    changed: Vec<ChangeDoc>,
    removed: Vec<u64>,
    added: Vec<u64>,
}

#[derive(Serialize)]
struct ChangeDoc {
    id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<[u64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bbox: Option<[[f64; 4]; 2]>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    other: Vec<&'static str>,
}

fn xywh(b: &una_core::BoundingBox) -> [f64; 4] {
    [b.x, b.y, b.w, b.h]
}

pub fn render_diff(d: &DatasetDiff, format: Format) -> String {
    match format {
        Format::Json => json_doc(&DiffDoc {
            changed: d
                .changed
                .iter()
                .map(|c| ChangeDoc {
                    id: c.id.0,
                    category: c.category.map(|(a, b)| [a.0, b.0]),
                    bbox: c.bbox.map(|(a, b)| [xywh(&a), xywh(&b)]),
                    other: c.other.clone(),
                })
                .collect(),
            removed: d.removed.iter().map(|id| id.0).collect(),
            added: d.added.iter().map(|id| id.0).collect(),
        }),
        Format::Csv => {
            let mut rows = Vec::new();
            for c in &d.changed {
                if let Some((a, b)) = c.category {
                    rows.push(vec!["category".into(), c.id.to_string(), a.to_string(), b.to_string()]);
                }
                if let Some((a, b)) = c.bbox {
                    rows.push(vec![
                        "bbox".into(),
                        c.id.to_string(),
                        format!("{:?}", xywh(&a)),
                        format!("{:?}", xywh(&b)),
                    ]);
                }
                for field in &c.other {
                    rows.push(vec![field.to_string(), c.id.to_string(), String::new(), String::new()]);
                }
            }
            rows.extend(
                d.removed
                    .iter()
                    .map(|id| vec!["removed".into(), id.to_string(), String::new(), String::new()]),
            );
            rows.extend(
                d.added.iter().map(|id| vec!["added".into(), id.to_string(), String::new(), String::new()]),
            );
            csv_doc(&["change", "id", "from", "to"], &rows)
        }
        Format::Text => {
            let mut out = format!(
                "changed {} (category {}, bbox {}), removed {}, added {}\n",
                d.changed.len(),
                d.category_changes(),
                d.bbox_changes(),
                d.removed.len(),
                d.added.len()
            );
            for c in &d.changed {
                if let Some((a, b)) = c.category {
                    let _ = writeln!(out, "~ {} category {a} -> {b}", c.id);
                }
                if let Some((a, b)) = c.bbox {
                    let _ = writeln!(out, "~ {} bbox {:?} -> {:?}", c.id, xywh(&a), xywh(&b));
                }
                for field in &c.other {
                    let _ = writeln!(out, "~ {} {field}", c.id);
                }
            }
            for id in &d.removed {
                let _ = writeln!(out, "- {id}");
            }
            for id in &d.added {
                let _ = writeln!(out, "+ {id}");
            }
            out
        }
    }
}
