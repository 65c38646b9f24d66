//! Axis-aligned boxes in COCO `[x, y, w, h]` convention.

/// A box with its top-left corner at `(x, y)` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Builds a box from corner coordinates `(x1, y1, x2, y2)`.
    pub fn from_xyxy(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }

    /// Corner coordinates `(x1, y1, x2, y2)`.
    pub fn to_xyxy(&self) -> (f64, f64, f64, f64) {
        (self.x, self.y, self.x + self.w, self.y + self.h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()
    }

    /// Both sides strictly positive and all coordinates finite.
    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.w > 0.0 && self.h > 0.0
    }

    /// True when the box lies inside `[0, width] x [0, height]`.
    pub fn is_within(&self, width: f64, height: f64) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x + self.w <= width && self.y + self.h <= height
    }

    /// Intersection with the image rectangle. The result may be empty
    /// (zero or negative extent is clamped to zero).
    pub fn clip(&self, width: f64, height: f64) -> Self {
        if self.is_within(width, height) {
            return *self;
        }
        let (x1, y1, x2, y2) = self.to_xyxy();
        let x1 = x1.clamp(0.0, width);
        let y1 = y1.clamp(0.0, height);
        let x2 = x2.clamp(0.0, width);
        let y2 = y2.clamp(0.0, height);
        Self::new(x1, y1, (x2 - x1).max(0.0), (y2 - y1).max(0.0))
    }

    /// Grows each side to at least `min_side` (capped by the image extent),
    /// keeping the center where possible and shifting the box back inside
    /// the image otherwise.
    pub fn with_min_side(&self, min_side: f64, width: f64, height: f64) -> Self {
        let (x, w) = grow_span(self.x, self.w, min_side, width);
        let (y, h) = grow_span(self.y, self.h, min_side, height);
        Self::new(x, y, w, h)
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let (ax1, ay1, ax2, ay2) = self.to_xyxy();
        let (bx1, by1, bx2, by2) = other.to_xyxy();
        let iw = ax2.min(bx2) - ax1.max(bx1);
        let ih = ay2.min(by2) - ay1.max(by1);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Intersection over union; zero for disjoint boxes or a degenerate union.
    pub fn iou(&self, other: &Self) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).min(1.0)
        }
    }
}

fn grow_span(start: f64, len: f64, min_len: f64, limit: f64) -> (f64, f64) {
    let min_len = min_len.min(limit);
    if len >= min_len {
        return (start, len);
    }
    let center = start + len / 2.0;
    let start = (center - min_len / 2.0).clamp(0.0, limit - min_len);
    (start, min_len)
}
