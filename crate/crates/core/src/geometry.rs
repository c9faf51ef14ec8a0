//! Points, boxes, overlap ratios and the pairwise edge measurements that
//! feed the structural model.
//!
//! Image coordinates: origin at the top-left corner, `y` grows downward.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

/// Axis-aligned box parameterized by its centroid and size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub center: Point2,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    /// Builds a box, rejecting non-positive or non-finite sizes.
    pub fn new(center: Point2, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::InvalidBox { width, height });
        }
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::NonFinite("box center"));
        }
        Ok(Self { center, width, height })
    }

    /// Box from its top-left corner and size, the layout used by track files.
    pub fn from_corner(x: f64, y: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(Point2::new(x + width / 2.0, y + height / 2.0), width, height)
    }

    /// Same size, moved to a new center.
    pub fn at(&self, center: Point2) -> Self {
        Self { center, ..*self }
    }

    pub fn left(&self) -> f64 {
        self.center.x - self.width / 2.0
    }

    pub fn top(&self) -> f64 {
        self.center.y - self.height / 2.0
    }

    pub fn right(&self) -> f64 {
        self.center.x + self.width / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.center.y + self.height / 2.0
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.right().min(other.right()) - self.left().max(other.left())).max(0.0);
        let h = (self.bottom().min(other.bottom()) - self.top().max(other.top())).max(0.0);
        w * h
    }
}

/// Fraction of `a` covered by `b`: `|a ∩ b| / |a|`. Not symmetric.
pub fn overlap_ratio(a: &BBox, b: &BBox) -> f64 {
    (a.intersection_area(b) / a.area()).clamp(0.0, 1.0)
}

/// Intersection over union.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Clockwise angle (y down) from the +x axis to the vector `origin -> target`,
/// in `[0, 2π)`.
pub fn edge_angle(origin: &Point2, target: &Point2) -> Result<f64> {
    let dx = target.x - origin.x;
    let dy = target.y - origin.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateEdge);
    }
    let a = dy.atan2(dx).rem_euclid(TAU);
    // rem_euclid can return exactly TAU for tiny negative inputs
    Ok(if a >= TAU { 0.0 } else { a })
}

/// Euclidean distance normalized by the image width.
pub fn edge_distance(origin: &Point2, target: &Point2, image_width: f64) -> f64 {
    origin.distance(target) / image_width
}

/// Angle/distance pair measured along one directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMeasurement {
    pub angle: f64,
    pub distance: f64,
}

impl EdgeMeasurement {
    /// Measures the edge; coincident endpoints yield `(0, 0)`.
    pub fn measure(origin: &Point2, target: &Point2, image_width: f64) -> Self {
        Self {
            angle: edge_angle(origin, target).unwrap_or(0.0),
            distance: edge_distance(origin, target, image_width),
        }
    }
}
