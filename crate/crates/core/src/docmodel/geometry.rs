use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound of the page-normalized coordinate system.
pub const COORD_MAX: i32 = 1000;

/// Axis-aligned box in page-normalized coordinates, `x` grows right and `y`
/// grows down. Serialized as `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct BBox {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl BBox {
    pub fn new(x0: i32, y0: i32, x1: i32, y1: i32) -> Result<Self> {
        let b = BBox { x0, y0, x1, y1 };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(Error::InvalidBBox([
                x0 as i64, y0 as i64, x1 as i64, y1 as i64,
            ]))
        }
    }

    /// Builds a box from arbitrary coordinates, sorting and clamping them into
    /// the page.
    pub fn clamped(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        let c = |v: i64| v.clamp(0, COORD_MAX as i64) as i32;
        let (ax, bx) = (c(x0.min(x1)), c(x0.max(x1)));
        let (ay, by) = (c(y0.min(y1)), c(y0.max(y1)));
        BBox {
            x0: ax,
            y0: ay,
            x1: bx,
            y1: by,
        }
    }

    pub fn full_page() -> Self {
        BBox {
            x0: 0,
            y0: 0,
            x1: COORD_MAX,
            y1: COORD_MAX,
        }
    }

    pub fn is_valid(&self) -> bool {
        0 <= self.x0
            && self.x0 <= self.x1
            && self.x1 <= COORD_MAX
            && 0 <= self.y0
            && self.y0 <= self.y1
            && self.y1 <= COORD_MAX
    }

    pub fn width(&self) -> i64 {
        (self.x1 - self.x0) as i64
    }

    pub fn height(&self) -> i64 {
        (self.y1 - self.y0) as i64
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x0 + self.x1) as f64 / 2.0,
            (self.y0 + self.y1) as f64 / 2.0,
        )
    }

    /// Inclusive point containment.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.x0 as f64 <= x && x <= self.x1 as f64 && self.y0 as f64 <= y && y <= self.y1 as f64
    }

    pub fn intersection_area(&self, other: &BBox) -> i64 {
        let w = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0) as i64;
        let h = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0) as i64;
        w * h
    }

    /// Intersection over union. Degenerate boxes with zero union compare as
    /// 1.0 when identical and 0.0 otherwise.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            if self == other {
                1.0
            } else {
                0.0
            }
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

impl TryFrom<[i64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [i64; 4]) -> Result<Self> {
        let fits = v.iter().all(|c| (0..=COORD_MAX as i64).contains(c));
        if !fits {
            return Err(Error::InvalidBBox(v));
        }
        BBox::new(v[0] as i32, v[1] as i32, v[2] as i32, v[3] as i32)
    }
}

impl From<BBox> for [i64; 4] {
    fn from(b: BBox) -> Self {
        [b.x0 as i64, b.y0 as i64, b.x1 as i64, b.y1 as i64]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_boxes() {
        assert!(BBox::new(10, 0, 5, 10).is_err());
        assert!(BBox::new(0, 0, 1001, 10).is_err());
        assert!(BBox::new(0, 0, 1000, 1000).is_ok());
    }

    #[test]
    fn iou_cases() {
        let a = BBox::new(0, 0, 10, 10).unwrap();
        let b = BBox::new(5, 0, 15, 10).unwrap();
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(a.iou(&a), 1.0);
        let far = BBox::new(500, 500, 600, 600).unwrap();
        assert_eq!(a.iou(&far), 0.0);
        let p = BBox::new(3, 3, 3, 3).unwrap();
        assert_eq!(p.iou(&p), 1.0);
    }

    #[test]
    fn clamped_sorts_and_bounds() {
        let b = BBox::clamped(1200, -5, 300, 40);
        assert_eq!(b, BBox::new(300, 0, 1000, 40).unwrap());
    }

    #[test]
    fn serde_as_array() {
        let b = BBox::new(1, 2, 3, 4).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1,2,3,4]");
        let bad: std::result::Result<BBox, _> = serde_json::from_str("[5,2,3,4]");
        assert!(bad.is_err());
    }
}
