//! Layout-to-vision rendering: page coordinates drawn as a colour ramp so
//! region statistics double as a positional embedding.

use std::io::Write;

use crate::docmodel::{BBox, Document, COORD_MAX};
use crate::error::{Error, Result};

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Raster {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 20);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height).expect("write to vec");
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::InvalidConfig("malformed PPM".into());
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad());
            }
            fields.push(
                std::str::from_utf8(&bytes[start..pos])
                    .map_err(|_| bad())?
                    .to_string(),
            );
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad());
        }
        let width: usize = fields[1].parse().map_err(|_| bad())?;
        let height: usize = fields[2].parse().map_err(|_| bad())?;
        let data = bytes.get(pos + 1..).ok_or_else(bad)?.to_vec();
        if data.len() != width * height * 3 {
            return Err(bad());
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    /// Pixel rectangle `[px0, px1) × [py0, py1)` covered by a page box,
    /// at least one pixel in each direction.
    pub fn region(&self, bbox: &BBox) -> (usize, usize, usize, usize) {
        fn axis(lo: i32, hi: i32, size: usize) -> (usize, usize) {
            let c = COORD_MAX as usize;
            let mut a = (lo as usize * size) / c;
            let mut b = (hi as usize * size).div_ceil(c);
            a = a.min(size - 1);
            b = b.min(size);
            if b <= a {
                b = a + 1;
            }
            (a, b)
        }
        let (x0, x1) = axis(bbox.x0, bbox.x1, self.width);
        let (y0, y1) = axis(bbox.y0, bbox.y1, self.height);
        (x0, x1, y0, y1)
    }

    /// Row-major pixel indices inside a page box.
    pub fn region_pixels(&self, bbox: &BBox) -> Vec<usize> {
        let (x0, x1, y0, y1) = self.region(bbox);
        let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            for x in x0..x1 {
                out.push(y * self.width + x);
            }
        }
        out
    }
}

/// Renders the L2V ramp: `R = ⌊255·x/(W−1)⌋`, `G = ⌊255·y/(H−1)⌋`, `B = 128`.
/// A one-pixel axis maps to 0. Integer arithmetic only.
pub fn render_l2v_dims(width: usize, height: usize) -> Raster {
    let mut r = Raster::new(width, height, [0, 0, 128]);
    let ramp = |v: usize, size: usize| -> u8 {
        if size <= 1 {
            0
        } else {
            ((255 * v) / (size - 1)) as u8
        }
    };
    for y in 0..height {
        let gch = ramp(y, height);
        for x in 0..width {
            r.set_pixel(x, y, [ramp(x, width), gch, 128]);
        }
    }
    r
}

pub fn render_l2v(doc: &Document) -> Raster {
    render_l2v_dims(
        doc.page_width.max(1) as usize,
        doc.page_height.max(1) as usize,
    )
}

/// Channel means of the raster over a page box, before projection.
pub fn layout_means(raster: &Raster, bbox: &BBox) -> [f64; 3] {
    let (x0, x1, y0, y1) = raster.region(bbox);
    let mut acc = [0u64; 3];
    for y in y0..y1 {
        for x in x0..x1 {
            let p = raster.pixel(x, y);
            for c in 0..3 {
                acc[c] += p[c] as u64;
            }
        }
    }
    let n = ((x1 - x0) * (y1 - y0)) as f64;
    [acc[0] as f64 / n, acc[1] as f64 / n, acc[2] as f64 / n]
}

fn category_shade(category: Option<&str>) -> [u8; 3] {
    match category {
        None => [235, 235, 235],
        Some(c) => {
            let h = crate::rng::stable_hash(c);
            [
                180 + (h % 60) as u8,
                180 + ((h >> 8) % 60) as u8,
                180 + ((h >> 16) % 60) as u8,
            ]
        }
    }
}

/// Synthetic page image: white background, entity regions shaded by
/// category, token boxes darkened.
pub fn render_page(doc: &Document) -> Raster {
    let mut r = Raster::new(
        doc.page_width.max(1) as usize,
        doc.page_height.max(1) as usize,
        [255, 255, 255],
    );
    for e in &doc.entities {
        let shade = category_shade(e.category.as_deref());
        let (x0, x1, y0, y1) = r.region(&e.bbox);
        for y in y0..y1 {
            for x in x0..x1 {
                r.set_pixel(x, y, shade);
            }
        }
    }
    for t in &doc.tokens {
        let (x0, x1, y0, y1) = r.region(&t.bbox);
        for y in y0..y1 {
            for x in x0..x1 {
                let p = r.pixel(x, y);
                r.set_pixel(x, y, [p[0] / 4, p[1] / 4, p[2] / 4]);
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_center() {
        let r = render_l2v_dims(100, 100);
        assert_eq!(r.pixel(0, 0), [0, 0, 128]);
        assert_eq!(r.pixel(99, 99), [255, 255, 128]);
        assert_eq!(r.pixel(50, 50), [128, 128, 128]);
    }

    #[test]
    fn degenerate_axes() {
        let r = render_l2v_dims(1, 3);
        assert_eq!(r.pixel(0, 2), [0, 255, 128]);
    }

    #[test]
    fn full_page_means() {
        let r = render_l2v_dims(64, 88);
        let m = layout_means(&r, &BBox::full_page());
        assert!((m[0] - 127.5).abs() < 0.6, "{m:?}");
        assert!((m[1] - 127.5).abs() < 0.6, "{m:?}");
        assert_eq!(m[2], 128.0);
    }

    #[test]
    fn single_pixel_region() {
        let r = render_l2v_dims(10, 10);
        let b = BBox::new(500, 500, 500, 500).unwrap();
        let (x0, x1, y0, y1) = r.region(&b);
        assert_eq!((x1 - x0, y1 - y0), (1, 1));
        let p = r.pixel(x0, y0);
        assert_eq!(
            layout_means(&r, &b),
            [p[0] as f64, p[1] as f64, p[2] as f64]
        );
    }

    #[test]
    fn ppm_round_trip() {
        let r = render_l2v_dims(5, 4);
        assert_eq!(Raster::from_ppm(&r.to_ppm()).unwrap(), r);
    }
}
