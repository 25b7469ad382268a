//! Boxes, binary rasters and the run-length mask codec.
//!
//! Boxes are `[x, y, w, h]` with real-valued coordinates. Masks use the
//! uncompressed column-major RLE convention: runs alternate between zeros and
//! ones, and the first run always counts zeros (it may be 0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()) {
            return Err(Error::InvalidGeometry(format!("non-finite box {self:?}")));
        }
        if self.w < 0.0 || self.h < 0.0 {
            return Err(Error::InvalidGeometry(format!("negative extent {self:?}")));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Intersects the box with `[0, width] x [0, height]`. The result may have
    /// zero extent when the box lies outside the frame.
    pub fn clamp_to(&self, width: f64, height: f64) -> BBox {
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.right().clamp(0.0, width);
        let y1 = self.bottom().clamp(0.0, height);
        BBox::new(x0, y0, (x1 - x0).max(0.0), (y1 - y0).max(0.0))
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }
}

/// Intersection over union. Returns 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(iou_unchecked(a, b))
}

/// [`iou`] for boxes already known to be valid.
pub fn iou_unchecked(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Dense binary raster, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGrid {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryGrid { width, height, data: vec![false; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut grid = BinaryGrid::new(width, height);
        for y in 0..height {
            for x in 0..width {
                grid.set(x, y, f(x, y));
            }
        }
        grid
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl Mask {
    pub fn encode(raster: &BinaryGrid) -> Result<Mask> {
        if raster.width == 0 || raster.height == 0 {
            return Err(Error::InvalidGeometry("raster dimensions must be positive".into()));
        }
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for x in 0..raster.width {
            for y in 0..raster.height {
                let v = raster.get(x, y);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        Ok(Mask { width: raster.width, height: raster.height, counts })
    }

    pub fn validate(&self) -> Result<()> {
        let total: u64 = self.counts.iter().map(|&c| u64::from(c)).sum();
        let expected = u64::from(self.width) * u64::from(self.height);
        if total != expected {
            return Err(Error::CorruptMask(format!(
                "counts sum to {total}, expected {}x{} = {expected}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn decode(&self) -> Result<BinaryGrid> {
        self.validate()?;
        let mut grid = BinaryGrid::new(self.width, self.height);
        for (start, len, value) in self.runs() {
            if value {
                for i in start..start + len {
                    let (x, y) = self.position(i);
                    grid.set(x, y, true);
                }
            }
        }
        Ok(grid)
    }

    /// Filled rectangle covering the pixels whose centers fall inside `bbox`.
    pub fn from_bbox(width: u32, height: u32, bbox: &BBox) -> Result<Mask> {
        bbox.validate()?;
        let x0 = bbox.x.round().max(0.0) as u32;
        let y0 = bbox.y.round().max(0.0) as u32;
        let x1 = (bbox.right().round().max(0.0) as u32).min(width);
        let y1 = (bbox.bottom().round().max(0.0) as u32).min(height);
        let grid = BinaryGrid::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1);
        Mask::encode(&grid)
    }

    /// Tightest pixel-aligned box around the set pixels.
    pub fn to_bbox(&self) -> Result<BBox> {
        self.validate()?;
        let mut bounds: Option<(u32, u32, u32, u32)> = None;
        for (start, len, value) in self.runs() {
            if !value || len == 0 {
                continue;
            }
            let (x_first, y_first) = self.position(start);
            let (x_last, y_last) = self.position(start + len - 1);
            // A run spanning columns touches both the top and the bottom row.
            let (y_min, y_max) = if x_first == x_last { (y_first, y_last) } else { (0, self.height - 1) };
            bounds = Some(match bounds {
                None => (x_first, y_min, x_last, y_max),
                Some((a, b, c, d)) => (a.min(x_first), b.min(y_min), c.max(x_last), d.max(y_max)),
            });
        }
        let (x0, y0, x1, y1) = bounds.ok_or(Error::EmptyMask)?;
        Ok(BBox::new(f64::from(x0), f64::from(y0), f64::from(x1 - x0 + 1), f64::from(y1 - y0 + 1)))
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }

    /// Yields `(start, len, value)` for every run.
    fn runs(&self) -> impl Iterator<Item = (u64, u64, bool)> + '_ {
        let mut offset = 0u64;
        self.counts.iter().enumerate().map(move |(i, &c)| {
            let start = offset;
            offset += u64::from(c);
            (start, u64::from(c), i % 2 == 1)
        })
    }

    fn position(&self, linear: u64) -> (u32, u32) {
        let h = u64::from(self.height);
        ((linear / h) as u32, (linear % h) as u32)
    }
}
