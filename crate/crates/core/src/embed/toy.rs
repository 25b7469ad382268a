use image::RgbImage;

use crate::error::{Error, Result};

pub const TOY_GRID: usize = 16;
pub const TOY_DIM: usize = TOY_GRID * TOY_GRID;

/// Grayscale, area-average down to 16x16, flatten row-major, L2-normalize.
/// Constant images map to the uniform unit vector.
pub fn toy_embedder(img: &RgbImage) -> Result<Vec<f64>> {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::InvalidInput("cannot embed an empty raster".into()));
    }
    let luma: Vec<f64> =
        img.pixels().map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])).collect();
    let uniform = vec![1.0 / (TOY_DIM as f64).sqrt(); TOY_DIM];
    if luma.iter().all(|&v| v == luma[0]) {
        return Ok(uniform);
    }
    let xs = cell_weights(w as usize);
    let ys = cell_weights(h as usize);
    let mut out = vec![0.0; TOY_DIM];
    for (cy, yw) in ys.iter().enumerate() {
        for (cx, xw) in xs.iter().enumerate() {
            let mut acc = 0.0;
            for &(y, wy) in yw {
                for &(x, wx) in xw {
                    acc += luma[y * w as usize + x] * wx * wy;
                }
            }
            out[cy * TOY_GRID + cx] = acc;
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(uniform);
    }
    out.iter_mut().for_each(|v| *v /= norm);
    Ok(out)
}

/// For each output cell, the source pixels it overlaps and the overlap
/// fraction of the cell.
fn cell_weights(n: usize) -> Vec<Vec<(usize, f64)>> {
    let step = n as f64 / TOY_GRID as f64;
    (0..TOY_GRID)
        .map(|c| {
            let (a, b) = (c as f64 * step, (c + 1) as f64 * step);
            (a.floor() as usize..(b.ceil() as usize).min(n))
                .filter_map(|p| {
                    let overlap = b.min(p as f64 + 1.0) - a.max(p as f64);
                    (overlap > 0.0).then_some((p, overlap / step))
                })
                .collect()
        })
        .collect()
}
