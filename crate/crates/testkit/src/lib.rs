//! Slow, definition-level reference implementations and random fixtures used
//! to cross-check herdpipe. Nothing here depends on herdpipe itself.

pub mod detection;
pub mod gradient;
pub mod mot;
pub mod scenario;

/// `[x, y, w, h]`
pub type Rect = [f64; 4];

pub fn rect_iou(a: &Rect, b: &Rect) -> f64 {
    let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    let inter = ix.max(0.0) * iy.max(0.0);
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
