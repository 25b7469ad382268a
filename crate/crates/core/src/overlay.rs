//! Draws boxes, mask tints and identity labels over a frame.

use std::collections::BTreeMap;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{BBox, Mask};
use crate::synth::hsv_to_rgb as hsv;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayItem {
    pub identity: String,
    pub bbox: BBox,
    pub mask: Option<Mask>,
    pub score: Option<f64>,
}

const OUTLINE: i64 = 2;
const TINT_ALPHA: f64 = 0.4;
const GLYPH_W: i64 = 3;
const GLYPH_H: i64 = 5;

/// `n` colors at evenly spaced hues starting from a seeded offset.
pub fn palette(n: usize, seed: u64) -> Vec<[u8; 3]> {
    let offset: f64 = ChaCha8Rng::seed_from_u64(seed).random();
    (0..n).map(|k| hsv(offset + k as f64 / n.max(1) as f64, 0.9, 0.95)).collect()
}

/// Colors are assigned by sorted identity so the same set of identities
/// always gets the same colors.
pub fn render_overlay(frame: &RgbImage, items: &[OverlayItem], palette_seed: u64) -> Result<RgbImage> {
    let mut out = frame.clone();
    if items.is_empty() {
        return Ok(out);
    }
    let ids: BTreeMap<&str, usize> = {
        let mut names: Vec<&str> = items.iter().map(|i| i.identity.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names.into_iter().enumerate().map(|(k, n)| (n, k)).collect()
    };
    let colors = palette(ids.len(), palette_seed);
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    for item in items {
        item.bbox.validate()?;
        let b = item.bbox;
        if b.right() <= 0.0 || b.bottom() <= 0.0 || b.x >= w || b.y >= h {
            log::warn!("overlay: box of {} lies outside the {w}x{h} frame, skipped", item.identity);
            continue;
        }
        let color = colors[ids[item.identity.as_str()]];
        if let Some(mask) = &item.mask {
            if (mask.width, mask.height) == (frame.width(), frame.height()) {
                let grid = mask.decode()?;
                for (x, y, p) in out.enumerate_pixels_mut() {
                    if grid.get(x, y) {
                        for c in 0..3 {
                            p.0[c] = ((1.0 - TINT_ALPHA) * p.0[c] as f64 + TINT_ALPHA * color[c] as f64).round() as u8;
                        }
                    }
                }
            } else {
                log::warn!("overlay: mask of {} does not match the frame size, not drawn", item.identity);
            }
        }
        let (x0, y0) = (b.x.floor() as i64, b.y.floor() as i64);
        let (x1, y1) = (b.right().ceil() as i64 - 1, b.bottom().ceil() as i64 - 1);
        for t in 0..OUTLINE {
            hline(&mut out, x0, x1, y0 + t, color);
            hline(&mut out, x0, x1, y1 - t, color);
            vline(&mut out, x0 + t, y0, y1, color);
            vline(&mut out, x1 - t, y0, y1, color);
        }
        let text = match item.score {
            Some(s) => format!("{} {:.2}", item.identity, s),
            None => item.identity.clone(),
        };
        let ty = if y0 >= GLYPH_H + 2 { y0 - GLYPH_H - 2 } else { y0 + OUTLINE + 1 };
        draw_text(&mut out, &text, x0, ty, color);
    }
    Ok(out)
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn hline(img: &mut RgbImage, x0: i64, x1: i64, y: i64, c: [u8; 3]) {
    for x in x0..=x1 {
        put(img, x, y, c);
    }
}

fn vline(img: &mut RgbImage, x: i64, y0: i64, y1: i64, c: [u8; 3]) {
    for y in y0..=y1 {
        put(img, x, y, c);
    }
}

/// Label text on a dark backing strip, one pixel of padding.
fn draw_text(img: &mut RgbImage, text: &str, x: i64, y: i64, c: [u8; 3]) {
    let width = text.chars().count() as i64 * (GLYPH_W + 1) + 1;
    for yy in y - 1..y + GLYPH_H + 1 {
        hline(img, x - 1, x - 1 + width, yy, [0, 0, 0]);
    }
    for (k, ch) in text.chars().enumerate() {
        let bits = glyph(ch);
        let gx = x + k as i64 * (GLYPH_W + 1);
        for row in 0..GLYPH_H {
            for col in 0..GLYPH_W {
                if bits.as_bytes()[(row * GLYPH_W + col) as usize] == b'#' {
                    put(img, gx + col, y + row, c);
                }
            }
        }
    }
}

fn glyph(ch: char) -> &'static str {
    match ch.to_ascii_lowercase() {
        '0' => "####.##.##.####",
        '1' => ".#.##..#..#.###",
        '2' => "###..#####..###",
        '3' => "###..####..####",
        '4' => "#.##.####..#..#",
        '5' => "####..###..####",
        '6' => "####..####.####",
        '7' => "###..#..#..#..#",
        '8' => "####.#####.####",
        '9' => "####.####..####",
        'a' => ".#.#.#####.##.#",
        'b' => "##.#.###.#.###.",
        'c' => "####..#..#..###",
        'd' => "##.#.##.##.###.",
        'e' => "####..####..###",
        'f' => "####..####..#..",
        'g' => "####..#.##.####",
        'h' => "#.##.#####.##.#",
        'i' => "###.#..#..#.###",
        'j' => "..#..#..##.####",
        'k' => "#.##.###.#.##.#",
        'l' => "#..#..#..#..###",
        'm' => "#.#####.##.##.#",
        'n' => "##.#.##.##.##.#",
        'o' => ".#.#.##.##.#.#.",
        'p' => "####.#####..#..",
        'q' => ".#.#.##.##.#.##",
        'r' => "##.#.###.#.##.#",
        's' => "####..###..####",
        't' => "###.#..#..#..#.",
        'u' => "#.##.##.##.####",
        'v' => "#.##.##.##.#.#.",
        'w' => "#.##.##.######.",
        'x' => "#.##.#.#.#.##.#",
        'y' => "#.##.#.#..#..#.",
        'z' => "###..#.#.#..###",
        '_' => "............###",
        '-' => "......###......",
        '.' => ".............#.",
        ':' => "....#.....#....",
        _ => "...............",
    }
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}
