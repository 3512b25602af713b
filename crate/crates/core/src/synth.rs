//! Procedural text-like test images.
//!
//! Renders random words from a built-in 5x7 bitmap font, dark ink on a light
//! page, with box-filtered anti-aliasing. Used to build synthetic training and
//! evaluation sets without any external dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imagecore::ImageBuffer;

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

#[rustfmt::skip]
const FONT: [(char, [u8; GLYPH_H]); 36] = [
    ('A', [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11]),
    ('B', [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E]),
    ('C', [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E]),
    ('D', [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E]),
    ('E', [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F]),
    ('F', [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10]),
    ('G', [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F]),
    ('H', [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11]),
    ('I', [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E]),
    ('J', [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C]),
    ('K', [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11]),
    ('L', [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F]),
    ('M', [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11]),
    ('N', [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11]),
    ('O', [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E]),
    ('P', [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10]),
    ('Q', [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D]),
    ('R', [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11]),
    ('S', [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E]),
    ('T', [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04]),
    ('U', [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E]),
    ('V', [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04]),
    ('W', [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A]),
    ('X', [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11]),
    ('Y', [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04]),
    ('Z', [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F]),
    ('0', [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E]),
    ('1', [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E]),
    ('2', [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F]),
    ('3', [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E]),
    ('4', [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02]),
    ('5', [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E]),
    ('6', [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E]),
    ('7', [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08]),
    ('8', [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E]),
    ('9', [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C]),
];

fn glyph(c: char) -> Option<&'static [u8; GLYPH_H]> {
    let c = c.to_ascii_uppercase();
    FONT.iter().find(|(g, _)| *g == c).map(|(_, rows)| rows)
}

/// Characters the built-in font can draw.
pub fn alphabet() -> impl Iterator<Item = char> {
    FONT.iter().map(|(c, _)| *c)
}

/// Renders `text` (newline-separated lines) with `cell` output pixels per font
/// pixel, starting at `(left, top)`.
pub fn render_text(width: usize, height: usize, text: &str, cell: f64, left: f64, top: f64) -> ImageBuffer {
    const SS: usize = 4;
    let (sw, sh) = (width * SS, height * SS);
    let mut ink = vec![false; sw * sh];
    let advance = (GLYPH_W + 1) as f64 * cell;
    let line_step = (GLYPH_H + 3) as f64 * cell;
    for (line_no, line) in text.lines().enumerate() {
        for (col, ch) in line.chars().enumerate() {
            let Some(rows) = glyph(ch) else { continue };
            let gx = left + col as f64 * advance;
            let gy = top + line_no as f64 * line_step;
            for (r, bits) in rows.iter().enumerate() {
                for b in 0..GLYPH_W {
                    if bits & (1 << (GLYPH_W - 1 - b)) == 0 {
                        continue;
                    }
                    let x0 = ((gx + b as f64 * cell) * SS as f64).round().max(0.0) as usize;
                    let y0 = ((gy + r as f64 * cell) * SS as f64).round().max(0.0) as usize;
                    let x1 = (((gx + (b + 1) as f64 * cell) * SS as f64).round() as usize).min(sw);
                    let y1 = (((gy + (r + 1) as f64 * cell) * SS as f64).round() as usize).min(sh);
                    for yy in y0..y1 {
                        ink[yy * sw + x0.min(x1)..yy * sw + x1].fill(true);
                    }
                }
            }
        }
    }
    let background = 0.96;
    let dark = 0.08;
    let norm = (SS * SS) as f64;
    ImageBuffer::luma_from_fn(width, height, |x, y| {
        let mut count = 0usize;
        for yy in y * SS..(y + 1) * SS {
            count += ink[yy * sw + x * SS..yy * sw + (x + 1) * SS].iter().filter(|&&i| i).count();
        }
        background + (dark - background) * count as f64 / norm
    })
    .expect("rendered samples are finite")
}

/// Random lines of random words; deterministic for a seed.
pub fn random_text(lines: usize, chars_per_line: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters: Vec<char> = alphabet().collect();
    let mut out = String::new();
    for l in 0..lines {
        if l > 0 {
            out.push('\n');
        }
        let mut col = 0;
        while col < chars_per_line {
            let word = rng.random_range(2..=7).min(chars_per_line - col);
            for _ in 0..word {
                out.push(letters[rng.random_range(0..letters.len())]);
            }
            col += word;
            if col < chars_per_line {
                out.push(' ');
                col += 1;
            }
        }
    }
    out
}

/// A page of random text filling a `width x height` image. Glyph size and
/// placement vary with the seed.
pub fn text_page(width: usize, height: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7e47);
    let cell = rng.random_range(1.25..2.25);
    let left = rng.random_range(0.0..2.0 * cell);
    let top = rng.random_range(0.0..2.0 * cell);
    let cols = ((width as f64 - left) / ((GLYPH_W + 1) as f64 * cell)).ceil() as usize + 1;
    let lines = ((height as f64 - top) / ((GLYPH_H + 3) as f64 * cell)).ceil() as usize + 1;
    let text = random_text(lines, cols, seed);
    render_text(width, height, &text, cell, left, top)
}
