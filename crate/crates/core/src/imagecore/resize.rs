use super::{clamp_unit, ImageBuffer};
use crate::{Error, Result};

const A: f64 = -0.5;

/// Catmull-Rom cubic convolution kernel (a = -0.5), support [-2, 2].
pub fn catmull_rom(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// The four interpolation taps for a sample at fractional offset `phase`
/// past the second tap, i.e. taps at -1, 0, 1, 2 relative to `floor`.
pub fn cubic_weights(phase: f64) -> [f64; 4] {
    [
        catmull_rom(1.0 + phase),
        catmull_rom(phase),
        catmull_rom(1.0 - phase),
        catmull_rom(2.0 - phase),
    ]
}

struct AxisTaps {
    start: Vec<isize>,
    width: usize,
    weights: Vec<f64>,
}

impl AxisTaps {
    // Pixel-centre alignment; when shrinking, the kernel is stretched by the
    // scale factor so every source sample contributes.
    fn new(in_len: usize, out_len: usize) -> Self {
        let scale = in_len as f64 / out_len as f64;
        let support = scale.max(1.0);
        let width = (4.0 * support).ceil() as usize + 1;
        let mut start = Vec::with_capacity(out_len);
        let mut weights = vec![0.0; out_len * width];
        for o in 0..out_len {
            let center = (o as f64 + 0.5) * scale - 0.5;
            let first = (center - 2.0 * support).floor() as isize + 1;
            let row = &mut weights[o * width..(o + 1) * width];
            let mut sum = 0.0;
            for (t, w) in row.iter_mut().enumerate() {
                *w = catmull_rom((first + t as isize) as f64 - center) / support;
                sum += *w;
            }
            for w in row.iter_mut() {
                *w /= sum;
            }
            start.push(first);
        }
        Self { start, width, weights }
    }

    #[inline]
    fn apply(&self, o: usize, len: usize, sample: impl Fn(usize) -> f64) -> f64 {
        let row = &self.weights[o * self.width..(o + 1) * self.width];
        let last = len as isize - 1;
        let mut acc = 0.0;
        for (t, &w) in row.iter().enumerate() {
            if w != 0.0 {
                let i = (self.start[o] + t as isize).clamp(0, last) as usize;
                acc += w * sample(i);
            }
        }
        acc
    }
}

/// Separable bicubic resize of one plane, without clamping.
pub(crate) fn resize_plane(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let tx = AxisTaps::new(w, out_w);
    let ty = AxisTaps::new(h, out_h);
    let mut tmp = vec![0.0; h * out_w];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..out_w {
            tmp[y * out_w + x] = tx.apply(x, w, |i| row[i]);
        }
    }
    let mut out = vec![0.0; out_h * out_w];
    for y in 0..out_h {
        for x in 0..out_w {
            out[y * out_w + x] = ty.apply(y, h, |i| tmp[i * out_w + x]);
        }
    }
    out
}

/// Resizes every channel with the Catmull-Rom kernel and replicate borders.
/// Output samples are clamped to `[0, 1]`.
pub fn bicubic_resize(img: &ImageBuffer, out_w: usize, out_h: usize) -> Result<ImageBuffer> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!("cannot resize to {out_w}x{out_h}")));
    }
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(out_w * out_h * img.channels());
    for c in 0..img.channels() {
        data.extend(resize_plane(img.plane(c), w, h, out_w, out_h).into_iter().map(clamp_unit));
    }
    ImageBuffer::new(out_w, out_h, img.colorspace(), data)
}
