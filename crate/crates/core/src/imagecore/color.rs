use super::{clamp_unit, ColorSpace, ImageBuffer};
use crate::{Error, Result};

// Full-range BT.601 luma weights.
const KR: f64 = 0.299;
const KB: f64 = 0.114;
const KG: f64 = 1.0 - KR - KB;

/// Unclamped full-range BT.601 forward transform; chroma is offset by 0.5.
pub fn rgb_to_ycbcr_pixel(r: f64, g: f64, b: f64) -> [f64; 3] {
    let y = KR * r + KG * g + KB * b;
    let cb = (b - y) / (2.0 * (1.0 - KB)) + 0.5;
    let cr = (r - y) / (2.0 * (1.0 - KR)) + 0.5;
    [y, cb, cr]
}

/// Exact algebraic inverse of [`rgb_to_ycbcr_pixel`], unclamped.
pub fn ycbcr_to_rgb_pixel(y: f64, cb: f64, cr: f64) -> [f64; 3] {
    let r = y + 2.0 * (1.0 - KR) * (cr - 0.5);
    let b = y + 2.0 * (1.0 - KB) * (cb - 0.5);
    let g = (y - KR * r - KB * b) / KG;
    [r, g, b]
}

/// Converts between RGB and YCbCr, or extracts luma from either.
pub fn color_convert(img: &ImageBuffer, target: ColorSpace) -> Result<ImageBuffer> {
    let from = img.colorspace();
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    match (from, target) {
        (ColorSpace::Rgb, ColorSpace::YCbCr) | (ColorSpace::YCbCr, ColorSpace::Rgb) => {
            let src = img.data();
            let mut out = vec![0.0; 3 * n];
            let f = if from == ColorSpace::Rgb {
                rgb_to_ycbcr_pixel
            } else {
                ycbcr_to_rgb_pixel
            };
            for i in 0..n {
                let px = f(src[i], src[n + i], src[2 * n + i]);
                for (c, v) in px.into_iter().enumerate() {
                    out[c * n + i] = clamp_unit(v);
                }
            }
            ImageBuffer::new(w, h, target, out)
        }
        (ColorSpace::YCbCr, ColorSpace::Luma) => ImageBuffer::new(w, h, ColorSpace::Luma, img.plane(0).to_vec()),
        (ColorSpace::Rgb, ColorSpace::Luma) => {
            let src = img.data();
            let y = (0..n)
                .map(|i| clamp_unit(KR * src[i] + KG * src[n + i] + KB * src[2 * n + i]))
                .collect();
            ImageBuffer::new(w, h, ColorSpace::Luma, y)
        }
        _ => Err(Error::invalid(format!("unsupported colour conversion {from:?} -> {target:?}"))),
    }
}
