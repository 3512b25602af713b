use std::fs;
use std::path::Path;

use image::{ColorType, ImageFormat};

use super::{color_convert, ColorSpace, ImageBuffer};
use crate::{Error, Result};

/// 8-bit to unit-interval mapping.
pub fn from_u8(v: u8) -> f64 {
    v as f64 / 255.0
}

/// Unit-interval to 8-bit with round-half-away-from-zero.
pub fn to_u8(f: f64) -> u8 {
    (f * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Reads an 8-bit grayscale or colour PNG. Alpha is dropped.
pub fn read_png(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ColorType::L8 | ColorType::L16 | ColorType::La8 | ColorType::La16 => {
            let data = img.to_luma8().into_raw().into_iter().map(from_u8).collect();
            ImageBuffer::new(w, h, ColorSpace::Luma, data)
        }
        _ => {
            let raw = img.to_rgb8().into_raw();
            let n = w * h;
            let mut data = vec![0.0; 3 * n];
            for (i, px) in raw.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * n + i] = from_u8(px[c]);
                }
            }
            ImageBuffer::new(w, h, ColorSpace::Rgb, data)
        }
    }
}

fn encode(img: &ImageBuffer) -> Result<(Vec<u8>, ColorType)> {
    let img = match img.colorspace() {
        ColorSpace::YCbCr => color_convert(img, ColorSpace::Rgb)?,
        _ => img.clone(),
    };
    let n = img.width() * img.height();
    match img.colorspace() {
        ColorSpace::Luma => Ok((img.data().iter().map(|&v| to_u8(v)).collect(), ColorType::L8)),
        _ => {
            let d = img.data();
            let mut raw = Vec::with_capacity(3 * n);
            for i in 0..n {
                raw.extend([to_u8(d[i]), to_u8(d[n + i]), to_u8(d[2 * n + i])]);
            }
            Ok((raw, ColorType::Rgb8))
        }
    }
}

/// Writes an 8-bit PNG (grayscale for luma, RGB otherwise). The file is
/// written beside the target and renamed into place, so a failed write never
/// leaves a partial image at `path`.
pub fn write_png(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    let (raw, color) = encode(img)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    let saved = image::save_buffer_with_format(
        &tmp,
        &raw,
        img.width() as u32,
        img.height() as u32,
        color,
        ImageFormat::Png,
    );
    if let Err(e) = saved {
        let _ = fs::remove_file(&tmp);
        return Err(Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        });
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
