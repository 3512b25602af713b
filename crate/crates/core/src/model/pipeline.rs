use super::config::ModelConfig;
use super::network::predict_branch;
use super::tensor::{Scalar, Tensor};
use super::weights::ModelWeights;
use crate::imagecore::{bicubic_resize, clamp_unit, color_convert, ColorSpace, ImageBuffer};
use crate::Result;

fn split_luma(img: &ImageBuffer) -> Result<(ImageBuffer, Option<ImageBuffer>)> {
    match img.colorspace() {
        ColorSpace::Luma => Ok((img.clone(), None)),
        ColorSpace::Rgb | ColorSpace::YCbCr => {
            let ycc = if img.colorspace() == ColorSpace::Rgb {
                color_convert(img, ColorSpace::YCbCr)?
            } else {
                img.clone()
            };
            Ok((color_convert(&ycc, ColorSpace::Luma)?, Some(ycc)))
        }
    }
}

fn merge(y: ImageBuffer, ycc: Option<&ImageBuffer>, target: ColorSpace) -> Result<ImageBuffer> {
    let Some(ycc) = ycc else { return Ok(y) };
    let up = bicubic_resize(ycc, y.width(), y.height())?;
    let merged = ImageBuffer::from_planes(y.width(), y.height(), ColorSpace::YCbCr, &[y.data(), up.plane(1), up.plane(2)])?;
    if target == ColorSpace::Rgb {
        color_convert(&merged, ColorSpace::Rgb)
    } else {
        Ok(merged)
    }
}

/// Bicubic `s`x upscale through the same YCbCr route the network pipeline
/// uses for colour images; a plain resize for luma.
pub fn bicubic_upscale(img: &ImageBuffer, s: usize) -> Result<ImageBuffer> {
    let (y, ycc) = split_luma(img)?;
    let y_up = bicubic_resize(&y, s * y.width(), s * y.height())?;
    merge(y_up, ycc.as_ref(), img.colorspace())
}

/// Super-resolves an image: the network runs on luma only, chroma planes are
/// bicubically upscaled and recombined. Output samples are clamped.
pub fn super_resolve<T: Scalar>(w: &ModelWeights<T>, cfg: &ModelConfig, img: &ImageBuffer) -> Result<ImageBuffer> {
    let s = cfg.scale;
    let (y, ycc) = split_luma(img)?;
    let branch = predict_branch(w, cfg, &Tensor::<T>::from_luma(&y)?)?;
    let y_up = bicubic_resize(&y, s * y.width(), s * y.height())?;
    let data = y_up
        .data()
        .iter()
        .zip(branch.data())
        .map(|(&u, b)| clamp_unit(u + b.to_f64_lossy()))
        .collect();
    let y_sr = ImageBuffer::new(y_up.width(), y_up.height(), ColorSpace::Luma, data)?;
    merge(y_sr, ycc.as_ref(), img.colorspace())
}
