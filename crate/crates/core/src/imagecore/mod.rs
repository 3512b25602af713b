//! Image representation and the resampling substrate shared by every
//! pipeline stage.

mod color;
mod io;
mod patch;
mod resize;

pub use color::{color_convert, rgb_to_ycbcr_pixel, ycbcr_to_rgb_pixel};
pub use io::{from_u8, read_png, to_u8, write_png};
pub use patch::{sample_patch_pairs, PatchPair};
pub use resize::{bicubic_resize, catmull_rom, cubic_weights};
pub(crate) use resize::resize_plane;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColorSpace {
    Rgb,
    YCbCr,
    Luma,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Luma => 1,
            ColorSpace::Rgb | ColorSpace::YCbCr => 3,
        }
    }
}

/// Planar floating-point raster with samples in `[0, 1]`.
///
/// Samples are stored channel-major: plane `c` occupies
/// `data[c * w * h..(c + 1) * w * h]`, each plane row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    colorspace: ColorSpace,
    data: Vec<f64>,
}

impl ImageBuffer {
    /// Builds an image from planar samples, rejecting anything outside `[0, 1]`.
    pub fn new(width: usize, height: usize, colorspace: ColorSpace, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image dimensions must be nonzero, got {width}x{height}")));
        }
        let expected = width * height * colorspace.channels();
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "sample count {} does not match {width}x{height}x{}",
                data.len(),
                colorspace.channels()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            colorspace,
            data,
        })
    }

    /// Builds an image from arbitrary finite samples, clamping into `[0, 1]`.
    /// NaN samples map to 0.
    pub fn from_clamped(width: usize, height: usize, colorspace: ColorSpace, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = clamp_unit(*v);
        }
        Self::new(width, height, colorspace, data)
    }

    pub fn filled(width: usize, height: usize, colorspace: ColorSpace, value: f64) -> Result<Self> {
        Self::from_clamped(width, height, colorspace, vec![value; width * height * colorspace.channels()])
    }

    /// Single-channel image from a per-pixel function; results are clamped.
    pub fn luma_from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_clamped(width, height, ColorSpace::Luma, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.colorspace.channels()
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn is_luma(&self) -> bool {
        self.colorspace == ColorSpace::Luma
    }

    /// Mean over all samples.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance over all samples.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    /// Axis-aligned crop of every channel.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x + width > self.width || y + height > self.height {
            return Err(Error::invalid(format!(
                "crop {width}x{height}+{x}+{y} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.channels());
        for c in 0..self.channels() {
            let plane = self.plane(c);
            for row in y..y + height {
                let start = row * self.width + x;
                data.extend_from_slice(&plane[start..start + width]);
            }
        }
        Ok(Self {
            width,
            height,
            colorspace: self.colorspace,
            data,
        })
    }

    /// Luma view of any image: Y extraction for colour inputs, a clone otherwise.
    pub fn to_luma(&self) -> Result<Self> {
        match self.colorspace {
            ColorSpace::Luma => Ok(self.clone()),
            _ => color_convert(self, ColorSpace::Luma),
        }
    }

    /// Stacks single-channel planes into a multi-channel image.
    pub(crate) fn from_planes(width: usize, height: usize, colorspace: ColorSpace, planes: &[&[f64]]) -> Result<Self> {
        if planes.len() != colorspace.channels() {
            return Err(Error::invalid("plane count does not match colorspace"));
        }
        let data = planes.iter().flat_map(|p| p.iter().copied()).collect();
        Self::from_clamped(width, height, colorspace, data)
    }
}

pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_range() {
        assert!(ImageBuffer::new(2, 2, ColorSpace::Luma, vec![0.0; 3]).is_err());
        assert!(ImageBuffer::new(1, 1, ColorSpace::Luma, vec![1.5]).is_err());
        assert!(ImageBuffer::new(1, 1, ColorSpace::Rgb, vec![0.1, 0.2, 0.3]).is_ok());
    }

    #[test]
    fn clamps_on_request() {
        let img = ImageBuffer::from_clamped(2, 1, ColorSpace::Luma, vec![-1.0, 2.0]).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn crop_matches_indexing() {
        let img = ImageBuffer::luma_from_fn(5, 4, |x, y| (x + 5 * y) as f64 / 20.0).unwrap();
        let c = img.crop(1, 2, 3, 2).unwrap();
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(c.get(0, x, y), img.get(0, x + 1, y + 2));
            }
        }
        assert!(img.crop(3, 0, 3, 1).is_err());
    }
}
