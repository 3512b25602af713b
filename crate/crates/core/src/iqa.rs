//! Full-reference image quality: PSNR, SSIM and the information-fidelity
//! pair IFC/VIF over a pixel-domain Gaussian scale space.
//!
//! All metrics work on luma samples in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::imagecore::ImageBuffer;
use crate::{Error, Result};

/// SSIM stabilisers for unit dynamic range.
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

/// Visual-noise variance of the information-fidelity model: 2.0 in 8-bit
/// units, rescaled to the unit range.
pub const VISUAL_NOISE_VAR: f64 = 2.0 / (255.0 * 255.0);
/// Variance floor, 1e-10 in 8-bit units.
const VAR_EPS: f64 = 1e-10 / (255.0 * 255.0);
/// Scale-space depth used by [`ifc`] and [`vif`].
pub const FIDELITY_LEVELS: usize = 4;
/// Smallest level edge the scale space will produce.
pub const MIN_LEVEL_DIM: usize = 4;

/// Per-image quality record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqaReport {
    /// Decibels; `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ssim: f64,
    pub ifc: f64,
    pub vif: f64,
}

fn check_pair(reference: &ImageBuffer, test: &ImageBuffer) -> Result<()> {
    if reference.width() != test.width() || reference.height() != test.height() {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            test.width(),
            test.height()
        )));
    }
    if !reference.is_luma() || !test.is_luma() {
        return Err(Error::invalid("quality metrics expect luma images"));
    }
    Ok(())
}

pub fn psnr(reference: &ImageBuffer, test: &ImageBuffer, max_val: f64) -> Result<f64> {
    check_pair(reference, test)?;
    let n = reference.data().len() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / mse).log10())
}

fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable filter over the fully-overlapping ("valid") region.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = taps.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = taps.iter().enumerate().map(|(t, &c)| c * src[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(t, &c)| c * tmp[(y + t) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Separable filter with replicated borders; output has the input size.
pub(crate) fn filter_same(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let (wi, hi) = (w as isize, h as isize);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..wi {
            tmp[y * w + x as usize] = taps
                .iter()
                .enumerate()
                .map(|(t, &c)| c * row[(x + t as isize - r).clamp(0, wi - 1) as usize])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..hi {
        for x in 0..w {
            out[y as usize * w + x] = taps
                .iter()
                .enumerate()
                .map(|(t, &c)| c * tmp[(y + t as isize - r).clamp(0, hi - 1) as usize * w + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all 11x11 Gaussian windows (sigma 1.5) lying fully inside
/// the image.
pub fn ssim(reference: &ImageBuffer, test: &ImageBuffer) -> Result<f64> {
    check_pair(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}")));
    }
    let taps = gaussian_taps(SSIM_SIGMA, SSIM_WINDOW / 2);
    let (x, y) = (reference.data(), test.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, _, _) = filter_valid(x, w, h, &taps);
    let (my, _, _) = filter_valid(y, w, h, &taps);
    let (exx, _, _) = filter_valid(&xx, w, h, &taps);
    let (eyy, _, _) = filter_valid(&yy, w, h, &taps);
    let (exy, _, _) = filter_valid(&xy, w, h, &taps);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = exx[i] - ux * ux;
            let vy = eyy[i] - uy * uy;
            let cxy = exy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// One level of the Gaussian scale space: the level image minus its local
/// Gaussian mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Subband {
    pub width: usize,
    pub height: usize,
    /// Gaussian width used at this level.
    pub sigma: f64,
    pub data: Vec<f64>,
}

impl Subband {
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Gaussian width at `level` (0-based): `(2^(4 - level) + 1) / 5`.
pub fn level_sigma(level: usize) -> f64 {
    (2f64.powi(4 - level as i32) + 1.0) / 5.0
}

/// Window taps for a level: `2 * ceil(3 sigma) + 1` wide.
pub fn level_taps(level: usize) -> Vec<f64> {
    let sigma = level_sigma(level);
    gaussian_taps(sigma, (3.0 * sigma).ceil() as usize)
}

/// Multi-level decomposition: at each level the image is Gaussian filtered
/// (replicated borders), the filtered image is subtracted to form the
/// subband, and the filtered image is decimated by 2 for the next level.
pub fn scale_space(img: &ImageBuffer, levels: usize) -> Result<Vec<Subband>> {
    if levels == 0 {
        return Err(Error::invalid("scale space needs at least one level"));
    }
    if !img.is_luma() {
        return Err(Error::invalid("scale space expects a luma image"));
    }
    let (mut w, mut h) = (img.width(), img.height());
    let mut cur = img.data().to_vec();
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        if w < MIN_LEVEL_DIM || h < MIN_LEVEL_DIM {
            return Err(Error::invalid(format!(
                "image too small for {levels} levels: level {level} would be {w}x{h}"
            )));
        }
        let taps = level_taps(level);
        let blurred = filter_same(&cur, w, h, &taps);
        let data = cur.iter().zip(&blurred).map(|(a, b)| a - b).collect();
        out.push(Subband {
            width: w,
            height: h,
            sigma: level_sigma(level),
            data,
        });
        if level + 1 < levels {
            let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
            let mut next = Vec::with_capacity(nw * nh);
            for y in 0..nh {
                for x in 0..nw {
                    next.push(blurred[2 * y * w + 2 * x]);
                }
            }
            cur = next;
            w = nw;
            h = nh;
        }
    }
    Ok(out)
}

/// Information shared between reference and test (`numerator`, i.e. IFC) and
/// the reference self-information (`denominator`), in bits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fidelity {
    pub numerator: f64,
    pub denominator: f64,
}

impl Fidelity {
    pub fn vif(&self) -> f64 {
        if self.denominator > 0.0 {
            self.numerator / self.denominator
        } else {
            // Featureless reference: fidelity is perfect iff nothing was added.
            if self.numerator > 0.0 {
                0.0
            } else {
                1.0
            }
        }
    }
}

pub fn information_fidelity(reference: &ImageBuffer, test: &ImageBuffer) -> Result<Fidelity> {
    check_pair(reference, test)?;
    let rs = scale_space(reference, FIDELITY_LEVELS)?;
    let ts = scale_space(test, FIDELITY_LEVELS)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (level, (c, d)) in rs.iter().zip(&ts).enumerate() {
        let taps = level_taps(level);
        let (w, h) = (c.width, c.height);
        let cc: Vec<f64> = c.data.iter().map(|v| v * v).collect();
        let dd: Vec<f64> = d.data.iter().map(|v| v * v).collect();
        let cd: Vec<f64> = c.data.iter().zip(&d.data).map(|(a, b)| a * b).collect();
        let mu1 = filter_same(&c.data, w, h, &taps);
        let mu2 = filter_same(&d.data, w, h, &taps);
        let e11 = filter_same(&cc, w, h, &taps);
        let e22 = filter_same(&dd, w, h, &taps);
        let e12 = filter_same(&cd, w, h, &taps);
        for i in 0..w * h {
            let mut s1 = (e11[i] - mu1[i] * mu1[i]).max(0.0);
            let s2 = (e22[i] - mu2[i] * mu2[i]).max(0.0);
            let s12 = e12[i] - mu1[i] * mu2[i];
            let mut g = s12 / (s1 + VAR_EPS);
            let mut sv = s2 - g * s12;
            if s1 < VAR_EPS {
                g = 0.0;
                sv = s2;
                s1 = 0.0;
            }
            if s2 < VAR_EPS {
                g = 0.0;
                sv = 0.0;
            }
            if g < 0.0 {
                sv = s2;
                g = 0.0;
            }
            if sv <= VAR_EPS {
                sv = VAR_EPS;
            }
            num += (1.0 + g * g * s1 / (sv + VISUAL_NOISE_VAR)).log2();
            den += (1.0 + s1 / VISUAL_NOISE_VAR).log2();
        }
    }
    Ok(Fidelity {
        numerator: num,
        denominator: den,
    })
}

/// Information fidelity criterion: bits of reference information preserved
/// in the test image.
pub fn ifc(reference: &ImageBuffer, test: &ImageBuffer) -> Result<f64> {
    Ok(information_fidelity(reference, test)?.numerator)
}

/// Visual information fidelity: [`ifc`] normalised by the reference
/// self-information.
pub fn vif(reference: &ImageBuffer, test: &ImageBuffer) -> Result<f64> {
    Ok(information_fidelity(reference, test)?.vif())
}

/// All four metrics on the luma of both images.
pub fn evaluate(reference: &ImageBuffer, test: &ImageBuffer) -> Result<IqaReport> {
    let (r, t) = (reference.to_luma()?, test.to_luma()?);
    let fid = information_fidelity(&r, &t)?;
    Ok(IqaReport {
        psnr: psnr(&r, &t, 1.0)?,
        ssim: ssim(&r, &t)?,
        ifc: fid.numerator,
        vif: fid.vif(),
    })
}
