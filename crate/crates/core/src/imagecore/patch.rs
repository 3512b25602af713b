use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ImageBuffer;
use crate::{Error, Result};

/// Aligned low-/high-resolution crops: `hr` is the crop of the HR source at
/// `(S * origin.0, S * origin.1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub lr: ImageBuffer,
    pub hr: ImageBuffer,
    pub origin: (usize, usize),
}

impl PatchPair {
    pub fn scale(&self) -> usize {
        self.hr.width() / self.lr.width()
    }
}

/// Integer scale between an LR/HR pair, if one exists.
pub(crate) fn integer_scale(lr: &ImageBuffer, hr: &ImageBuffer) -> Result<usize> {
    let s = hr.width() / lr.width();
    if s == 0 || hr.width() != s * lr.width() || hr.height() != s * lr.height() {
        return Err(Error::invalid(format!(
            "{}x{} is not an integer multiple of {}x{}",
            hr.width(),
            hr.height(),
            lr.width(),
            lr.height()
        )));
    }
    Ok(s)
}

/// Draws `n` random `p x p` LR crops and their matching `Sp x Sp` HR crops.
pub fn sample_patch_pairs(lr: &ImageBuffer, hr: &ImageBuffer, p: usize, n: usize, seed: u64) -> Result<Vec<PatchPair>> {
    if !lr.is_luma() || !hr.is_luma() {
        return Err(Error::invalid("patch sampling expects luma images"));
    }
    let s = integer_scale(lr, hr)?;
    if p == 0 || p > lr.width().min(lr.height()) {
        return Err(Error::invalid(format!(
            "patch size {p} does not fit a {}x{} image",
            lr.width(),
            lr.height()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (max_x, max_y) = (lr.width() - p, lr.height() - p);
    (0..n)
        .map(|_| {
            let x = rng.random_range(0..=max_x);
            let y = rng.random_range(0..=max_y);
            Ok(PatchPair {
                lr: lr.crop(x, y, p, p)?,
                hr: hr.crop(s * x, s * y, s * p, s * p)?,
                origin: (x, y),
            })
        })
        .collect()
}
