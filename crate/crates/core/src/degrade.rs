//! Synthetic degradation: point-spread-function blur followed by bicubic
//! decimation, producing (blurred LR, sharp HR) training pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imagecore::{bicubic_resize, ImageBuffer};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlurKind {
    Motion,
    Defocus,
    None,
}

impl BlurKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BlurKind::Motion => "motion",
            BlurKind::Defocus => "defocus",
            BlurKind::None => "none",
        }
    }
}

impl std::str::FromStr for BlurKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "motion" => Ok(BlurKind::Motion),
            "defocus" => Ok(BlurKind::Defocus),
            "none" => Ok(BlurKind::None),
            other => Err(Error::invalid(format!("unknown blur kind `{other}`"))),
        }
    }
}

/// Default parameter ranges used when a blur parameter is left unspecified.
pub const MOTION_LENGTH_RANGE: (f64, f64) = (3.0, 15.0);
pub const DEFOCUS_RADIUS_RANGE: (f64, f64) = (1.0, 4.0);
pub const ANGLE_RANGE: (f64, f64) = (0.0, 180.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradeConfig {
    pub kind: BlurKind,
    /// Motion extent in pixels.
    pub length: f64,
    /// Motion direction in degrees, counter-clockwise from +x.
    pub angle: f64,
    /// Defocus disk radius in pixels.
    pub radius: f64,
    pub scale: usize,
    pub seed: u64,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self {
            kind: BlurKind::None,
            length: 1.0,
            angle: 0.0,
            radius: 0.0,
            scale: 2,
            seed: 0,
        }
    }
}

impl DegradeConfig {
    pub fn motion(length: f64, angle: f64, scale: usize) -> Self {
        Self {
            kind: BlurKind::Motion,
            length,
            angle,
            scale,
            ..Self::default()
        }
    }

    pub fn defocus(radius: f64, scale: usize) -> Self {
        Self {
            kind: BlurKind::Defocus,
            radius,
            scale,
            ..Self::default()
        }
    }

    pub fn sharp(scale: usize) -> Self {
        Self {
            scale,
            ..Self::default()
        }
    }

    /// Draws any parameter given as `None` from the default ranges.
    pub fn randomized(
        kind: BlurKind,
        scale: usize,
        length: Option<f64>,
        angle: Option<f64>,
        radius: Option<f64>,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw_len = rng.random_range(MOTION_LENGTH_RANGE.0..=MOTION_LENGTH_RANGE.1);
        let draw_angle = rng.random_range(ANGLE_RANGE.0..ANGLE_RANGE.1);
        let draw_radius = rng.random_range(DEFOCUS_RADIUS_RANGE.0..=DEFOCUS_RADIUS_RANGE.1);
        let (length, angle, radius) = match kind {
            BlurKind::Motion => (length.unwrap_or(draw_len), angle.unwrap_or(draw_angle), 0.0),
            BlurKind::Defocus => (1.0, 0.0, radius.unwrap_or(draw_radius)),
            BlurKind::None => (1.0, 0.0, 0.0),
        };
        Self {
            kind,
            length,
            angle,
            radius,
            scale,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![1, 2, 4].contains(&self.scale) {
            return Err(Error::invalid(format!("scale must be 1, 2 or 4, got {}", self.scale)));
        }
        if !(self.length >= 1.0) || !self.length.is_finite() {
            return Err(Error::invalid(format!("motion length must be >= 1, got {}", self.length)));
        }
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(Error::invalid(format!("defocus radius must be >= 0, got {}", self.radius)));
        }
        if !self.angle.is_finite() {
            return Err(Error::invalid("angle must be finite"));
        }
        Ok(())
    }
}

/// Independent per-item seed derived from a run seed (splitmix64 finaliser).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Square blur kernel with nonnegative taps summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct BlurKernel {
    size: usize,
    taps: Vec<f64>,
}

impl BlurKernel {
    /// Row-major `size x size` taps. Taps must be nonnegative and sum to 1.
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size == 0 || taps.len() != size * size {
            return Err(Error::invalid(format!("{} taps for a {size}x{size} kernel", taps.len())));
        }
        if taps.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::invalid("kernel taps must be nonnegative"));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("kernel taps sum to {sum}, expected 1")));
        }
        Ok(Self { size, taps })
    }

    pub fn identity() -> Self {
        Self {
            size: 1,
            taps: vec![1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.taps[row * self.size + col]
    }

    /// Builds a kernel from unnormalised weights keyed by offset from the
    /// centre, trimmed to the smallest odd square holding the support.
    fn from_offsets(weights: &[((i64, i64), f64)]) -> Self {
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        let support: Vec<_> = weights.iter().filter(|(_, w)| *w > 0.0).collect();
        if support.is_empty() || !(total > 0.0) {
            return Self::identity();
        }
        let half = support
            .iter()
            .map(|((dx, dy), _)| dx.abs().max(dy.abs()))
            .max()
            .unwrap_or(0);
        let size = (2 * half + 1) as usize;
        let mut taps = vec![0.0; size * size];
        for ((dx, dy), w) in support {
            taps[((dy + half) as usize) * size + (dx + half) as usize] += w / total;
        }
        Self { size, taps }
    }
}

/// Line-segment length falling inside each unit pixel square for a segment of
/// `length` pixels centred on the origin.
fn motion_kernel(length: f64, angle_deg: f64) -> BlurKernel {
    let theta = angle_deg.to_radians();
    // Image rows grow downwards.
    let (dx, dy) = (theta.cos(), -theta.sin());
    let (x0, y0) = (-0.5 * length * dx, -0.5 * length * dy);
    let (x1, y1) = (0.5 * length * dx, 0.5 * length * dy);

    let mut cuts = vec![0.0, 1.0];
    let mut crossings = |a: f64, b: f64| {
        if (b - a).abs() < 1e-15 {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let mut k = (lo - 0.5).ceil();
        while k + 0.5 <= hi {
            let t = (k + 0.5 - a) / (b - a);
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
            k += 1.0;
        }
    };
    crossings(x0, x1);
    crossings(y0, y1);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut weights: Vec<((i64, i64), f64)> = Vec::new();
    for pair in cuts.windows(2) {
        let seg = (pair[1] - pair[0]) * length;
        if seg <= 0.0 {
            continue;
        }
        let tm = 0.5 * (pair[0] + pair[1]);
        let px = (x0 + tm * (x1 - x0)).round() as i64;
        let py = (y0 + tm * (y1 - y0)).round() as i64;
        match weights.iter_mut().find(|(k, _)| *k == (px, py)) {
            Some((_, w)) => *w += seg,
            None => weights.push(((px, py), seg)),
        }
    }
    BlurKernel::from_offsets(&weights)
}

/// Area of a centred disk inside each unit pixel square, by supersampling.
fn defocus_kernel(radius: f64) -> BlurKernel {
    const SUB: usize = 16;
    let reach = radius.ceil() as i64 + 1;
    let r2 = radius * radius;
    let offsets: Vec<f64> = (0..SUB).map(|m| (m as f64 + 0.5) / SUB as f64 - 0.5).collect();
    let mut weights = Vec::new();
    for py in -reach..=reach {
        for px in -reach..=reach {
            let mut count = 0usize;
            for oy in &offsets {
                let y = py as f64 + oy;
                for ox in &offsets {
                    let x = px as f64 + ox;
                    if x * x + y * y <= r2 {
                        count += 1;
                    }
                }
            }
            if count > 0 {
                weights.push(((px, py), count as f64));
            }
        }
    }
    BlurKernel::from_offsets(&weights)
}

pub fn make_blur_kernel(cfg: &DegradeConfig) -> Result<BlurKernel> {
    if cfg.length < 0.0 || cfg.radius < 0.0 {
        return Err(Error::invalid("blur length and radius must be nonnegative"));
    }
    match cfg.kind {
        BlurKind::Motion => {
            if !(cfg.length >= 1.0) {
                return Err(Error::invalid(format!("motion length must be >= 1, got {}", cfg.length)));
            }
            Ok(motion_kernel(cfg.length, cfg.angle))
        }
        BlurKind::Defocus => {
            if !cfg.radius.is_finite() {
                return Err(Error::invalid("defocus radius must be finite"));
            }
            Ok(defocus_kernel(cfg.radius))
        }
        BlurKind::None => Err(Error::invalid("blur kind `none` has no kernel")),
    }
}

/// Convolves each channel with `k` using replicated borders; output clamped.
pub fn convolve2d(img: &ImageBuffer, k: &BlurKernel) -> Result<ImageBuffer> {
    if k.size.is_multiple_of(2) {
        return Err(Error::invalid(format!("kernel size {} is even", k.size)));
    }
    let (w, h) = (img.width() as isize, img.height() as isize);
    let half = (k.size / 2) as isize;
    let mut data = Vec::with_capacity(img.data().len());
    for c in 0..img.channels() {
        let plane = img.plane(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for v in 0..k.size as isize {
                    let sy = (y + half - v).clamp(0, h - 1);
                    let row = &plane[(sy * w) as usize..((sy + 1) * w) as usize];
                    for u in 0..k.size as isize {
                        let t = k.taps[(v * k.size as isize + u) as usize];
                        if t != 0.0 {
                            acc += t * row[(x + half - u).clamp(0, w - 1) as usize];
                        }
                    }
                }
                data.push(acc);
            }
        }
    }
    ImageBuffer::from_clamped(img.width(), img.height(), img.colorspace(), data)
}

/// Produces `(blurred LR, sharp HR)` from a sharp image: blur (unless the
/// kind is `None`), then bicubic decimation by the scale.
pub fn degrade_pair(sharp: &ImageBuffer, cfg: &DegradeConfig) -> Result<(ImageBuffer, ImageBuffer)> {
    cfg.validate()?;
    let s = cfg.scale;
    if !sharp.width().is_multiple_of(s) || !sharp.height().is_multiple_of(s) {
        return Err(Error::invalid(format!(
            "{}x{} is not divisible by scale {s}",
            sharp.width(),
            sharp.height()
        )));
    }
    let hr = sharp.to_luma()?;
    let blurred = match cfg.kind {
        BlurKind::None => hr.clone(),
        _ => convolve2d(&hr, &make_blur_kernel(cfg)?)?,
    };
    let lr = bicubic_resize(&blurred, hr.width() / s, hr.height() / s)?;
    Ok((lr, hr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::ColorSpace;
    use proptest::prelude::*;
    use rand::Rng;

    fn assert_valid(k: &BlurKernel) {
        assert_eq!(k.size() % 2, 1);
        assert!(k.taps().iter().all(|&t| t >= 0.0));
        assert!((k.taps().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_kernels_are_deltas() {
        for angle in [0.0, 17.0, 45.0, 90.0, 133.0] {
            let k = make_blur_kernel(&DegradeConfig::motion(1.0, angle, 2)).unwrap();
            assert_eq!(k, BlurKernel::identity(), "angle {angle}");
        }
        let k = make_blur_kernel(&DegradeConfig::defocus(0.0, 2)).unwrap();
        assert_eq!(k, BlurKernel::identity());
    }

    #[test]
    fn horizontal_motion_is_uniform_row() {
        let k = make_blur_kernel(&DegradeConfig::motion(5.0, 0.0, 2)).unwrap();
        assert_eq!(k.size(), 5);
        for r in 0..5 {
            for c in 0..5 {
                let expected = if r == 2 { 0.2 } else { 0.0 };
                assert!((k.get(r, c) - expected).abs() < 1e-12, "({r},{c}) = {}", k.get(r, c));
            }
        }
    }

    #[test]
    fn vertical_motion_is_uniform_column() {
        let k = make_blur_kernel(&DegradeConfig::motion(3.0, 90.0, 2)).unwrap();
        assert_eq!(k.size(), 3);
        for r in 0..3 {
            assert!((k.get(r, 1) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_parameters_are_rejected() {
        assert!(make_blur_kernel(&DegradeConfig::motion(-2.0, 0.0, 2)).is_err());
        assert!(make_blur_kernel(&DegradeConfig::defocus(-1.0, 2)).is_err());
        assert!(make_blur_kernel(&DegradeConfig::sharp(2)).is_err());
    }

    #[test]
    fn identity_and_constant_convolution() {
        let img = ImageBuffer::luma_from_fn(9, 7, |x, y| ((x * 5 + y * 3) % 11) as f64 / 10.0).unwrap();
        assert_eq!(convolve2d(&img, &BlurKernel::identity()).unwrap(), img);
        let mut taps = vec![0.0; 9];
        taps[4] = 1.0;
        assert_eq!(convolve2d(&img, &BlurKernel::new(3, taps).unwrap()).unwrap(), img);

        let flat = ImageBuffer::filled(12, 12, ColorSpace::Luma, 0.42).unwrap();
        let k = make_blur_kernel(&DegradeConfig::defocus(2.5, 2)).unwrap();
        let out = convolve2d(&flat, &k).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.42).abs() < 1e-9));
    }

    #[test]
    fn even_kernel_is_rejected() {
        let img = ImageBuffer::filled(4, 4, ColorSpace::Luma, 0.5).unwrap();
        let k = BlurKernel::new(2, vec![0.25; 4]).unwrap();
        assert!(matches!(convolve2d(&img, &k), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn box_blur_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..256).map(|_| rng.random::<f64>()).collect();
        let img = ImageBuffer::new(16, 16, ColorSpace::Luma, data).unwrap();
        let k = BlurKernel::new(3, vec![1.0 / 9.0; 9]).unwrap();
        let out = convolve2d(&img, &k).unwrap();
        for y in 1..15 {
            for x in 1..15 {
                let mut direct = 0.0;
                for dy in 0..3 {
                    for dx in 0..3 {
                        direct += img.get(0, x + dx - 1, y + dy - 1) / 9.0;
                    }
                }
                assert!((out.get(0, x, y) - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degrade_stage_identities() {
        let img = crate::synth::text_page(64, 64, 8);
        let (lr, hr) = degrade_pair(&img, &DegradeConfig::sharp(1)).unwrap();
        assert_eq!(lr, hr);
        let (lr, hr) = degrade_pair(&img, &DegradeConfig::sharp(2)).unwrap();
        assert_eq!(hr, img);
        assert_eq!(lr, bicubic_resize(&img, 32, 32).unwrap());
        assert!(degrade_pair(&crate::synth::text_page(30, 30, 1), &DegradeConfig::sharp(4)).is_err());
    }

    #[test]
    fn motion_blur_lowers_variance_of_checkerboard() {
        let board = ImageBuffer::luma_from_fn(64, 64, |x, y| if (x / 4 + y / 4) % 2 == 0 { 0.9 } else { 0.1 }).unwrap();
        let (sharp_lr, _) = degrade_pair(&board, &DegradeConfig::sharp(2)).unwrap();
        let (blur_lr, hr) = degrade_pair(&board, &DegradeConfig::motion(9.0, 0.0, 2)).unwrap();
        assert_eq!((blur_lr.width(), hr.width()), (32, 64));
        assert!(blur_lr.variance() < sharp_lr.variance());
    }

    #[test]
    fn convolution_roughly_preserves_mean() {
        let img = crate::synth::text_page(48, 48, 2);
        let k = make_blur_kernel(&DegradeConfig::motion(7.0, 30.0, 2)).unwrap();
        let out = convolve2d(&img, &k).unwrap();
        assert!((out.mean() - img.mean()).abs() < 2.0 / 48.0);
    }

    proptest! {
        #[test]
        fn motion_kernels_are_normalised(length in 1.0f64..20.0, angle in -180.0f64..360.0) {
            let k = make_blur_kernel(&DegradeConfig::motion(length, angle, 2)).unwrap();
            assert_valid(&k);
            prop_assert!(k.size() as f64 <= length + 2.0);
        }

        #[test]
        fn defocus_kernels_are_symmetric(radius in 0.0f64..6.0) {
            let k = make_blur_kernel(&DegradeConfig::defocus(radius, 2)).unwrap();
            assert_valid(&k);
            let n = k.size();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(k.get(i, j), k.get(n - 1 - i, n - 1 - j));
                }
            }
        }
    }
}
