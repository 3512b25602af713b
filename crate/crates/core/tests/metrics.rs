use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use textsr::degrade::{convolve2d, BlurKernel};
use textsr::imagecore::{ColorSpace, ImageBuffer};
use textsr::iqa::{evaluate, ifc, information_fidelity, psnr, scale_space, ssim, vif};
use textsr::synth::text_page;

fn noisy(img: &ImageBuffer, sigma: f64, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    let data = img.data().iter().map(|v| (v + n.sample(&mut rng)).clamp(0.0, 1.0)).collect();
    ImageBuffer::new(img.width(), img.height(), ColorSpace::Luma, data).unwrap()
}

fn flat(w: usize, h: usize, v: f64) -> ImageBuffer {
    ImageBuffer::filled(w, h, ColorSpace::Luma, v).unwrap()
}

#[test]
fn closed_form_cases() {
    let p = psnr(&flat(16, 16, 0.5), &flat(16, 16, 0.6), 1.0).unwrap();
    assert_eq!(format!("{p:.3}"), "20.000");
    let s = ssim(&flat(16, 16, 0.5), &flat(16, 16, 0.6)).unwrap();
    assert!((s - 0.9836).abs() < 1e-4);
    assert!((s - (0.6 + 1e-4) / (0.61 + 1e-4)).abs() < 1e-6);
}

#[test]
fn self_comparison() {
    for seed in 0..3 {
        let page = text_page(96, 80, seed);
        assert_eq!(psnr(&page, &page, 1.0).unwrap(), f64::INFINITY);
        assert!((ssim(&page, &page).unwrap() - 1.0).abs() < 1e-12);
        assert!((vif(&page, &page).unwrap() - 1.0).abs() < 1e-9);
        let f = information_fidelity(&page, &page).unwrap();
        assert!((f.numerator - f.denominator).abs() < 1e-9 * f.denominator);
    }
}

#[test]
fn symmetry_and_ranges() {
    let page = text_page(64, 64, 4);
    let other = noisy(&page, 0.07, 1);
    assert_eq!(psnr(&page, &other, 1.0).unwrap(), psnr(&other, &page, 1.0).unwrap());
    let (a, b) = (ssim(&page, &other).unwrap(), ssim(&other, &page).unwrap());
    assert!((a - b).abs() < 1e-12);
    assert!((-1.0..=1.0).contains(&a));
    assert!(vif(&page, &other).unwrap() >= 0.0);
    assert!(ifc(&page, &other).unwrap() >= 0.0);
}

#[test]
fn vif_is_ifc_over_self_information() {
    let page = text_page(80, 80, 5);
    let self_info = ifc(&page, &page).unwrap();
    for sigma in [0.01, 0.05, 0.2] {
        let test = noisy(&page, sigma, 2);
        let ratio = ifc(&page, &test).unwrap() / self_info;
        assert!((ratio - vif(&page, &test).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn constant_test_image_shares_no_information() {
    let page = text_page(80, 80, 6);
    let blank = flat(80, 80, page.mean());
    assert!(ifc(&page, &blank).unwrap() < 0.01 * ifc(&page, &page).unwrap());
}

#[test]
fn all_metrics_fall_with_noise() {
    let page = text_page(128, 128, 3);
    let reports: Vec<_> = [0.02, 0.05, 0.10]
        .iter()
        .map(|&s| evaluate(&page, &noisy(&page, s, 11)).unwrap())
        .collect();
    for w in reports.windows(2) {
        assert!(w[1].psnr < w[0].psnr);
        assert!(w[1].ssim < w[0].ssim);
        assert!(w[1].ifc < w[0].ifc);
        assert!(w[1].vif < w[0].vif);
    }
}

#[test]
fn box_blur_loses_more_than_light_noise() {
    let page = text_page(128, 128, 8);
    let blurred = convolve2d(&page, &BlurKernel::new(3, vec![1.0 / 9.0; 9]).unwrap()).unwrap();
    let light = noisy(&page, 0.01, 4);
    assert!(vif(&page, &blurred).unwrap() < vif(&page, &light).unwrap());
    assert!(vif(&page, &light).unwrap() < 1.0);
}

#[test]
fn rgb_inputs_are_scored_on_luma() {
    let page = text_page(48, 48, 9);
    let rgb = ImageBuffer::new(48, 48, ColorSpace::Rgb, [page.data(), page.data(), page.data()].concat()).unwrap();
    let a = evaluate(&rgb, &rgb).unwrap();
    assert_eq!(a.psnr, f64::INFINITY);
    assert!((a.vif - 1.0).abs() < 1e-9);
    assert!(psnr(&rgb, &rgb, 1.0).is_err());
    assert!(psnr(&page, &flat(40, 48, 0.1), 1.0).is_err());
}

// Independent 2-D Gaussian filtering with replicated borders.
fn gauss2d(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut weights = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            weights.push((dy, dx, (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()));
        }
    }
    let norm: f64 = weights.iter().map(|w| w.2).sum();
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for &(dy, dx, k) in &weights {
                let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                acc += k * src[sy * w + sx];
            }
            out[y as usize * w + x as usize] = acc / norm;
        }
    }
    out
}

#[test]
fn scale_space_matches_direct_filter_and_subtract() {
    let (w0, h0) = (48, 40);
    let mut data = vec![0.0; w0 * h0];
    data[17 * w0 + 22] = 1.0;
    let img = ImageBuffer::new(w0, h0, ColorSpace::Luma, data.clone()).unwrap();
    let bands = scale_space(&img, 4).unwrap();

    let (mut cur, mut w, mut h) = (data, w0, h0);
    for (level, band) in bands.iter().enumerate() {
        let sigma = (2f64.powi(4 - level as i32) + 1.0) / 5.0;
        let blurred = gauss2d(&cur, w, h, sigma);
        let energy: f64 = cur.iter().zip(&blurred).map(|(a, b)| (a - b) * (a - b)).sum();
        assert_eq!((band.width, band.height), (w, h));
        assert!((band.energy() - energy).abs() < 1e-9, "level {level}");
        let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
        cur = (0..nh).flat_map(|y| (0..nw).map(move |x| (y, x))).map(|(y, x)| blurred[2 * y * w + 2 * x]).collect();
        w = nw;
        h = nh;
    }
}
