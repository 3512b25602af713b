//! PSNR, SSIM, IFC and VIF for increasingly noisy copies of a page.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use textsr::imagecore::{ColorSpace, ImageBuffer};
use textsr::iqa::evaluate;
use textsr::synth::text_page;

pub fn run_example() -> textsr::Result<()> {
    let page = text_page(128, 128, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    println!("{:>6} {:>8} {:>7} {:>10} {:>6}", "sigma", "psnr", "ssim", "ifc", "vif");
    for sigma in [0.0, 0.02, 0.05, 0.10] {
        let test = if sigma == 0.0 {
            page.clone()
        } else {
            let n = Normal::new(0.0, sigma).unwrap();
            let data = page.data().iter().map(|v| (v + n.sample(&mut rng)).clamp(0.0, 1.0)).collect();
            ImageBuffer::new(128, 128, ColorSpace::Luma, data)?
        };
        let r = evaluate(&page, &test)?;
        println!("{sigma:>6.2} {:>8.3} {:>7.4} {:>10.1} {:>6.3}", r.psnr, r.ssim, r.ifc, r.vif);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
