//! Super-resolves a colour image: luma through the network, chroma bicubic.

use textsr::imagecore::{ColorSpace, ImageBuffer};
use textsr::iqa::psnr;
use textsr::model::{bicubic_upscale, init_model, super_resolve, ModelConfig, ModelWeights};
use textsr::synth::text_page;

pub fn run_example() -> textsr::Result<()> {
    let page = text_page(80, 48, 9);
    let ink = page.data();
    let rgb: Vec<f64> = [ink.to_vec(), ink.iter().map(|v| 0.2 + 0.8 * v).collect(), ink.iter().map(|v| v * v).collect()].concat();
    let img = ImageBuffer::new(80, 48, ColorSpace::Rgb, rgb)?;

    let cfg = ModelConfig::desk(2);
    let zero = ModelWeights::<f32>::zeros(&cfg)?;
    let out = super_resolve(&zero, &cfg, &img)?;
    let bicubic = bicubic_upscale(&img, 2)?;
    println!(
        "zero weights: {}x{} output, identical to bicubic: {}",
        out.width(),
        out.height(),
        out == bicubic
    );

    let random: ModelWeights<f32> = init_model(&cfg, 7)?;
    let noisy = super_resolve(&random, &cfg, &img)?;
    println!(
        "untrained weights: luma psnr vs bicubic {:.2} dB",
        psnr(&bicubic.to_luma()?, &noisy.to_luma()?, 1.0)?
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
