//! Synthesises a text page and degrades it with motion and defocus blur.

use textsr::degrade::{degrade_pair, make_blur_kernel, BlurKind, DegradeConfig};
use textsr::iqa::psnr;
use textsr::model::bicubic_upscale;
use textsr::synth::text_page;

pub fn run_example() -> textsr::Result<()> {
    let page = text_page(128, 96, 42);
    for cfg in [
        DegradeConfig::sharp(2),
        DegradeConfig::motion(7.0, 30.0, 2),
        DegradeConfig::defocus(2.5, 2),
        DegradeConfig::motion(5.0, 90.0, 4),
    ] {
        let size = match cfg.kind {
            BlurKind::None => 1,
            _ => make_blur_kernel(&cfg)?.size(),
        };
        let (lr, hr) = degrade_pair(&page, &cfg)?;
        let baseline = psnr(&hr, &bicubic_upscale(&lr, cfg.scale)?, 1.0)?;
        println!(
            "{:<8} kernel {size:>2}x{size:<2} lr {}x{}  bicubic psnr {baseline:.2} dB",
            cfg.kind.as_str(),
            lr.width(),
            lr.height()
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
