//! Overfits the tiny network to twenty blurred patches.

use textsr::degrade::{degrade_pair, DegradeConfig};
use textsr::imagecore::sample_patch_pairs;
use textsr::model::ModelConfig;
use textsr::synth::text_page;
use textsr::train::{TrainConfig, Trainer};

pub fn run_example() -> textsr::Result<()> {
    let page = text_page(96, 96, 1);
    let (lr, hr) = degrade_pair(&page, &DegradeConfig::motion(5.0, 45.0, 2))?;
    let pairs = sample_patch_pairs(&lr, &hr, 10, 20, 1)?;
    let cfg = TrainConfig {
        patch: 10,
        steps: 300,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&pairs, &cfg, &ModelConfig::tiny(2))?;
    for step in 1..=cfg.steps {
        let loss = trainer.step()?;
        if step % 50 == 0 || step == 1 {
            println!("step {step:>4}  loss {loss:.5}");
        }
    }
    println!("inference mse {:.5}", trainer.evaluate_mse()?);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
