//! Saves a model to an `SDTD` file and loads it back.

use textsr::model::{init_model, ModelConfig, ModelWeights};
use textsr::persist::{load_model, save_model};

pub fn run_example() -> textsr::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| textsr::Error::Io { path: "tempdir".into(), source: e })?;
    let path = dir.path().join("desk.sdtd");
    let cfg = ModelConfig::desk(4);
    let w: ModelWeights = init_model(&cfg, 123)?;
    save_model(&w, &cfg, &path)?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    let (back, back_cfg) = load_model(&path)?;
    println!("{} parameters, {size} bytes on disk", w.param_count());
    println!("weights equal: {}, config equal: {}", back == w, back_cfg == cfg);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
