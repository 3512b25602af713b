//! The command-line pipeline driven from code: degrade, train, infer and
//! score, all inside a temporary directory.

use textsr::cli::{run_degrade, run_eval_iqa, run_infer, run_train, DegradeRun, EvalIqaRun, InferRun, Profile, TrainRun};
use textsr::degrade::BlurKind;
use textsr::imagecore::write_png;
use textsr::synth::text_page;

pub fn run_example() -> textsr::Result<()> {
    let tmp = tempfile::tempdir().map_err(|e| textsr::Error::Io { path: "tempdir".into(), source: e })?;
    let root = tmp.path();
    let sharp = root.join("sharp");
    std::fs::create_dir_all(&sharp).map_err(|e| textsr::Error::Io { path: sharp.clone(), source: e })?;
    for i in 0..3 {
        write_png(sharp.join(format!("page{i}.png")), &text_page(64, 64, i))?;
    }

    let pairs = root.join("pairs");
    let items = run_degrade(&DegradeRun {
        input: sharp,
        output: pairs.clone(),
        kind: BlurKind::Defocus,
        radius: Some(1.5),
        seed: 3,
        ..DegradeRun::default()
    })?;
    println!("degraded {} images", items.len());

    let model = root.join("model.sdtd");
    let losses = run_train(&TrainRun {
        data: pairs.clone(),
        out: model.clone(),
        profile: Profile::Tiny,
        steps: 40,
        patch: 8,
        patches_per_image: 5,
        batch: 5,
        ..TrainRun::default()
    })?;
    println!("loss {:.4} -> {:.4}", losses[0], losses[losses.len() - 1]);

    let (refs, outs) = (root.join("ref"), root.join("out"));
    for d in [&refs, &outs] {
        std::fs::create_dir_all(d).map_err(|e| textsr::Error::Io { path: d.to_path_buf(), source: e })?;
    }
    for i in 0..3 {
        let name = format!("page{i}.png");
        std::fs::copy(pairs.join(format!("page{i}_hr.png")), refs.join(&name))
            .map_err(|e| textsr::Error::Io { path: refs.join(&name), source: e })?;
        run_infer(&InferRun {
            model: model.clone(),
            input: pairs.join(format!("page{i}_lr.png")),
            output: outs.join(&name),
        })?;
    }
    for (name, r) in run_eval_iqa(&EvalIqaRun {
        ref_dir: refs,
        test_dir: outs,
        out: root.join("iqa.csv"),
    })? {
        println!("{name}: psnr {:.2} ssim {:.3} vif {:.3}", r.psnr, r.ssim, r.vif);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
