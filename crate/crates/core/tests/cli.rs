use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use textsr::cli::RunManifest;
use textsr::imagecore::{read_png, write_png, ColorSpace, ImageBuffer};
use textsr::model::{bicubic_upscale, ModelConfig, ModelWeights};
use textsr::persist::save_model;
use textsr::synth::text_page;

fn textsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textsr")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sharp_dir(root: &Path) -> std::path::PathBuf {
    let dir = root.join("sharp");
    fs::create_dir_all(&dir).unwrap();
    for i in 0..2 {
        write_png(dir.join(format!("page{i}.png")), &text_page(66, 48, i)).unwrap();
    }
    dir
}

#[test]
fn degrade_writes_pairs_manifest_and_replays_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let sharp = sharp_dir(tmp.path());
    let out = tmp.path().join("pairs");
    let o = textsr(&["degrade", "--in", s(&sharp), "--out", s(&out), "--kind", "motion", "--scale", "2", "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lr = read_png(out.join("page0_lr.png")).unwrap();
    let hr = read_png(out.join("page0_hr.png")).unwrap();
    assert_eq!((lr.width(), lr.height(), hr.width(), hr.height()), (33, 24, 66, 48));
    let csv = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert!(csv.starts_with("stem,kind,length,angle,radius,scale,seed\n"));
    assert_eq!(csv.lines().count(), 3);

    let manifest = RunManifest::read(out.join("run.json")).unwrap();
    assert_eq!(manifest.seed, 5);
    assert_eq!(manifest.config["kind"], "motion");
    let first = fs::read(out.join("page1_lr.png")).unwrap();
    fs::remove_file(out.join("page1_lr.png")).unwrap();
    assert_eq!(code(&textsr(&["replay", s(&out.join("run.json"))])), 0);
    assert_eq!(fs::read(out.join("page1_lr.png")).unwrap(), first);
}

#[test]
fn train_then_infer_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let sharp = sharp_dir(tmp.path());
    let pairs = tmp.path().join("pairs");
    assert_eq!(code(&textsr(&["degrade", "--in", s(&sharp), "--out", s(&pairs), "--seed", "1"])), 0);
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[train]\nprofile = \"tiny\"\npatch = 8\npatches_per_image = 4\nbatch = 4\nsteps = 50\n").unwrap();
    let model = tmp.path().join("m.sdtd");
    let o = textsr(&[
        "train", "--config", s(&cfg), "--data", s(&pairs), "--mode", "sdt", "--steps", "6", "--out", s(&model), "--seed", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(tmp.path().join("m.sdtd.loss.csv")).unwrap();
    assert!(log.starts_with("step,loss\n"));
    assert_eq!(log.lines().count(), 7, "flag must override the file's steps");
    let manifest = RunManifest::read(tmp.path().join("m.sdtd.run.json")).unwrap();
    assert_eq!(manifest.config["batch"], 4);
    assert_eq!(manifest.config["steps"], 6);

    let bytes = fs::read(&model).unwrap();
    fs::remove_file(&model).unwrap();
    assert_eq!(code(&textsr(&["replay", s(&tmp.path().join("m.sdtd.run.json"))])), 0);
    assert_eq!(fs::read(&model).unwrap(), bytes, "replayed training must be bit-identical");

    let sr = tmp.path().join("sr.png");
    let o = textsr(&["infer", "--model", s(&model), "--in", s(&pairs.join("page0_lr.png")), "--out", s(&sr)]);
    assert_eq!(code(&o), 0);
    let img = read_png(&sr).unwrap();
    assert_eq!((img.width(), img.height()), (66, 48));

    let st = tmp.path().join("st.sdtd");
    let o = textsr(&[
        "train", "--config", s(&cfg), "--data", s(&pairs), "--mode", "st", "--steps", "2", "--out", s(&st),
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn zero_model_inference_equals_bicubic_for_gray_and_rgb() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ModelConfig::tiny(2);
    let model = tmp.path().join("zero.sdtd");
    save_model(&ModelWeights::zeros(&cfg).unwrap(), &cfg, &model).unwrap();
    let gray = text_page(100, 60, 3);
    let planes: Vec<f64> = gray.data().iter().flat_map(|&v| [v]).collect();
    let rgb = ImageBuffer::new(
        100,
        60,
        ColorSpace::Rgb,
        [planes.clone(), planes.iter().map(|v| v * 0.5).collect(), planes.iter().map(|v| 1.0 - v).collect()].concat(),
    )
    .unwrap();
    for (name, img) in [("gray", gray), ("rgb", rgb)] {
        let input = tmp.path().join(format!("{name}.png"));
        write_png(&input, &img).unwrap();
        let before = fs::read(&input).unwrap();
        let out = tmp.path().join(format!("{name}_sr.png"));
        assert_eq!(code(&textsr(&["infer", "--model", s(&model), "--in", s(&input), "--out", s(&out)])), 0);
        assert_eq!(fs::read(&input).unwrap(), before);
        let expected = tmp.path().join(format!("{name}_bicubic.png"));
        write_png(&expected, &bicubic_upscale(&read_png(&input).unwrap(), 2).unwrap()).unwrap();
        let (a, b) = (read_png(&out).unwrap(), read_png(&expected).unwrap());
        assert_eq!((a.width(), a.height()), (200, 120));
        assert_eq!(a, b);
    }
}

#[test]
fn eval_commands_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, t) = (tmp.path().join("ref"), tmp.path().join("test"));
    fs::create_dir_all(&r).unwrap();
    fs::create_dir_all(&t).unwrap();
    for i in 0..2 {
        let page = text_page(64, 64, i);
        write_png(r.join(format!("p{i}.png")), &page).unwrap();
        write_png(t.join(format!("p{i}.png")), &page).unwrap();
    }
    let report = tmp.path().join("iqa.csv");
    let o = textsr(&["eval-iqa", "--ref-dir", s(&r), "--test-dir", s(&t), "--out", s(&report)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,psnr,ssim,ifc,vif");
    assert!(lines[1].starts_with("p0.png,inf,1.000000,"));
    assert!(lines[1].ends_with(",1.000000"));

    fs::write(r.join("p0.txt"), "hello\n").unwrap();
    fs::write(r.join("p1.txt"), "hellp").unwrap();
    let ocr = tmp.path().join("ocr.csv");
    let o = textsr(&[
        "eval-ocr", "--ref-dir", s(&r), "--test-dir", s(&t), "--engine", "sh -c 'echo hello' {input}", "--out", s(&ocr),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&ocr).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,lev_ratio,cosine");
    assert_eq!(lines[1], "p0.png,1.000000,1.000000");
    assert_eq!(lines[2], "p1.png,0.800000,0.857143");
    assert_eq!(lines[3], "AVERAGE,0.900000,0.928571");
}

#[test]
fn exit_codes_follow_error_classes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&textsr(&["degrade", "--kind", "wobble"])), 2);
    assert_eq!(code(&textsr(&["frobnicate"])), 2);
    assert_eq!(code(&textsr(&["infer", "--in", "x.png", "--out", "y.png"])), 2);
    let missing = tmp.path().join("nope");
    assert_eq!(code(&textsr(&["degrade", "--in", s(&missing), "--out", s(&tmp.path().join("o"))])), 3);

    let bad = tmp.path().join("bad.sdtd");
    fs::write(&bad, b"XXXXjunk").unwrap();
    let img = tmp.path().join("i.png");
    write_png(&img, &text_page(16, 16, 0)).unwrap();
    let o = textsr(&["infer", "--model", s(&bad), "--in", s(&img), "--out", s(&tmp.path().join("o.png"))]);
    assert_eq!(code(&o), 4);
    assert!(!tmp.path().join("o.png").exists());

    let (r, t) = (tmp.path().join("r"), tmp.path().join("t"));
    fs::create_dir_all(&r).unwrap();
    fs::create_dir_all(&t).unwrap();
    write_png(t.join("a.png"), &text_page(16, 16, 0)).unwrap();
    fs::write(r.join("a.txt"), "x").unwrap();
    let o = textsr(&[
        "eval-ocr", "--ref-dir", s(&r), "--test-dir", s(&t), "--engine", "/no/such/engine {input}", "--out", s(&tmp.path().join("o.csv")),
    ]);
    assert_eq!(code(&o), 5);
}

#[test]
fn gradcheck_reports_every_tensor() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("gc.json");
    let o = textsr(&["gradcheck", "--manifest", s(&manifest)]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("recon.b2.kernel"));
    assert!(stdout.contains("PASS"));
    assert_eq!(RunManifest::read(&manifest).unwrap().config["eps"], 1e-4);
    assert_eq!(code(&textsr(&["gradcheck", "--tol", "1e-30"])), 1);
}
