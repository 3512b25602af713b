//! Subcommands behind the `textsr` binary.
//!
//! Every command resolves its settings from built-in defaults, then the
//! matching `[command]` table of an optional TOML file (`--config`), then
//! command-line flags. The resolved record is written as a JSON run manifest
//! next to the outputs and can be re-executed with `textsr replay`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::degrade::{degrade_pair, derive_seed, BlurKind, DegradeConfig};
use crate::imagecore::{bicubic_resize, read_png, sample_patch_pairs, write_png, ImageBuffer, PatchPair};
use crate::iqa::{evaluate, IqaReport};
use crate::model::{super_resolve, ModelConfig};
use crate::ocreval::{average_scores, run_ocr, OcrComparison, DEFAULT_ENGINE};
use crate::persist::{load_model, save_model, write_atomic};
use crate::train::{gradcheck, GradcheckReport, TrainConfig, TrainMode, Trainer};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status of `gradcheck` when a tensor exceeds the tolerance.
pub const EXIT_CHECK_FAILED: i32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Degrade,
    Train,
    Infer,
    EvalIqa,
    EvalOcr,
    Gradcheck,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Degrade => "degrade",
            CommandKind::Train => "train",
            CommandKind::Infer => "infer",
            CommandKind::EvalIqa => "eval-iqa",
            CommandKind::EvalOcr => "eval-ocr",
            CommandKind::Gradcheck => "gradcheck",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    /// Fully resolved settings of the run.
    pub config: Value,
    pub seed: u64,
    pub tool_version: String,
}

impl RunManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

fn manifest_for<C: Serialize>(command: CommandKind, cfg: &C, seed: u64) -> Result<RunManifest> {
    Ok(RunManifest {
        command,
        config: serde_json::to_value(cfg).map_err(|e| Error::Format(e.to_string()))?,
        seed,
        tool_version: TOOL_VERSION.to_string(),
    })
}

/// `out.png` -> `out.png.run.json`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn require(path: &Path, flag: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::invalid(format!("missing required --{flag}")));
    }
    Ok(())
}

/// Sorted `.png` files of a directory.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

fn file_name(path: &Path) -> String {
    path.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

// ---------------------------------------------------------------- degrade

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeRun {
    pub input: PathBuf,
    pub output: PathBuf,
    pub kind: BlurKind,
    pub scale: usize,
    /// Unset blur parameters are drawn per image from the default ranges.
    pub length: Option<f64>,
    pub angle: Option<f64>,
    pub radius: Option<f64>,
    pub seed: u64,
}

impl Default for DegradeRun {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            output: PathBuf::new(),
            kind: BlurKind::Motion,
            scale: 2,
            length: None,
            angle: None,
            radius: None,
            seed: 0,
        }
    }
}

/// One generated pair as listed in `manifest.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradedItem {
    pub stem: String,
    pub params: DegradeConfig,
}

/// Degrades every PNG of `input`. Images are cropped to a multiple of the
/// scale, converted to luma and written as `<stem>_lr.png` / `<stem>_hr.png`.
pub fn run_degrade(cfg: &DegradeRun) -> Result<Vec<DegradedItem>> {
    require(&cfg.input, "in")?;
    require(&cfg.output, "out")?;
    let files = list_pngs(&cfg.input)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no PNG images in {}", cfg.input.display())));
    }
    create_dir(&cfg.output)?;
    let s = cfg.scale;
    let items = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let params = DegradeConfig::randomized(
                cfg.kind,
                s,
                cfg.length,
                cfg.angle,
                cfg.radius,
                derive_seed(cfg.seed, i as u64),
            );
            params.validate()?;
            let img = read_png(path)?;
            let (w, h) = (img.width() / s * s, img.height() / s * s);
            if w == 0 || h == 0 {
                return Err(Error::invalid(format!("{} is smaller than the scale", path.display())));
            }
            let (lr, hr) = degrade_pair(&img.crop(0, 0, w, h)?, &params)?;
            let stem = stem(path);
            write_png(cfg.output.join(format!("{stem}_lr.png")), &lr)?;
            write_png(cfg.output.join(format!("{stem}_hr.png")), &hr)?;
            Ok(DegradedItem { stem, params })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = items
        .iter()
        .map(|it| {
            let p = &it.params;
            vec![
                it.stem.clone(),
                p.kind.as_str().to_string(),
                p.length.to_string(),
                p.angle.to_string(),
                p.radius.to_string(),
                p.scale.to_string(),
                p.seed.to_string(),
            ]
        })
        .collect();
    let csv = csv_bytes(&["stem", "kind", "length", "angle", "radius", "scale", "seed"], &rows)?;
    write_atomic(&cfg.output.join("manifest.csv"), &csv)?;
    manifest_for(CommandKind::Degrade, cfg, cfg.seed)?.write(&cfg.output.join("run.json"))?;
    Ok(items)
}

// ---------------------------------------------------------------- train

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Eight feature layers, 196 down to 32 filters.
    Table1,
    /// Four feature layers, [64, 48, 38, 32] filters.
    Desk,
    /// Two feature layers, [4, 3] filters.
    Tiny,
}

impl Profile {
    pub fn model_config(self, scale: usize) -> ModelConfig {
        match self {
            Profile::Table1 => ModelConfig::table1(scale),
            Profile::Desk => ModelConfig::desk(scale),
            Profile::Tiny => ModelConfig::tiny(scale),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    /// Directory of `<stem>_lr.png` / `<stem>_hr.png` pairs.
    pub data: PathBuf,
    pub mode: TrainMode,
    pub scale: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub out: PathBuf,
    pub seed: u64,
    pub profile: Profile,
    /// LR patch edge.
    pub patch: usize,
    pub patches_per_image: usize,
    pub dropout_keep: f64,
    /// Loss log; defaults to `<out>.loss.csv`.
    pub log: Option<PathBuf>,
}

impl Default for TrainRun {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: PathBuf::new(),
            mode: t.mode,
            scale: t.scale,
            steps: t.steps,
            batch: t.batch,
            lr: t.lr,
            out: PathBuf::new(),
            seed: t.seed,
            profile: Profile::Desk,
            patch: t.patch,
            patches_per_image: 20,
            dropout_keep: t.dropout_keep,
            log: None,
        }
    }
}

impl TrainRun {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            scale: self.scale,
            batch: self.batch,
            patch: self.patch,
            lr: self.lr,
            steps: self.steps,
            seed: self.seed,
            dropout_keep: self.dropout_keep,
            ..TrainConfig::default()
        }
    }

    pub fn log_path(&self) -> PathBuf {
        self.log.clone().unwrap_or_else(|| sidecar(&self.out, ".loss.csv"))
    }
}

/// Loads training pairs from a degrade output directory. `st` mode replaces
/// each LR image by the bicubic decimation of its sharp HR image.
pub fn load_training_images(dir: &Path, mode: TrainMode, scale: usize) -> Result<Vec<(String, ImageBuffer, ImageBuffer)>> {
    let mut out = Vec::new();
    for hr_path in list_pngs(dir)? {
        let name = stem(&hr_path);
        let Some(base) = name.strip_suffix("_hr") else { continue };
        let hr = read_png(&hr_path)?.to_luma()?;
        if hr.width() % scale != 0 || hr.height() % scale != 0 {
            return Err(Error::invalid(format!("{} is not divisible by scale {scale}", hr_path.display())));
        }
        let lr = match mode {
            TrainMode::St => bicubic_resize(&hr, hr.width() / scale, hr.height() / scale)?,
            TrainMode::Sdt => read_png(dir.join(format!("{base}_lr.png")))?.to_luma()?,
        };
        out.push((base.to_string(), lr, hr));
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("no *_hr.png images in {}", dir.display())));
    }
    Ok(out)
}

pub fn run_train(cfg: &TrainRun) -> Result<Vec<f64>> {
    require(&cfg.data, "data")?;
    require(&cfg.out, "out")?;
    let tc = cfg.train_config();
    tc.validate()?;
    let images = load_training_images(&cfg.data, cfg.mode, cfg.scale)?;
    let mut pairs: Vec<PatchPair> = Vec::new();
    for (i, (_, lr, hr)) in images.iter().enumerate() {
        pairs.extend(sample_patch_pairs(lr, hr, cfg.patch, cfg.patches_per_image, derive_seed(cfg.seed, i as u64))?);
    }
    let mut trainer = Trainer::new(&pairs, &tc, &cfg.profile.model_config(cfg.scale))?;
    let every = (cfg.steps / 20).max(1);
    for step in 1..=cfg.steps {
        let loss = trainer.step()?;
        if step % every == 0 || step == cfg.steps {
            eprintln!("step {step}/{} loss {loss:.6}", cfg.steps);
        }
    }
    let model_cfg = trainer.model_config().clone();
    let (weights, losses) = trainer.into_parts();
    let rows: Vec<Vec<String>> = losses
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1).to_string(), format!("{l:.9}")])
        .collect();
    write_atomic(&cfg.log_path(), &csv_bytes(&["step", "loss"], &rows)?)?;
    save_model(&weights, &model_cfg, &cfg.out)?;
    manifest_for(CommandKind::Train, cfg, cfg.seed)?.write(&sidecar(&cfg.out, ".run.json"))?;
    Ok(losses)
}

// ---------------------------------------------------------------- infer

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferRun {
    pub model: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
}

/// Super-resolves one PNG; grayscale stays grayscale, colour keeps its chroma.
pub fn run_infer(cfg: &InferRun) -> Result<ImageBuffer> {
    require(&cfg.model, "model")?;
    require(&cfg.input, "in")?;
    require(&cfg.output, "out")?;
    let (weights, model_cfg) = load_model(&cfg.model)?;
    let img = read_png(&cfg.input)?;
    let out = super_resolve(&weights, &model_cfg, &img)?;
    write_png(&cfg.output, &out)?;
    manifest_for(CommandKind::Infer, cfg, 0)?.write(&sidecar(&cfg.output, ".run.json"))?;
    Ok(out)
}

// ---------------------------------------------------------------- eval-iqa

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalIqaRun {
    pub ref_dir: PathBuf,
    pub test_dir: PathBuf,
    pub out: PathBuf,
}

/// Scores every reference PNG against the test PNG of the same file name.
pub fn run_eval_iqa(cfg: &EvalIqaRun) -> Result<Vec<(String, IqaReport)>> {
    require(&cfg.ref_dir, "ref-dir")?;
    require(&cfg.test_dir, "test-dir")?;
    require(&cfg.out, "out")?;
    let refs = list_pngs(&cfg.ref_dir)?;
    if refs.is_empty() {
        return Err(Error::invalid(format!("no PNG images in {}", cfg.ref_dir.display())));
    }
    let rows = refs
        .par_iter()
        .map(|r| {
            let name = file_name(r);
            let t = cfg.test_dir.join(&name);
            if !t.is_file() {
                return Err(Error::invalid(format!("{} has no counterpart in {}", name, cfg.test_dir.display())));
            }
            Ok((name, evaluate(&read_png(r)?, &read_png(&t)?)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|(n, r)| {
            vec![
                n.clone(),
                format!("{:.6}", r.psnr),
                format!("{:.6}", r.ssim),
                format!("{:.6}", r.ifc),
                format!("{:.6}", r.vif),
            ]
        })
        .collect();
    write_atomic(&cfg.out, &csv_bytes(&["name", "psnr", "ssim", "ifc", "vif"], &table)?)?;
    manifest_for(CommandKind::EvalIqa, cfg, 0)?.write(&sidecar(&cfg.out, ".run.json"))?;
    Ok(rows)
}

// ---------------------------------------------------------------- eval-ocr

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOcrRun {
    /// Ground truth: `<stem>.txt` if present, otherwise the OCR of the
    /// reference image with the same file name.
    pub ref_dir: PathBuf,
    pub test_dir: PathBuf,
    pub engine: String,
    pub out: PathBuf,
    /// Maximum concurrent engine processes.
    pub jobs: usize,
}

impl Default for EvalOcrRun {
    fn default() -> Self {
        Self {
            ref_dir: PathBuf::new(),
            test_dir: PathBuf::new(),
            engine: DEFAULT_ENGINE.to_string(),
            out: PathBuf::new(),
            jobs: 1,
        }
    }
}

pub fn run_eval_ocr(cfg: &EvalOcrRun) -> Result<Vec<(String, OcrComparison)>> {
    require(&cfg.ref_dir, "ref-dir")?;
    require(&cfg.test_dir, "test-dir")?;
    require(&cfg.out, "out")?;
    if cfg.jobs == 0 {
        return Err(Error::invalid("jobs must be at least 1"));
    }
    let tests = list_pngs(&cfg.test_dir)?;
    if tests.is_empty() {
        return Err(Error::invalid(format!("no PNG images in {}", cfg.test_dir.display())));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    let rows = pool.install(|| {
        tests
            .par_iter()
            .map(|t| {
                let name = file_name(t);
                let txt = cfg.ref_dir.join(format!("{}.txt", stem(t)));
                let reference = if txt.is_file() {
                    fs::read_to_string(&txt).map_err(|e| Error::io(&txt, e))?.trim_end().to_string()
                } else {
                    run_ocr(cfg.ref_dir.join(&name), &cfg.engine)?
                };
                let candidate = run_ocr(t, &cfg.engine)?;
                Ok((name, OcrComparison::new(reference, candidate)))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut table: Vec<Vec<String>> = rows
        .iter()
        .map(|(n, c)| vec![n.clone(), format!("{:.6}", c.levenshtein_ratio), format!("{:.6}", c.char_cosine)])
        .collect();
    let comparisons: Vec<OcrComparison> = rows.iter().map(|(_, c)| c.clone()).collect();
    let (lev, cos) = average_scores(&comparisons).unwrap_or((0.0, 0.0));
    table.push(vec!["AVERAGE".into(), format!("{lev:.6}"), format!("{cos:.6}")]);
    write_atomic(&cfg.out, &csv_bytes(&["name", "lev_ratio", "cosine"], &table)?)?;
    manifest_for(CommandKind::EvalOcr, cfg, 0)?.write(&sidecar(&cfg.out, ".run.json"))?;
    Ok(rows)
}

// ---------------------------------------------------------------- gradcheck

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckRun {
    pub eps: f64,
    pub tol: f64,
    pub seed: u64,
    pub profile: Profile,
    pub scale: usize,
    /// Edge of the square LR input.
    pub input_size: usize,
    /// Manifest path; gradcheck writes no other files.
    pub manifest: Option<PathBuf>,
}

impl Default for GradcheckRun {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            tol: 1e-4,
            seed: 0,
            profile: Profile::Tiny,
            scale: 2,
            input_size: 6,
            manifest: None,
        }
    }
}

pub fn run_gradcheck(cfg: &GradcheckRun) -> Result<GradcheckReport> {
    if !(cfg.eps > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::invalid("eps and tol must be positive"));
    }
    let report = gradcheck(&cfg.profile.model_config(cfg.scale), cfg.input_size, cfg.eps, cfg.seed)?;
    if let Some(path) = &cfg.manifest {
        manifest_for(CommandKind::Gradcheck, cfg, cfg.seed)?.write(path)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Parser)]
#[command(name = "textsr", version, about = "Text image super-resolution and deblurring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// TOML file whose `[<command>]` table supplies defaults.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Blur and downscale a directory of sharp PNGs into LR/HR pairs.
    Degrade(DegradeFlags),
    /// Train a model on a directory of LR/HR pairs.
    Train(TrainFlags),
    /// Super-resolve one image.
    Infer(InferFlags),
    /// PSNR, SSIM, IFC and VIF for matching images of two directories.
    EvalIqa(EvalIqaFlags),
    /// OCR similarity for matching images of two directories.
    EvalOcr(EvalOcrFlags),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckFlags),
    /// Re-run a command from its run manifest.
    Replay {
        /// Run manifest JSON written by an earlier command
        manifest: PathBuf,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct DegradeFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Directory of sharp PNG pages
    #[arg(long = "in")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Output directory for the pairs
    #[arg(long = "out")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Blur family: motion or defocus
    #[arg(long, value_parser = parse_kind)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<BlurKind>,
    /// Downscale factor S
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    /// Motion blur length in pixels (random per image if unset)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Motion blur angle in degrees (random per image if unset)
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    /// Defocus radius in pixels (random per image if unset)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Base seed for per-image blur parameters
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Directory of `<stem>_lr.png`/`<stem>_hr.png` pairs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// sdt trains on blurred LR images; st derives sharp LR from HR
    #[arg(long, value_parser = parse_mode)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<TrainMode>,
    /// Upscale factor S
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    /// Optimiser steps
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Patches per mini-batch
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    /// Path of the model file to write
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Seed for initialisation, sampling and dropout
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    /// LR patch edge in pixels
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch: Option<usize>,
    /// Patches sampled from each training image
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patches_per_image: Option<usize>,
    /// Dropout keep probability
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_keep: Option<f64>,
    /// Per-step loss CSV (default `<out>.loss.csv`)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct InferFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Model file
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Input PNG
    #[arg(long = "in")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Output PNG
    #[arg(long = "out")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalIqaFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Directory of reference PNGs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_dir: Option<PathBuf>,
    /// Directory of test PNGs with matching names
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_dir: Option<PathBuf>,
    /// Output CSV
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalOcrFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Directory of reference PNGs (a `<stem>.txt` overrides OCR of the reference)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_dir: Option<PathBuf>,
    /// Directory of test PNGs with matching names
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_dir: Option<PathBuf>,
    /// Engine command line; `{input}` is replaced by the image path.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    /// Output CSV
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Maximum concurrent OCR processes
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckFlags {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Central-difference step
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Maximum accepted relative error
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Seed for weights, input and masks
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    /// Upscale factor S
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    /// Edge of the random square input
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_size: Option<usize>,
    /// Also write a run manifest here
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

fn parse_kind(s: &str) -> std::result::Result<BlurKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<TrainMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn overlay(base: &mut Value, top: Value) {
    if let (Value::Object(b), Value::Object(t)) = (base, top) {
        b.extend(t);
    }
}

/// Defaults, then the file's `[command]` table, then the flags.
pub fn resolve<C, F>(command: CommandKind, config_file: Option<&Path>, flags: &F) -> Result<C>
where
    C: Default + Serialize + DeserializeOwned,
    F: Serialize,
{
    let bad = |e: String| Error::invalid(e);
    let mut v = serde_json::to_value(C::default()).map_err(|e| bad(e.to_string()))?;
    if let Some(path) = config_file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: toml::Table = toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        if let Some(section) = table.get(command.name()) {
            overlay(&mut v, serde_json::to_value(section).map_err(|e| bad(e.to_string()))?);
        }
    }
    overlay(&mut v, serde_json::to_value(flags).map_err(|e| bad(e.to_string()))?);
    serde_json::from_value(v).map_err(|e| bad(format!("{} settings: {e}", command.name())))
}

fn from_manifest<C: DeserializeOwned>(m: &RunManifest) -> Result<C> {
    serde_json::from_value(m.config.clone()).map_err(|e| Error::Format(format!("manifest config: {e}")))
}

fn print_gradcheck(report: &GradcheckReport, tol: f64) -> i32 {
    println!("tensor,params,max_rel_error");
    for t in &report.tensors {
        println!("{},{},{:.3e}", t.name, t.params, t.max_rel_error);
    }
    let pass = report.passes(tol);
    println!(
        "max relative error {:.3e} (tol {tol:.1e}): {}",
        report.max_rel_error(),
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        0
    } else {
        EXIT_CHECK_FAILED
    }
}

fn execute(kind: CommandKind, m: &RunManifest) -> Result<i32> {
    match kind {
        CommandKind::Degrade => {
            let items = run_degrade(&from_manifest(m)?)?;
            eprintln!("wrote {} pairs", items.len());
        }
        CommandKind::Train => {
            run_train(&from_manifest(m)?)?;
        }
        CommandKind::Infer => {
            run_infer(&from_manifest(m)?)?;
        }
        CommandKind::EvalIqa => {
            run_eval_iqa(&from_manifest(m)?)?;
        }
        CommandKind::EvalOcr => {
            let rows = run_eval_ocr(&from_manifest(m)?)?;
            eprintln!("compared {} images", rows.len());
        }
        CommandKind::Gradcheck => {
            let cfg: GradcheckRun = from_manifest(m)?;
            let report = run_gradcheck(&cfg)?;
            return Ok(print_gradcheck(&report, cfg.tol));
        }
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32> {
    macro_rules! resolved {
        ($kind:expr, $ty:ty, $flags:expr) => {{
            let cfg: $ty = resolve($kind, $flags.common.config.as_deref(), &$flags)?;
            manifest_for($kind, &cfg, 0)?
        }};
    }
    let manifest = match cli.command {
        Command::Degrade(f) => resolved!(CommandKind::Degrade, DegradeRun, f),
        Command::Train(f) => resolved!(CommandKind::Train, TrainRun, f),
        Command::Infer(f) => resolved!(CommandKind::Infer, InferRun, f),
        Command::EvalIqa(f) => resolved!(CommandKind::EvalIqa, EvalIqaRun, f),
        Command::EvalOcr(f) => resolved!(CommandKind::EvalOcr, EvalOcrRun, f),
        Command::Gradcheck(f) => resolved!(CommandKind::Gradcheck, GradcheckRun, f),
        Command::Replay { manifest } => RunManifest::read(&manifest)?,
    };
    execute(manifest.command, &manifest)
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cfg.toml");
        fs::write(&file, "[train]\nsteps = 7\nlr = 0.01\n\n[infer]\nmodel = \"m.sdtd\"\n").unwrap();
        let cli = Cli::try_parse_from(["textsr", "train", "--config", file.to_str().unwrap(), "--steps", "3"]).unwrap();
        let Command::Train(f) = cli.command else { panic!() };
        let cfg: TrainRun = resolve(CommandKind::Train, f.common.config.as_deref(), &f).unwrap();
        assert_eq!(cfg.steps, 3);
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.batch, 20);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cfg.toml");
        fs::write(&file, "[degrade]\nblur = \"motion\"\n").unwrap();
        let flags = DegradeFlags {
            common: Common { config: None },
            input: None,
            output: None,
            kind: None,
            scale: None,
            length: None,
            angle: None,
            radius: None,
            seed: None,
        };
        let r: Result<DegradeRun> = resolve(CommandKind::Degrade, Some(&file), &flags);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn command_names_roundtrip_through_serde() {
        for k in [
            CommandKind::Degrade,
            CommandKind::Train,
            CommandKind::Infer,
            CommandKind::EvalIqa,
            CommandKind::EvalOcr,
            CommandKind::Gradcheck,
        ] {
            assert_eq!(serde_json::to_value(k).unwrap(), Value::String(k.name().into()));
        }
    }
}
