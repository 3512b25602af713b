//! Text similarity scores, and an OCR engine stand-in driven through a
//! command template.

use textsr::ocreval::{average_scores, run_ocr, OcrComparison};

pub fn run_example() -> textsr::Result<()> {
    let rows: Vec<OcrComparison> = [
        ("kitten", "sitting"),
        ("The quick brown fox", "The qu1ck brown f0x"),
        ("aab", "abb"),
    ]
    .into_iter()
    .map(|(a, b)| OcrComparison::new(a, b))
    .collect();
    for r in &rows {
        println!(
            "{:<22} {:<22} lev {:.4} cos {:.4}",
            r.reference_text, r.candidate_text, r.levenshtein_ratio, r.char_cosine
        );
    }
    if let Some((lev, cos)) = average_scores(&rows) {
        println!("average lev {lev:.4} cos {cos:.4}");
    }

    // Any program works as an engine; this one ignores the image.
    let page = std::env::temp_dir().join("textsr-ocr-example.txt");
    std::fs::write(&page, "placeholder").map_err(|e| textsr::Error::Io { path: page.clone(), source: e })?;
    let text = run_ocr(&page, "sh -c 'echo HELLO WORLD' {input}")?;
    println!("stub engine read {text:?}");
    let _ = std::fs::remove_file(&page);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
