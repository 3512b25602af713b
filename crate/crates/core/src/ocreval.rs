//! OCR fidelity: external engine invocation plus two text similarity scores.

use std::path::Path;
use std::process::Command;

use serde::Serialize;

use crate::{Error, Result};

/// Placeholder replaced by the image path in engine templates.
pub const INPUT_PLACEHOLDER: &str = "{input}";
pub const DEFAULT_ENGINE: &str = "tesseract {input} stdout";

/// Edit distance over Unicode scalar values (insert, delete, substitute).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let next = (diag + usize::from(ca != cb)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// `1 - d / max(|a|, |b|)`; two empty strings score 1.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Counts of `0-9`, `A-Z`, `a-z`; every other character is ignored.
pub fn char_frequencies(s: &str) -> [u32; 62] {
    let mut counts = [0u32; 62];
    for c in s.chars() {
        let slot = match c {
            '0'..='9' => c as usize - '0' as usize,
            'A'..='Z' => 10 + c as usize - 'A' as usize,
            'a'..='z' => 36 + c as usize - 'a' as usize,
            _ => continue,
        };
        counts[slot] += 1;
    }
    counts
}

/// Cosine of the alphanumeric frequency vectors. One empty vector scores 0,
/// two empty vectors score 1.
pub fn char_freq_cosine(a: &str, b: &str) -> f64 {
    let (fa, fb) = (char_frequencies(a), char_frequencies(b));
    let dot: u64 = fa.iter().zip(&fb).map(|(&x, &y)| x as u64 * y as u64).sum();
    let na: u64 = fa.iter().map(|&x| x as u64 * x as u64).sum();
    let nb: u64 = fb.iter().map(|&x| x as u64 * x as u64).sum();
    match (na, nb) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => (dot as f64 / ((na as f64) * (nb as f64)).sqrt()).min(1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OcrComparison {
    pub reference_text: String,
    pub candidate_text: String,
    pub levenshtein_ratio: f64,
    pub char_cosine: f64,
}

impl OcrComparison {
    pub fn new(reference_text: impl Into<String>, candidate_text: impl Into<String>) -> Self {
        let (r, c) = (reference_text.into(), candidate_text.into());
        Self {
            levenshtein_ratio: levenshtein_ratio(&r, &c),
            char_cosine: char_freq_cosine(&r, &c),
            reference_text: r,
            candidate_text: c,
        }
    }
}

/// Arithmetic means of `(levenshtein_ratio, char_cosine)`; `None` when empty.
pub fn average_scores(rows: &[OcrComparison]) -> Option<(f64, f64)> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let lev = rows.iter().map(|r| r.levenshtein_ratio).sum::<f64>() / n;
    let cos = rows.iter().map(|r| r.char_cosine).sum::<f64>() / n;
    Some((lev, cos))
}

/// Runs an OCR engine on one image. The template is split like a shell
/// command line and every `{input}` is replaced by the image path; standard
/// output is returned with trailing whitespace removed.
pub fn run_ocr(image_path: impl AsRef<Path>, engine_command: &str) -> Result<String> {
    if !engine_command.contains(INPUT_PLACEHOLDER) {
        return Err(Error::invalid(format!("engine command must contain {INPUT_PLACEHOLDER}")));
    }
    let path = image_path.as_ref();
    if !path.is_file() {
        return Err(Error::invalid(format!("no such image: {}", path.display())));
    }
    let words = shlex::split(engine_command)
        .filter(|w| !w.is_empty())
        .ok_or_else(|| Error::invalid(format!("cannot parse engine command `{engine_command}`")))?;
    let input = path.to_string_lossy();
    let mut args = words.iter().map(|w| w.replace(INPUT_PLACEHOLDER, &input));
    let program = args.next().unwrap();
    let output = Command::new(&program).args(args).output().map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
            Error::ExternalToolNotFound(format!("{program}: {e}"))
        }
        _ => Error::io(&program, e),
    })?;
    if !output.status.success() {
        return Err(Error::ExternalToolFailure {
            command: engine_command.to_string(),
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }
    let text = String::from_utf8(output.stdout).map_err(|e| Error::Decode(format!("engine output is not UTF-8: {e}")))?;
    Ok(text.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(levenshtein_ratio("abc", "abc"), 1.0);
        assert_eq!(levenshtein_ratio("", "abc"), 0.0);
        assert_eq!(levenshtein_ratio("", ""), 1.0);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert!((levenshtein_ratio("kitten", "sitting") - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(levenshtein("héllo", "hello"), 1);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(char_freq_cosine("abc123", "abc123"), 1.0);
        assert_eq!(char_freq_cosine("ab", "cd"), 0.0);
        assert_eq!(char_freq_cosine("aab", "abb"), 0.8);
        assert_eq!(char_freq_cosine("", "!!"), 1.0);
        assert_eq!(char_freq_cosine("a", "!!"), 0.0);
        assert_eq!(char_freq_cosine("A", "a"), 0.0);
    }

    #[test]
    fn template_needs_placeholder() {
        assert!(matches!(run_ocr("whatever.png", "echo hello"), Err(Error::InvalidArgument(_))));
    }
}
