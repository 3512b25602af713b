use std::fs;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use textsr::ocreval::{average_scores, char_freq_cosine, levenshtein, levenshtein_ratio, run_ocr, OcrComparison};
use textsr::Error;

/// Plain recursive edit distance.
fn naive(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = naive(ra, rb) + usize::from(x != y);
            sub.min(naive(ra, b) + 1).min(naive(a, rb) + 1)
        }
    }
}

fn strings(max_len: usize) -> Vec<String> {
    let mut all = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s| ['a', 'b', 'c'].map(|c| format!("{s}{c}")))
            .collect();
        all.extend(frontier.iter().cloned());
    }
    all
}

#[test]
fn short_strings_match_recursive_oracle() {
    let all = strings(5);
    for a in &all {
        for b in &all {
            assert_eq!(levenshtein(a, b), naive(a.as_bytes(), b.as_bytes()), "{a:?} {b:?}");
        }
    }
}

#[test]
fn ratio_is_symmetric_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let all = strings(6);
    for _ in 0..2000 {
        let a = all.choose(&mut rng).unwrap();
        let b = all.choose(&mut rng).unwrap();
        let c = all.choose(&mut rng).unwrap();
        let r = levenshtein_ratio(a, b);
        assert_eq!(r, levenshtein_ratio(b, a));
        assert!((0.0..=1.0).contains(&r));
        assert!(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
    }
    assert_eq!(levenshtein("kitten", "sitting"), 3);
}

#[test]
fn cosine_ignores_order_and_symbols() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pool: Vec<char> = "aAbB019 .,;xyz".chars().collect();
    for _ in 0..500 {
        let a: Vec<char> = (0..rng.random_range(0..12)).map(|_| *pool.choose(&mut rng).unwrap()).collect();
        let b: Vec<char> = (0..rng.random_range(0..12)).map(|_| *pool.choose(&mut rng).unwrap()).collect();
        let mut shuffled = a.clone();
        shuffled.shuffle(&mut rng);
        let (sa, sb, ss): (String, String, String) =
            (a.iter().collect(), b.iter().collect(), shuffled.iter().collect());
        let c = char_freq_cosine(&sa, &sb);
        assert!((0.0..=1.0).contains(&c));
        assert_eq!(c, char_freq_cosine(&ss, &sb));
    }
    assert_eq!(char_freq_cosine("a.b,c", "abc"), 1.0);
}

#[test]
fn batch_average_is_arithmetic_mean() {
    let rows: Vec<OcrComparison> = [("hello", "hallo"), ("abc", "abd"), ("", "x"), ("same", "same")]
        .iter()
        .map(|(a, b)| OcrComparison::new(*a, *b))
        .collect();
    let (lev, cos) = average_scores(&rows).unwrap();
    let n = rows.len() as f64;
    assert!((lev - rows.iter().map(|r| r.levenshtein_ratio).sum::<f64>() / n).abs() < 1e-12);
    assert!((cos - rows.iter().map(|r| r.char_cosine).sum::<f64>() / n).abs() < 1e-12);
    assert!(average_scores(&[]).is_none());
    assert_eq!(rows[3].levenshtein_ratio, 1.0);
    assert_eq!(rows[3].char_cosine, 1.0);
}

fn image_file() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("page.png");
    fs::write(&path, b"not really a png").unwrap();
    (dir, path)
}

#[test]
fn stub_engine_output_is_captured() {
    let (_d, img) = image_file();
    assert_eq!(run_ocr(&img, "sh -c 'echo hello' {input}").unwrap(), "hello");
    let echoed = run_ocr(&img, "echo {input}").unwrap();
    assert_eq!(echoed, img.to_string_lossy());
}

#[test]
fn engine_failures_are_classified() {
    let (_d, img) = image_file();
    assert!(matches!(run_ocr(&img, "echo hello"), Err(Error::InvalidArgument(_))));
    assert!(matches!(
        run_ocr(&img, "/nonexistent/ocr-engine {input}"),
        Err(Error::ExternalToolNotFound(_))
    ));
    match run_ocr(&img, "sh -c 'echo broken >&2; exit 3' {input}") {
        Err(Error::ExternalToolFailure { stderr, .. }) => assert_eq!(stderr.trim(), "broken"),
        other => panic!("expected failure, got {other:?}"),
    }
    assert!(matches!(run_ocr(&img, r"sh -c 'printf \\377' {input}"), Err(Error::Decode(_))));
    assert!(matches!(
        run_ocr(img.with_file_name("absent.png"), "echo {input}"),
        Err(Error::InvalidArgument(_))
    ));
}
