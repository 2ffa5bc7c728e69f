//! Completion scoring.
//!
//! All text metrics work on bytes. Words are maximal runs of non-whitespace
//! (ASCII whitespace), punctuation attached.

use thiserror::Error;

use crate::real::Real;
use crate::vocab::Vocabulary;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("pass@k needs 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")]
    PassAtK { n: u64, c: u64, k: u64 },
    #[error("n must be at least 1")]
    ZeroWords,
}

/// Default word budget for [`fuzzy_first_n_words`].
pub const FUZZY_WORDS: usize = 50;

fn trim(s: &[u8]) -> &[u8] {
    s.trim_ascii()
}

/// 1 when `gen` equals some reference after trimming ASCII whitespace at
/// both ends. No case folding.
pub fn exact_match<R: AsRef<[u8]>>(gen: &[u8], refs: &[R]) -> f64 {
    let g = trim(gen);
    if refs.iter().any(|r| trim(r.as_ref()) == g) {
        1.0
    } else {
        0.0
    }
}

/// Byte-level Levenshtein distance, two-row DP.
pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 − lev(a, b) / max(|a|, |b|)`; two empty strings score 1.
pub fn edit_similarity(a: &[u8], b: &[u8]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Best [`edit_similarity`] over the references; 0 for an empty list.
pub fn edit_similarity_max<R: AsRef<[u8]>>(gen: &[u8], refs: &[R]) -> f64 {
    refs.iter()
        .map(|r| edit_similarity(gen, r.as_ref()))
        .fold(0.0, f64::max)
}

/// 1 when the first tokens of `gen` and `reference` agree. Both empty
/// counts as agreement, one empty as disagreement; text the vocabulary
/// cannot encode scores 0.
pub fn first_token_accuracy(gen: &[u8], reference: &[u8], vocab: &Vocabulary) -> f64 {
    if gen.is_empty() || reference.is_empty() {
        return if gen.is_empty() && reference.is_empty() {
            1.0
        } else {
            0.0
        };
    }
    match (vocab.encode(gen), vocab.encode(reference)) {
        (Ok(g), Ok(r)) if g.first() == r.first() => 1.0,
        _ => 0.0,
    }
}

pub fn words(s: &[u8]) -> Vec<&[u8]> {
    s.split(|b| b.is_ascii_whitespace()).filter(|w| !w.is_empty()).collect()
}

fn lcs_len(a: &[&[u8]], b: &[&[u8]]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Word-level LCS F1. Zero when either side has no words.
pub fn rouge_l(gen: &[u8], reference: &[u8]) -> f64 {
    let (g, r) = (words(gen), words(reference));
    if g.is_empty() || r.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&g, &r) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / g.len() as f64;
    let rec = lcs / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

/// First `n` words joined with single spaces.
pub fn first_n_words(s: &[u8], n: usize) -> Vec<u8> {
    words(s).into_iter().take(n).collect::<Vec<_>>().join(&b' ')
}

/// `(edit_similarity, rouge_l)` over the first `n` words of each side.
pub fn fuzzy_first_n_words(gen: &[u8], reference: &[u8], n: usize) -> Result<(f64, f64), MetricError> {
    if n == 0 {
        return Err(MetricError::ZeroWords);
    }
    let (g, r) = (first_n_words(gen, n), first_n_words(reference, n));
    Ok((edit_similarity(&g, &r), rouge_l(&g, &r)))
}

/// Unbiased pass@k, `1 − C(n−c, k) / C(n, k)`, as
/// `1 − Π_{i=n−c+1}^{n} (1 − k/i)`.
pub fn pass_at_k<F: Real>(n: u64, c: u64, k: u64) -> Result<F, MetricError> {
    if c > n || k == 0 || k > n {
        return Err(MetricError::PassAtK { n, c, k });
    }
    if n - c < k {
        return Ok(F::one());
    }
    let kf = F::of(k as f64);
    let prod = (n - c + 1..=n).fold(F::one(), |acc, i| acc * (F::one() - kf / F::of(i as f64)));
    Ok(F::one() - prod)
}
