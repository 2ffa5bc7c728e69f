use std::collections::HashMap;

use proptest::collection::vec;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenalign::metrics::{edit_similarity, levenshtein, pass_at_k, rouge_l};

/// Mean over every k-subset of n samples (the first c correct) of "the
/// subset holds a correct sample".
fn pass_at_k_by_subsets(n: u64, c: u64, k: u64) -> f64 {
    let (mut hit, mut all) = (0u64, 0u64);
    for mask in 0u32..1 << n {
        if mask.count_ones() as u64 == k {
            all += 1;
            hit += u64::from(mask & ((1 << c) - 1) != 0);
        }
    }
    hit as f64 / all as f64
}

#[test]
fn pass_at_k_matches_subset_enumeration() {
    for n in 1..=12 {
        for c in 0..=n {
            for k in 1..=n {
                let got: f64 = pass_at_k(n, c, k).unwrap();
                let want = pass_at_k_by_subsets(n, c, k);
                assert!((got - want).abs() < 1e-12, "n={n} c={c} k={k}: {got} vs {want}");
            }
        }
    }
    assert!((pass_at_k::<f64>(5, 2, 3).unwrap() - 0.9).abs() < 1e-12);
}

/// Edit distance by memoized recursion on suffixes.
fn lev_oracle(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

#[test]
fn edit_similarity_matches_recursive_levenshtein() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1_000 {
        let mut s = || -> Vec<u8> {
            (0..rng.random_range(0..16))
                .map(|_| b"abc d"[rng.random_range(0..5usize)])
                .collect()
        };
        let (a, b) = (s(), s());
        let d = lev_oracle(&a, &b);
        assert_eq!(levenshtein(&a, &b), d);
        let want = if a.is_empty() && b.is_empty() {
            1.0
        } else {
            1.0 - d as f64 / a.len().max(b.len()) as f64
        };
        assert_eq!(edit_similarity(&a, &b), want);
    }
}

/// Longest common word subsequence by trying every subsequence of `g`.
fn rouge_oracle(g: &[&str], r: &[&str]) -> f64 {
    if g.is_empty() || r.is_empty() {
        return 0.0;
    }
    let is_subseq = |sub: &[&str]| {
        let mut it = r.iter();
        sub.iter().all(|w| it.any(|x| x == w))
    };
    let lcs = (0u32..1 << g.len())
        .filter_map(|mask| {
            let sub: Vec<&str> = (0..g.len()).filter(|&i| mask >> i & 1 == 1).map(|i| g[i]).collect();
            is_subseq(&sub).then_some(sub.len())
        })
        .max()
        .unwrap();
    if lcs == 0 {
        return 0.0;
    }
    let (p, rec) = (lcs as f64 / g.len() as f64, lcs as f64 / r.len() as f64);
    2.0 * p * rec / (p + rec)
}

#[test]
fn rouge_matches_subsequence_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pool = ["x", "y", "z", "w", "x,", "(y)"];
    for _ in 0..2_000 {
        let mut words = || -> Vec<&str> {
            (0..rng.random_range(0..=8))
                .map(|_| pool[rng.random_range(0..pool.len())])
                .collect()
        };
        let (g, r) = (words(), words());
        assert_eq!(
            rouge_l(g.join(" ").as_bytes(), r.join(" ").as_bytes()),
            rouge_oracle(&g, &r),
            "{g:?} {r:?}"
        );
    }
}

fn text() -> impl Strategy<Value = Vec<u8>> {
    vec(prop::sample::select(b"ab \n\t.".to_vec()), 0..24)
}

proptest! {
    #[test]
    fn edit_similarity_is_symmetric_and_bounded(a in text(), b in text()) {
        let s = edit_similarity(&a, &b);
        prop_assert_eq!(s, edit_similarity(&b, &a));
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(edit_similarity(&a, &a), 1.0);
    }

    #[test]
    fn rouge_ignores_spacing_between_words(words in vec("[a-c]{1,3}", 1..8), gaps in vec(prop::sample::select(vec![" ", "  ", "\n", " \t "]), 8)) {
        let plain = words.join(" ");
        let spaced: String = words.iter().zip(&gaps).map(|(w, g)| format!("{w}{g}")).collect();
        prop_assert_eq!(rouge_l(plain.as_bytes(), plain.as_bytes()), 1.0);
        prop_assert_eq!(rouge_l(spaced.as_bytes(), plain.as_bytes()), 1.0);
    }
}
