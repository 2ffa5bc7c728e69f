use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenalign::trie::{ByteTrie, MaskCache, TokenMask};
use tokenalign::Vocabulary;

/// The oracle, written out independently of the crate's own scan helper.
fn oracle(tokens: &[Vec<u8>], prefix: &[u8]) -> Vec<u32> {
    (0..tokens.len() as u32)
        .filter(|&i| {
            let t = &tokens[i as usize];
            t.starts_with(prefix) || prefix.starts_with(t)
        })
        .collect()
}

// Small alphabet so prefixes actually collide with tokens.
fn token() -> impl Strategy<Value = Vec<u8>> {
    vec(prop::sample::select(b"ab \n(".to_vec()), 1..6)
}

fn vocab_and_prefixes() -> impl Strategy<Value = (Vec<Vec<u8>>, Vec<Vec<u8>>)> {
    (
        btree_set(token(), 1..60).prop_map(|s| s.into_iter().collect::<Vec<_>>()),
        vec(vec(prop::sample::select(b"ab \n(x".to_vec()), 1..9), 1..20),
    )
}

proptest! {
    #[test]
    fn trie_matches_linear_scan((tokens, prefixes) in vocab_and_prefixes()) {
        let v = Vocabulary::from_tokens(tokens.clone()).unwrap();
        let trie = ByteTrie::build(&v).unwrap();
        for p in &prefixes {
            let got: Vec<u32> = trie.matching_tokens(p).iter_ones().collect();
            prop_assert_eq!(got, oracle(&tokens, p));
        }
    }

    #[test]
    fn extending_a_prefix_never_grows_the_mask((tokens, prefixes) in vocab_and_prefixes(), tail in vec(any::<u8>(), 1..4)) {
        let v = Vocabulary::from_tokens(tokens).unwrap();
        let trie = ByteTrie::build(&v).unwrap();
        for p in &prefixes {
            let longer = [p.as_slice(), &tail].concat();
            prop_assert!(trie.matching_tokens(&longer).is_subset(&trie.matching_tokens(p)));
        }
    }

    #[test]
    fn cache_capacity_never_changes_masks((tokens, prefixes) in vocab_and_prefixes(), cap in 0usize..4) {
        let v = Vocabulary::from_tokens(tokens).unwrap();
        let trie = ByteTrie::build(&v).unwrap();
        let mut cache = MaskCache::new(&trie, cap);
        // Query twice so hits, misses and evictions all happen.
        for p in prefixes.iter().chain(prefixes.iter().rev()) {
            prop_assert_eq!(&*cache.cached_mask(&trie, p), &trie.matching_tokens(p));
        }
    }
}

#[test]
fn specials_never_match() {
    let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    tokens.push(b"<e>".to_vec());
    let v = Vocabulary::new(tokens, None, [256], None).unwrap();
    let trie = ByteTrie::build(&v).unwrap();
    assert!(!trie.matching_tokens(b"<").contains(256));
    assert!(!trie.matching_tokens(b"<e>").contains(256));
}

#[test]
fn ten_thousand_cached_queries_agree_with_the_trie() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let extras: Vec<Vec<u8>> = (0..300)
        .map(|_| {
            (0..rng.random_range(2..6))
                .map(|_| b"ab (\n"[rng.random_range(0..5usize)])
                .collect()
        })
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let v = Vocabulary::byte_level_with(extras).unwrap();
    let trie = ByteTrie::build(&v).unwrap();
    let mut cache = MaskCache::new(&trie, 64);
    for _ in 0..10_000 {
        let p: Vec<u8> = (0..rng.random_range(1..7))
            .map(|_| b"ab (\n"[rng.random_range(0..5usize)])
            .collect();
        assert_eq!(*cache.cached_mask(&trie, &p), trie.matching_tokens(&p));
    }
    assert!(cache.stats().hits > 0);
}

#[test]
fn seeded_space_is_a_hit_on_first_query() {
    let v = Vocabulary::byte_level_with([" a", " b"]).unwrap();
    let trie = ByteTrie::build(&v).unwrap();
    let mut cache = MaskCache::with_default_capacity(&trie);
    let before = cache.stats();
    let m = cache.cached_mask(&trie, b" ");
    assert_eq!(cache.stats().hits, before.hits + 1);
    let want = TokenMask::from_ids(v.len(), [32, 256, 257]);
    assert_eq!(*m, want);
}

#[test]
fn serialized_trie_round_trips() {
    let v = Vocabulary::byte_level_with(["def", "de", " x", "\n    "]).unwrap();
    let trie = ByteTrie::build(&v).unwrap();
    let back = ByteTrie::from_bytes(&trie.to_bytes()).unwrap();
    for p in [&b"d"[..], b"de", b"def", b"defg", b" ", b"\n  "] {
        assert_eq!(back.matching_tokens(p), trie.matching_tokens(p));
    }
    back.verify(&v).unwrap();
}
