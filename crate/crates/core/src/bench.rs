//! Lookup latency and alignment-step measurements.

use std::collections::{BTreeMap, HashSet};
use std::hint::black_box;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{aligned_generate, AlignConfig, AlignError};
use crate::decode::{LogitsProvider, SamplerConfig};
use crate::real::Real;
use crate::trie::{scan_matching_tokens, ByteTrie, MaskCache};
use crate::vocab::{VocabError, Vocabulary};

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_(){}[]<>=+-*/.,:;'\"#!&|%";

/// 256 single bytes plus `size − 256` distinct random multi-byte tokens
/// shaped like code: words, space-prefixed words, operator runs and
/// whitespace runs.
pub fn synthetic_vocab(size: usize, seed: u64) -> Result<Vocabulary, VocabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let want = size.saturating_sub(256);
    let mut seen = HashSet::with_capacity(want);
    let mut extras = Vec::with_capacity(want);
    while extras.len() < want {
        let token: Vec<u8> = match rng.random_range(0..10u32) {
            0 => {
                let ws = *b" \n\t";
                (0..rng.random_range(2..9))
                    .map(|_| ws[rng.random_range(0..3usize)])
                    .collect()
            }
            k => {
                let len = rng.random_range(2..11);
                let mut t: Vec<u8> = (0..len)
                    .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
                    .collect();
                if k <= 4 {
                    t[0] = b' ';
                }
                t
            }
        };
        if seen.insert(token.clone()) {
            extras.push(token);
        }
    }
    Vocabulary::byte_level_with(extras)
}

/// Alignment-like prefixes: a random token's prefix, sometimes with a few
/// more bytes appended so the prefix outruns every token.
pub fn query_prefixes(vocab: &Vocabulary, count: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = vocab.regular_ids().collect();
    (0..count)
        .map(|_| {
            let t = vocab.token_bytes(ids[rng.random_range(0..ids.len())]).unwrap();
            let mut p = t[..rng.random_range(1..=t.len())].to_vec();
            if rng.random_bool(0.3) {
                for _ in 0..rng.random_range(1..4) {
                    p.push(ALPHABET[rng.random_range(0..ALPHABET.len())]);
                }
            }
            p
        })
        .collect()
}

/// Latency summary in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub samples: usize,
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub max: u64,
    pub mean: f64,
}

impl Percentiles {
    pub fn from_samples(mut ns: Vec<u64>) -> Self {
        assert!(!ns.is_empty(), "no latency samples");
        ns.sort_unstable();
        let at = |q: f64| ns[((ns.len() - 1) as f64 * q).round() as usize];
        Self {
            samples: ns.len(),
            p50: at(0.5),
            p90: at(0.9),
            p99: at(0.99),
            max: *ns.last().unwrap(),
            mean: ns.iter().sum::<u64>() as f64 / ns.len() as f64,
        }
    }
}

fn time_each<T>(queries: &[Vec<u8>], warmup: usize, mut f: impl FnMut(&[u8]) -> T) -> Percentiles {
    for q in queries.iter().cycle().take(warmup) {
        black_box(f(q));
    }
    let samples = queries
        .iter()
        .map(|q| {
            let t = Instant::now();
            black_box(f(q));
            t.elapsed().as_nanos() as u64
        })
        .collect();
    Percentiles::from_samples(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyConfig {
    pub queries: usize,
    pub naive_queries: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            queries: 10_000,
            naive_queries: 10_000,
            warmup: 1_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub vocab_size: usize,
    pub trie_nodes: usize,
    pub trie_build_us: u64,
    pub warmup: usize,
    pub trie: Percentiles,
    pub naive_scan: Percentiles,
    /// Uncached trie lookups of a single space.
    pub trie_space: Percentiles,
    /// Cache hits on the pre-seeded single-space prefix.
    pub cached_space: Percentiles,
}

pub fn measure_lookup_latency(vocab: &Vocabulary, cfg: &LatencyConfig) -> Result<LatencyReport, String> {
    let started = Instant::now();
    let trie = ByteTrie::build(vocab).map_err(|e| e.to_string())?;
    let trie_build_us = started.elapsed().as_micros() as u64;
    let queries = query_prefixes(vocab, cfg.queries, cfg.seed);
    let naive_queries = &queries[..cfg.naive_queries.min(queries.len())];
    let spaces = vec![b" ".to_vec(); cfg.queries];
    let mut cache = MaskCache::with_default_capacity(&trie);
    Ok(LatencyReport {
        vocab_size: vocab.len(),
        trie_nodes: trie.node_count(),
        trie_build_us,
        warmup: cfg.warmup,
        trie: time_each(&queries, cfg.warmup, |q| trie.matching_tokens(q)),
        naive_scan: time_each(naive_queries, cfg.warmup.min(naive_queries.len()), |q| {
            scan_matching_tokens(vocab, q)
        }),
        trie_space: time_each(&spaces, cfg.warmup, |q| trie.matching_tokens(q)),
        cached_space: time_each(&spaces, cfg.warmup, |q| cache.cached_mask(&trie, q)),
    })
}

/// Prompts that end on a token boundary of their own encoding: each is the
/// decoding of the first `k` tokens of a document, `k` drawn from
/// `[min_tokens, len)`.
pub fn boundary_prompts<D: AsRef<[u8]>>(
    docs: &[D],
    vocab: &Vocabulary,
    per_doc: usize,
    min_tokens: usize,
    seed: u64,
) -> Result<Vec<Vec<u8>>, VocabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for doc in docs {
        let ids = vocab.encode(doc.as_ref())?;
        if ids.len() <= min_tokens {
            continue;
        }
        for _ in 0..per_doc {
            let k = rng.random_range(min_tokens..ids.len());
            let prompt = vocab.decode(&ids[..k])?;
            // Re-encoding must give the same tokens, else the cut is not a
            // boundary of the prompt's own tokenization.
            if vocab.encode(&prompt)? == ids[..k] {
                out.push(prompt);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepHistogram {
    pub backtrack: usize,
    pub counts: BTreeMap<usize, usize>,
    pub mode: Option<usize>,
    pub dead_ends: usize,
}

/// Alignment steps (B′) over `prompts`, with no free decoding.
pub fn alignment_step_histogram<F, M>(
    model: &M,
    vocab: &Vocabulary,
    trie: &ByteTrie,
    prompts: &[Vec<u8>],
    align: &AlignConfig,
    sampler: &SamplerConfig,
) -> Result<StepHistogram, AlignError>
where
    F: Real,
    M: LogitsProvider<F> + ?Sized,
{
    let sampler = SamplerConfig {
        max_new_tokens: 0,
        ..sampler.clone()
    };
    let mut cache = MaskCache::with_default_capacity(trie);
    let mut counts = BTreeMap::new();
    let mut dead_ends = 0;
    for p in prompts {
        let r = aligned_generate(model, vocab, trie, &mut cache, p, align, &sampler)?;
        dead_ends += usize::from(r.dead_end);
        *counts.entry(r.alignment_steps).or_insert(0) += 1;
    }
    // Highest count wins; ties go to the smaller step count.
    let mode = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&k, _)| k);
    Ok(StepHistogram {
        backtrack: align.backtrack_tokens,
        counts,
        mode,
        dead_ends,
    })
}
