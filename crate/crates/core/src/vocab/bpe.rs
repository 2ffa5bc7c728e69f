//! Tiny byte-level BPE trainer for test vocabularies.

use std::collections::{BTreeMap, HashMap};

use super::{pretokenize, Merge, PretokenizeOptions, TokenId, VocabError, Vocabulary};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainOptions {
    pub pretokenize: PretokenizeOptions,
    /// Byte strings appended as special tokens after training.
    pub specials: Vec<Vec<u8>>,
    /// Pairs seen fewer times than this are never merged.
    pub min_frequency: u64,
}

impl TrainOptions {
    /// Space-prefix and whitespace grouping on, no specials, min frequency 2.
    pub fn code() -> Self {
        Self {
            pretokenize: PretokenizeOptions::CODE,
            specials: Vec::new(),
            min_frequency: 2,
        }
    }
}

/// Trains a byte-level BPE vocabulary of at most `target_size` tokens.
///
/// Starts from the 256 single-byte tokens and repeatedly merges the most
/// frequent adjacent pair inside pretokens. Ties go to the lexicographically
/// smallest merged byte sequence, then the smallest left side. Training stops
/// at `target_size` or when no pair reaches `min_frequency`, so small
/// corpora can yield fewer tokens. Specials take the last ids.
pub fn train_tiny_bpe<D: AsRef<[u8]>>(
    corpus: &[D],
    target_size: usize,
    options: &TrainOptions,
) -> Result<Vocabulary, VocabError> {
    let minimum = 256 + options.specials.len();
    if target_size < minimum {
        return Err(VocabError::TargetTooSmall {
            target: target_size,
            minimum,
        });
    }
    if corpus.iter().all(|d| d.as_ref().is_empty()) {
        return Err(VocabError::EmptyCorpus);
    }

    let mut chunk_counts: BTreeMap<&[u8], u64> = BTreeMap::new();
    for doc in corpus {
        let doc = doc.as_ref();
        for r in pretokenize(doc, options.pretokenize) {
            *chunk_counts.entry(&doc[r]).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<TokenId>, u64)> = chunk_counts
        .into_iter()
        .map(|(bytes, n)| (bytes.iter().map(|&b| b as TokenId).collect(), n))
        .collect();

    let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut index: HashMap<Vec<u8>, TokenId> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as TokenId))
        .collect();
    let mut merges = Vec::new();
    let min_frequency = options.min_frequency.max(1);

    while tokens.len() + options.specials.len() < target_size {
        let mut pairs: HashMap<(TokenId, TokenId), u64> = HashMap::new();
        for (word, n) in &words {
            for w in word.windows(2) {
                *pairs.entry((w[0], w[1])).or_default() += n;
            }
        }
        let best = pairs
            .into_iter()
            .filter(|&(_, n)| n >= min_frequency)
            .map(|((l, r), n)| {
                let merged = [tokens[l as usize].as_slice(), tokens[r as usize].as_slice()].concat();
                (n, merged, l, r)
            })
            .min_by(|a, b| {
                b.0.cmp(&a.0)
                    .then_with(|| a.1.cmp(&b.1))
                    .then_with(|| tokens[a.2 as usize].cmp(&tokens[b.2 as usize]))
            });
        let Some((_, merged, left, right)) = best else {
            break;
        };
        let merged_id = match index.get(&merged) {
            Some(&id) => id,
            None => {
                let id = tokens.len() as TokenId;
                index.insert(merged.clone(), id);
                tokens.push(merged);
                id
            }
        };
        merges.push(Merge {
            left: tokens[left as usize].clone(),
            right: tokens[right as usize].clone(),
        });
        for (word, _) in &mut words {
            apply_merge(word, left, right, merged_id);
        }
    }

    let first_special = tokens.len() as TokenId;
    tokens.extend(options.specials.iter().cloned());
    let specials = (first_special..tokens.len() as TokenId).collect::<Vec<_>>();
    Vocabulary::new(tokens, Some(merges), specials, Some(options.pretokenize))
}

fn apply_merge(word: &mut Vec<TokenId>, left: TokenId, right: TokenId, merged: TokenId) {
    if word.len() < 2 {
        return;
    }
    let mut out = Vec::with_capacity(word.len());
    let mut i = 0;
    while i < word.len() {
        if i + 1 < word.len() && word[i] == left && word[i + 1] == right {
            out.push(merged);
            i += 2;
        } else {
            out.push(word[i]);
            i += 1;
        }
    }
    *word = out;
}
