//! Add-α smoothed token n-gram model.

use std::collections::HashMap;
use std::marker::PhantomData;

use super::{DecodeError, LogitsProvider};
use crate::real::Real;
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone, Default)]
struct Followers {
    total: u64,
    next: Vec<(TokenId, u64)>,
}

/// `order` is the number of context tokens conditioned on, so order 1 is a
/// bigram model.
///
/// The distribution for a context uses its longest suffix (at most `order`
/// tokens) seen in training:
/// `P(w | s) = (count(s, w) + α) / (count(s) + α·V)`.
/// The empty context stands for a document start and uses the counts of
/// first tokens. When even the last token of a non-empty context was never
/// followed by anything the model returns uniform over `V`.
#[derive(Debug, Clone)]
pub struct NGramModel<F> {
    order: usize,
    alpha: f64,
    vocab_size: usize,
    table: HashMap<Vec<TokenId>, Followers>,
    _scalar: PhantomData<F>,
}

impl<F: Real> NGramModel<F> {
    /// Counts every transition of each encoded document; documents do not
    /// run into each other.
    pub fn build<D: AsRef<[u8]>>(
        corpus: &[D],
        vocab: &Vocabulary,
        order: usize,
        alpha: f64,
    ) -> Result<Self, DecodeError> {
        if order == 0 {
            return Err(DecodeError::Config("n-gram order must be at least 1".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(DecodeError::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        if corpus.iter().all(|d| d.as_ref().is_empty()) {
            return Err(DecodeError::EmptyCorpus);
        }
        let mut counts: HashMap<Vec<TokenId>, HashMap<TokenId, u64>> = HashMap::new();
        for doc in corpus {
            let ids = vocab.encode(doc.as_ref())?;
            if let Some(&first) = ids.first() {
                *counts.entry(Vec::new()).or_default().entry(first).or_default() += 1;
            }
            for j in 1..ids.len() {
                for len in 1..=order.min(j) {
                    *counts
                        .entry(ids[j - len..j].to_vec())
                        .or_default()
                        .entry(ids[j])
                        .or_default() += 1;
                }
            }
        }
        let table = counts
            .into_iter()
            .map(|(ctx, next)| {
                let mut next: Vec<_> = next.into_iter().collect();
                next.sort_unstable();
                let total = next.iter().map(|&(_, n)| n).sum();
                (ctx, Followers { total, next })
            })
            .collect();
        Ok(Self {
            order,
            alpha,
            vocab_size: vocab.len(),
            table,
            _scalar: PhantomData,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of distinct contexts with counts.
    pub fn context_count(&self) -> usize {
        self.table.len()
    }

    fn followers(&self, context: &[TokenId]) -> Option<&Followers> {
        if context.is_empty() {
            return self.table.get(context);
        }
        let longest = self.order.min(context.len());
        (1..=longest)
            .rev()
            .find_map(|len| self.table.get(&context[context.len() - len..]))
    }
}

impl<F: Real> LogitsProvider<F> for NGramModel<F> {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Vec<F> {
        let v = self.vocab_size;
        let Some(f) = self.followers(context) else {
            return vec![F::one() / F::of_usize(v); v];
        };
        let denom = f.total as f64 + self.alpha * v as f64;
        let mut dist = vec![F::of(self.alpha / denom); v];
        for &(id, n) in &f.next {
            dist[id as usize] = F::of((n as f64 + self.alpha) / denom);
        }
        dist
    }
}
