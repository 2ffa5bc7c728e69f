//! Logits providers, samplers and the plain generation loop.
//!
//! [`generate`] is the unaligned arm: it tokenizes the prompt as-is and
//! samples after it. The aligned arm lives in [`crate::align`] and reuses
//! the same free-decoding loop once the alignment prefix is consumed.

mod ngram;
mod sampler;
mod scripted;

use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use crate::generation::GenerationResult;
use crate::real::{check_distribution, Real};
use crate::vocab::{TokenId, VocabError, Vocabulary};

pub use ngram::NGramModel;
pub use sampler::{argmax, nucleus_probabilities, nucleus_set, sample, tempered, uniform, SamplerConfig, SamplingMode};
pub use scripted::{ScriptedModel, ScriptedRow, ScriptedTable};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid sampler or model configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("scripted table: {0}")]
    Table(String),
    #[error("provider covers {provider} tokens but the vocabulary has {vocab}")]
    VocabMismatch { provider: usize, vocab: usize },
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// A language model reduced to "context in, next-token distribution out".
///
/// Implementations must be deterministic in the context and return `V`
/// non-negative entries summing to one; all randomness belongs to the
/// sampler.
pub trait LogitsProvider<F: Real> {
    fn vocab_size(&self) -> usize;

    fn next_distribution(&self, context: &[TokenId]) -> Vec<F>;
}

impl<F: Real, P: LogitsProvider<F> + ?Sized> LogitsProvider<F> for &P {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Vec<F> {
        (**self).next_distribution(context)
    }
}

impl<F: Real, P: LogitsProvider<F> + ?Sized> LogitsProvider<F> for Box<P> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Vec<F> {
        (**self).next_distribution(context)
    }
}

pub(crate) fn check_vocab<F: Real, M: LogitsProvider<F> + ?Sized>(
    model: &M,
    vocab: &Vocabulary,
) -> Result<(), DecodeError> {
    if model.vocab_size() != vocab.len() {
        return Err(DecodeError::VocabMismatch {
            provider: model.vocab_size(),
            vocab: vocab.len(),
        });
    }
    Ok(())
}

/// Queries the provider, checking its contract in debug builds.
pub(crate) fn query<F: Real, M: LogitsProvider<F> + ?Sized>(model: &M, context: &[TokenId]) -> Vec<F> {
    let dist = model.next_distribution(context);
    debug_assert!(
        check_distribution(&dist, model.vocab_size()).is_ok(),
        "provider broke its contract: {:?}",
        check_distribution(&dist, model.vocab_size())
    );
    dist
}

/// True when a stop sequence occurs in `generated` ending at or after
/// `fresh_from`.
fn hit_stop(generated: &[u8], fresh_from: usize, stops: &[Vec<u8>]) -> bool {
    stops.iter().any(|stop| {
        let start = fresh_from.saturating_sub(stop.len() - 1);
        generated.len() >= start + stop.len() && generated[start..].windows(stop.len()).any(|w| w == stop.as_slice())
    })
}

/// Unconstrained sampling after `context`, appending to `result`.
///
/// `result.output[prompt_len..]` is what counts as generated for stop
/// sequences. Sampling a special token ends generation without emitting it.
pub(crate) fn decode_free<F, M, R>(
    model: &M,
    vocab: &Vocabulary,
    context: &mut Vec<TokenId>,
    result: &mut GenerationResult,
    prompt_len: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(), DecodeError>
where
    F: Real,
    M: LogitsProvider<F> + ?Sized,
    R: Rng + ?Sized,
{
    let started = Instant::now();
    let generated_len = |r: &GenerationResult| r.output.len().saturating_sub(prompt_len);
    if hit_stop(
        &result.output[prompt_len.min(result.output.len())..],
        0,
        &cfg.stop_sequences,
    ) {
        return Ok(());
    }
    for _ in 0..cfg.max_new_tokens {
        let dist = query(model, context);
        let id = sample(&dist, cfg, rng)?;
        if vocab.is_special(id) {
            break;
        }
        let before = generated_len(result);
        context.push(id);
        result.token_ids.push(id);
        result
            .output
            .extend_from_slice(vocab.token_bytes(id).expect("sampled id is in range"));
        if hit_stop(&result.output[prompt_len..], before, &cfg.stop_sequences) {
            break;
        }
    }
    result.timings.free += started.elapsed().as_micros() as u64;
    Ok(())
}

/// Plain generation: encode the prompt without backtracking and sample.
pub fn generate<F, M>(
    model: &M,
    vocab: &Vocabulary,
    prompt: &[u8],
    cfg: &SamplerConfig,
) -> Result<GenerationResult, DecodeError>
where
    F: Real,
    M: LogitsProvider<F> + ?Sized,
{
    cfg.validate()?;
    check_vocab(model, vocab)?;
    let mut context = vocab.encode(prompt)?;
    let mut result = GenerationResult {
        prompt: prompt.to_vec(),
        output: prompt.to_vec(),
        ..GenerationResult::default()
    };
    let mut rng = cfg.rng();
    decode_free(model, vocab, &mut context, &mut result, prompt.len(), cfg, &mut rng)?;
    Ok(result)
}
