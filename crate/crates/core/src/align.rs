//! Token alignment.
//!
//! The prompt is tokenized, its last `B` tokens are removed from the model
//! context and their bytes become the *alignment prefix*. Each alignment
//! step masks the next-token distribution down to tokens compatible with
//! the remaining prefix, samples, and strips the sampled bytes from the
//! prefix. Once the prefix is empty, decoding continues unconstrained.
//!
//! Every sampled token either is a prefix of the remaining bytes or extends
//! them, so the output always starts with the exact prompt bytes and the
//! loop ends within `len(prefix)` steps.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::{check_vocab, decode_free, query, sample, DecodeError, LogitsProvider, SamplerConfig};
use crate::generation::GenerationResult;
use crate::real::{check_distribution, Real};
use crate::trie::{is_compatible, ByteTrie, MaskCache, TokenMask};
use crate::vocab::{TokenId, VocabError, Vocabulary};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("invalid alignment configuration: {0}")]
    Config(String),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("no vocabulary token is compatible with alignment prefix {prefix:?}")]
    EmptyMask { prefix: Vec<u8> },
    #[error(
        "alignment dead end after {steps} steps: no token matches remaining prefix {prefix:?} \
         (context has {context_len} tokens)"
    )]
    DeadEnd {
        prefix: Vec<u8>,
        steps: usize,
        context_len: usize,
    },
    #[error("token {token} is not compatible with alignment prefix {prefix:?}")]
    Incompatible { token: TokenId, prefix: Vec<u8> },
    #[error("alignment did not finish within {limit} steps")]
    StepLimit { limit: usize },
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// What to do when no token is compatible with the remaining prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackPolicy {
    /// Abort the session with [`AlignError::DeadEnd`].
    #[default]
    Error,
    /// Append the remaining prefix bytes verbatim, as single-byte tokens
    /// while those exist, mark the result as a dead end and stop.
    EmitRawBytes,
}

impl std::str::FromStr for FallbackPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error" => Ok(Self::Error),
            "emit-raw-bytes" => Ok(Self::EmitRawBytes),
            other => Err(format!("unknown fallback policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub backtrack_tokens: usize,
    pub fallback_policy: FallbackPolicy,
    pub max_alignment_steps: usize,
}

impl AlignConfig {
    pub const DEFAULT_BACKTRACK: usize = 3;

    /// Backtrack `b` tokens, error on dead ends, step bound `4·b + 16`.
    pub fn new(backtrack_tokens: usize) -> Self {
        Self {
            backtrack_tokens,
            fallback_policy: FallbackPolicy::Error,
            max_alignment_steps: Self::default_step_limit(backtrack_tokens),
        }
    }

    pub fn default_step_limit(backtrack_tokens: usize) -> usize {
        4 * backtrack_tokens + 16
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if self.backtrack_tokens == 0 {
            return Err(AlignError::Config("backtrack_tokens must be at least 1".into()));
        }
        if self.max_alignment_steps < self.backtrack_tokens {
            return Err(AlignError::Config(format!(
                "max_alignment_steps {} is below backtrack_tokens {}",
                self.max_alignment_steps, self.backtrack_tokens
            )));
        }
        Ok(())
    }
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self::new(Self::DEFAULT_BACKTRACK)
    }
}

/// Loop state: the model context and the bytes still to reproduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentState {
    pub context: Vec<TokenId>,
    pub prefix: Vec<u8>,
    pub steps_taken: usize,
}

impl AlignmentState {
    pub fn new(context: Vec<TokenId>, prefix: Vec<u8>) -> Self {
        Self {
            context,
            prefix,
            steps_taken: 0,
        }
    }

    pub fn is_aligned(&self) -> bool {
        self.prefix.is_empty()
    }

    /// Consumes `chosen`: its bytes leave the front of the prefix and the
    /// token joins the context. Returns how many of its bytes ran past the
    /// prefix (ordinary generated output).
    pub fn advance(&mut self, chosen: TokenId, vocab: &Vocabulary) -> Result<usize, AlignError> {
        let bytes = vocab
            .token_bytes(chosen)
            .filter(|b| !vocab.is_special(chosen) && is_compatible(b, &self.prefix))
            .ok_or_else(|| AlignError::Incompatible {
                token: chosen,
                prefix: self.prefix.clone(),
            })?;
        let consumed = bytes.len().min(self.prefix.len());
        self.prefix.drain(..consumed);
        self.context.push(chosen);
        self.steps_taken += 1;
        Ok(bytes.len() - consumed)
    }
}

/// Splits `ids` into the model context and the alignment prefix bytes.
///
/// `B` is clamped to `ids.len()`, so short prompts backtrack completely.
pub fn backtrack_split(
    ids: &[TokenId],
    vocab: &Vocabulary,
    backtrack_tokens: usize,
) -> Result<(Vec<TokenId>, Vec<u8>), AlignError> {
    if backtrack_tokens == 0 {
        return Err(AlignError::Config("backtrack_tokens must be at least 1".into()));
    }
    if ids.is_empty() {
        return Err(AlignError::EmptyPrompt);
    }
    let keep = ids.len() - backtrack_tokens.min(ids.len());
    let prefix = vocab.decode(&ids[keep..])?;
    Ok((ids[..keep].to_vec(), prefix))
}

/// Zeroes every entry outside `mask` and renormalizes.
///
/// If the mask is non-empty but carries no probability mass, returns the
/// uniform distribution over the mask.
pub fn apply_mask<F: Real>(dist: &[F], mask: &TokenMask) -> Result<Vec<F>, AlignError> {
    if mask.is_empty() {
        return Err(AlignError::EmptyMask { prefix: Vec::new() });
    }
    let mut out = vec![F::zero(); dist.len()];
    let mut mass = F::zero();
    for id in mask.iter_ones() {
        let p = dist[id as usize];
        out[id as usize] = p;
        mass = mass + p;
    }
    if mass > F::zero() {
        for id in mask.iter_ones() {
            out[id as usize] = out[id as usize] / mass;
        }
    } else {
        let uniform = F::one() / F::of_usize(mask.count());
        for id in mask.iter_ones() {
            out[id as usize] = uniform;
        }
    }
    Ok(out)
}

/// One alignment step's distribution: `dist` restricted to tokens
/// compatible with `state.prefix`, renormalized.
pub fn align_step<F: Real>(
    state: &AlignmentState,
    dist: &[F],
    trie: &ByteTrie,
    cache: &mut MaskCache,
) -> Result<Vec<F>, AlignError> {
    if state.prefix.is_empty() {
        return Err(AlignError::Config("align_step needs a non-empty prefix".into()));
    }
    check_distribution(dist, trie.vocab_size()).map_err(AlignError::Distribution)?;
    let mask = cache.cached_mask(trie, &state.prefix);
    apply_mask(dist, &mask).map_err(|e| match e {
        AlignError::EmptyMask { .. } => AlignError::EmptyMask {
            prefix: state.prefix.clone(),
        },
        other => other,
    })
}

/// Everything an aligned generation session needs besides the prompt.
pub struct Aligner<'a, F: Real, M: LogitsProvider<F> + ?Sized> {
    pub model: &'a M,
    pub vocab: &'a Vocabulary,
    pub trie: &'a ByteTrie,
    pub align: AlignConfig,
    pub sampler: SamplerConfig,
    _scalar: std::marker::PhantomData<F>,
}

impl<'a, F: Real, M: LogitsProvider<F> + ?Sized> Aligner<'a, F, M> {
    pub fn new(
        model: &'a M,
        vocab: &'a Vocabulary,
        trie: &'a ByteTrie,
        align: AlignConfig,
        sampler: SamplerConfig,
    ) -> Self {
        Self {
            model,
            vocab,
            trie,
            align,
            sampler,
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn generate(&self, cache: &mut MaskCache, prompt: &[u8]) -> Result<GenerationResult, AlignError> {
        aligned_generate(
            self.model,
            self.vocab,
            self.trie,
            cache,
            prompt,
            &self.align,
            &self.sampler,
        )
    }
}

/// Backtracks the prompt, aligns to the prefix, then decodes freely.
///
/// `max_new_tokens` and stop sequences apply to the free phase; the
/// alignment steps only reproduce the prompt (plus whatever the final
/// alignment token carries past it).
pub fn aligned_generate<F, M>(
    model: &M,
    vocab: &Vocabulary,
    trie: &ByteTrie,
    cache: &mut MaskCache,
    prompt: &[u8],
    align_cfg: &AlignConfig,
    sampler_cfg: &SamplerConfig,
) -> Result<GenerationResult, AlignError>
where
    F: Real,
    M: LogitsProvider<F> + ?Sized,
{
    align_cfg.validate()?;
    sampler_cfg.validate()?;
    check_vocab(model, vocab)?;
    if prompt.is_empty() {
        return Err(AlignError::EmptyPrompt);
    }
    let ids = vocab.encode(prompt)?;
    let (context, prefix) = backtrack_split(&ids, vocab, align_cfg.backtrack_tokens)?;
    let mut state = AlignmentState::new(context, prefix);
    let mut result = GenerationResult {
        prompt: prompt.to_vec(),
        output: vocab.decode(&state.context)?,
        ..GenerationResult::default()
    };
    let mut rng = sampler_cfg.rng();

    let started = Instant::now();
    let outcome = run_alignment(
        model,
        vocab,
        trie,
        cache,
        align_cfg,
        sampler_cfg,
        &mut state,
        &mut result,
        &mut rng,
    );
    result.alignment_steps = state.steps_taken;
    result.timings.alignment = started.elapsed().as_micros() as u64;
    match outcome {
        Ok(()) => {}
        Err(AlignError::EmptyMask { prefix }) => match align_cfg.fallback_policy {
            FallbackPolicy::Error => {
                return Err(AlignError::DeadEnd {
                    prefix,
                    steps: state.steps_taken,
                    context_len: state.context.len(),
                })
            }
            FallbackPolicy::EmitRawBytes => {
                for &b in &state.prefix {
                    if let Some(id) = vocab.byte_token(b) {
                        result.token_ids.push(id);
                    }
                }
                result.output.extend_from_slice(&state.prefix);
                result.dead_end = true;
                return Ok(result);
            }
        },
        Err(e) => return Err(e),
    }

    let mut context = state.context;
    decode_free(
        model,
        vocab,
        &mut context,
        &mut result,
        prompt.len(),
        sampler_cfg,
        &mut rng,
    )?;
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn run_alignment<F, M, R>(
    model: &M,
    vocab: &Vocabulary,
    trie: &ByteTrie,
    cache: &mut MaskCache,
    align_cfg: &AlignConfig,
    sampler_cfg: &SamplerConfig,
    state: &mut AlignmentState,
    result: &mut GenerationResult,
    rng: &mut R,
) -> Result<(), AlignError>
where
    F: Real,
    M: LogitsProvider<F> + ?Sized,
    R: Rng + ?Sized,
{
    while !state.is_aligned() {
        if state.steps_taken >= align_cfg.max_alignment_steps {
            return Err(AlignError::StepLimit {
                limit: align_cfg.max_alignment_steps,
            });
        }
        let dist = query(model, &state.context);
        let lookup = Instant::now();
        let mask = cache.cached_mask(trie, &state.prefix);
        result.timings.per_lookup_max = result.timings.per_lookup_max.max(lookup.elapsed().as_micros() as u64);
        let masked = apply_mask(&dist, &mask).map_err(|_| AlignError::EmptyMask {
            prefix: state.prefix.clone(),
        })?;
        result.mask_sizes.push(mask.count());
        let chosen = sample(&masked, sampler_cfg, rng)?;
        state.advance(chosen, vocab)?;
        result.token_ids.push(chosen);
        result
            .output
            .extend_from_slice(vocab.token_bytes(chosen).expect("sampled id is in range"));
    }
    Ok(())
}
