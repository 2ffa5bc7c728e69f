//! Token alignment for language-model decoding.
//!
//! Prompts that end mid-token (a partial word, trailing whitespace, an
//! indentation run) push a model onto token boundaries it rarely saw in
//! training. [`align::aligned_generate`] backs off the last few prompt
//! tokens and lets the model re-spell them under a byte-prefix constraint.
//!
//! The numeric core is generic over [`real::Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod align;
pub mod bench;
pub mod decode;
pub mod eval;
pub mod generation;
pub mod metrics;
pub mod real;
pub mod scenarios;
pub mod trie;
pub mod vocab;

pub use align::{aligned_generate, AlignConfig, AlignError, FallbackPolicy};
pub use decode::{generate, DecodeError, LogitsProvider, SamplerConfig, SamplingMode};
pub use generation::{GenerationRecord, GenerationResult, Timings};
pub use trie::{ByteTrie, MaskCache, TokenMask};
pub use vocab::{TokenId, Vocabulary};

pub type NGram = decode::NGramModel<f64>;
pub type Scripted = decode::ScriptedModel<f64>;
pub type Distribution = Vec<f64>;
