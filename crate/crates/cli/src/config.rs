//! Run configuration: a JSON file (or inline object) merged under flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use tokenalign::align::{AlignConfig, FallbackPolicy};
use tokenalign::decode::{LogitsProvider, NGramModel, SamplerConfig, SamplingMode, ScriptedModel, ScriptedTable};
use tokenalign::scenarios::load_corpus;
use tokenalign::vocab::Vocabulary;

/// Bad invocation: reported with exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Every field is optional; command-line flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub vocab: Option<PathBuf>,
    pub provider: Option<String>,
    pub ngram_order: Option<usize>,
    pub ngram_alpha: Option<f64>,
    pub backtrack: Option<usize>,
    pub fallback: Option<FallbackPolicy>,
    pub max_alignment_steps: Option<usize>,
    pub sampling: Option<String>,
    pub top_p: Option<f64>,
    pub temperature: Option<f64>,
    pub max_new_tokens: Option<usize>,
    #[serde(default)]
    pub stop: Vec<String>,
    pub cache_capacity: Option<usize>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// `arg` is a path to a JSON file or a JSON object literal.
    pub fn load(arg: &str) -> Result<Self> {
        let text = if arg.trim_start().starts_with('{') {
            arg.to_string()
        } else {
            std::fs::read_to_string(arg).with_context(|| format!("reading config {arg}"))?
        };
        serde_json::from_str(&text).map_err(|e| UsageError(format!("config: {e}")).into())
    }
}

/// Decoding flags shared by `align`, `eval` and `bench`.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct DecodeArgs {
    /// `ngram:<corpus>` or `scripted:<table.json>`.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long)]
    pub ngram_order: Option<usize>,
    #[arg(long)]
    pub ngram_alpha: Option<f64>,
    /// Prompt tokens to back off before aligning.
    #[arg(long)]
    pub backtrack: Option<usize>,
    /// `error` or `emit-raw-bytes`.
    #[arg(long)]
    pub fallback: Option<FallbackPolicy>,
    #[arg(long)]
    pub max_alignment_steps: Option<usize>,
    /// `greedy` or `nucleus`.
    #[arg(long)]
    pub sampling: Option<String>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    /// Stop sequence, repeatable. `\n` and `\t` escapes are understood.
    #[arg(long)]
    pub stop: Vec<String>,
    #[arg(long)]
    pub cache_capacity: Option<usize>,
}

fn unescape(s: &str) -> Vec<u8> {
    s.replace("\\n", "\n").replace("\\t", "\t").into_bytes()
}

/// Fully resolved decoding setup.
pub struct Resolved {
    pub provider: Option<String>,
    pub ngram_order: usize,
    pub ngram_alpha: f64,
    pub align: AlignConfig,
    pub sampler: SamplerConfig,
    pub cache_capacity: usize,
}

impl DecodeArgs {
    pub fn resolve(&self, cfg: &RunConfig, seed: u64, default_new_tokens: usize) -> Result<Resolved> {
        let backtrack = self
            .backtrack
            .or(cfg.backtrack)
            .unwrap_or(AlignConfig::DEFAULT_BACKTRACK);
        let align = AlignConfig {
            backtrack_tokens: backtrack,
            fallback_policy: self.fallback.or(cfg.fallback).unwrap_or_default(),
            max_alignment_steps: self
                .max_alignment_steps
                .or(cfg.max_alignment_steps)
                .unwrap_or(AlignConfig::default_step_limit(backtrack)),
        };
        let mode: SamplingMode = match self.sampling.as_ref().or(cfg.sampling.as_ref()) {
            Some(m) => m.parse().map_err(UsageError)?,
            None => SamplingMode::Greedy,
        };
        let stops = if self.stop.is_empty() { &cfg.stop } else { &self.stop };
        let sampler = SamplerConfig {
            mode,
            top_p: self.top_p.or(cfg.top_p).unwrap_or(1.0),
            temperature: self.temperature.or(cfg.temperature).unwrap_or(1.0),
            seed,
            max_new_tokens: self.max_new_tokens.or(cfg.max_new_tokens).unwrap_or(default_new_tokens),
            stop_sequences: stops.iter().map(|s| unescape(s)).collect(),
        };
        Ok(Resolved {
            provider: self.provider.clone().or_else(|| cfg.provider.clone()),
            ngram_order: self.ngram_order.or(cfg.ngram_order).unwrap_or(3),
            ngram_alpha: self.ngram_alpha.or(cfg.ngram_alpha).unwrap_or(0.01),
            align,
            sampler,
            cache_capacity: self
                .cache_capacity
                .or(cfg.cache_capacity)
                .unwrap_or(tokenalign::trie::MaskCache::DEFAULT_CAPACITY),
        })
    }
}

impl std::str::FromStr for Provider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("ngram", path)) if !path.is_empty() => Ok(Provider::NGram(path.into())),
            Some(("scripted", path)) if !path.is_empty() => Ok(Provider::Scripted(path.into())),
            _ => Err(format!(
                "provider must be ngram:<corpus> or scripted:<table>, got `{s}`"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provider {
    NGram(PathBuf),
    Scripted(PathBuf),
}

impl Resolved {
    pub fn build_provider(&self, vocab: &Vocabulary) -> Result<Box<dyn LogitsProvider<f64>>> {
        let Some(spec) = &self.provider else {
            bail!(UsageError(
                "no provider given (use --provider ngram:<corpus> or scripted:<table>)".into()
            ));
        };
        let provider: Provider = spec.parse().map_err(UsageError)?;
        Ok(match provider {
            Provider::NGram(path) => {
                let docs = load_corpus(&path).with_context(|| format!("loading corpus {}", path.display()))?;
                let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
                Box::new(NGramModel::<f64>::build(
                    &texts,
                    vocab,
                    self.ngram_order,
                    self.ngram_alpha,
                )?)
            }
            Provider::Scripted(path) => {
                let table = ScriptedTable::load(&path).with_context(|| format!("loading table {}", path.display()))?;
                Box::new(ScriptedModel::<f64>::new(&table, vocab)?)
            }
        })
    }
}

pub fn load_vocab(path: Option<&Path>) -> Result<Vocabulary> {
    let Some(path) = path else {
        bail!(UsageError("no vocabulary given (use --vocab <file>)".into()));
    };
    Vocabulary::load(path).with_context(|| format!("loading vocabulary {}", path.display()))
}
