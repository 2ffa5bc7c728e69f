//! Greedy and nucleus sampling over probability vectors.
//!
//! Draws are reproducible across implementations: the generator is
//! ChaCha8 seeded through `SeedableRng::seed_from_u64`, one draw consumes
//! one `next_u64`, which becomes a uniform `u = (x >> 11) * 2^-53` in
//! `[0, 1)`. The token is picked by inverse CDF over the kept set in
//! ascending id order: the first id whose cumulative weight exceeds
//! `u * total`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DecodeError;
use crate::real::Real;
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    #[default]
    Greedy,
    Nucleus,
}

impl std::str::FromStr for SamplingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "nucleus" | "top-p" | "top_p" => Ok(Self::Nucleus),
            other => Err(format!("unknown sampling mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub mode: SamplingMode,
    pub top_p: f64,
    pub temperature: f64,
    pub seed: u64,
    pub max_new_tokens: usize,
    /// Generation halts once any of these appears in the bytes produced
    /// past the prompt.
    pub stop_sequences: Vec<Vec<u8>>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: SamplingMode::Greedy,
            top_p: 1.0,
            temperature: 1.0,
            seed: 0,
            max_new_tokens: 32,
            stop_sequences: Vec::new(),
        }
    }
}

impl SamplerConfig {
    pub fn greedy(max_new_tokens: usize) -> Self {
        Self {
            max_new_tokens,
            ..Self::default()
        }
    }

    pub fn nucleus(top_p: f64, temperature: f64, seed: u64, max_new_tokens: usize) -> Self {
        Self {
            mode: SamplingMode::Nucleus,
            top_p,
            temperature,
            seed,
            max_new_tokens,
            stop_sequences: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.mode == SamplingMode::Nucleus {
            if !(self.top_p > 0.0 && self.top_p <= 1.0) {
                return Err(DecodeError::Config(format!(
                    "top_p must be in (0, 1], got {}",
                    self.top_p
                )));
            }
            if !(self.temperature > 0.0 && self.temperature.is_finite()) {
                return Err(DecodeError::Config(format!(
                    "temperature must be positive, got {}",
                    self.temperature
                )));
            }
        }
        if self.stop_sequences.iter().any(Vec::is_empty) {
            return Err(DecodeError::Config("empty stop sequence".into()));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Uniform `[0, 1)` from one `next_u64`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Lowest id among the maximal entries.
pub fn argmax<F: Real>(dist: &[F]) -> Option<TokenId> {
    let mut best: Option<(usize, F)> = None;
    for (i, &p) in dist.iter().enumerate() {
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((i, p));
        }
    }
    best.map(|(i, _)| i as TokenId)
}

/// Applies temperature in the log domain: `w_i ∝ p_i^(1/T)`. Zeros stay
/// zero. The result is unnormalized, scaled so the largest entry is 1.
pub fn tempered<F: Real>(dist: &[F], temperature: f64) -> Vec<F> {
    if temperature == 1.0 {
        return dist.to_vec();
    }
    let t = F::of(temperature);
    let max = dist.iter().copied().fold(F::zero(), F::max);
    if max <= F::zero() {
        return vec![F::zero(); dist.len()];
    }
    let ln_max = max.ln();
    dist.iter()
        .map(|&p| {
            if p > F::zero() {
                ((p.ln() - ln_max) / t).exp()
            } else {
                F::zero()
            }
        })
        .collect()
}

/// The nucleus of `weights`: the shortest run of tokens, taken by
/// descending weight (ties by ascending id), whose cumulative weight
/// reaches `top_p` of the total. Returned in ascending id order.
pub fn nucleus_set<F: Real>(weights: &[F], top_p: f64) -> Vec<TokenId> {
    let total: F = weights.iter().copied().sum();
    if total <= F::zero() {
        return Vec::new();
    }
    let mut ranked: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > F::zero()).collect();
    ranked.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));
    let threshold = F::of(top_p) * total - F::cumulative_slack() * total;
    let mut kept = Vec::new();
    let mut cum = F::zero();
    for i in ranked {
        kept.push(i as TokenId);
        cum = cum + weights[i];
        if cum >= threshold {
            break;
        }
    }
    kept.sort_unstable();
    kept
}

/// Probability the nucleus sampler assigns to each token.
pub fn nucleus_probabilities<F: Real>(dist: &[F], top_p: f64, temperature: f64) -> Vec<F> {
    let weights = tempered(dist, temperature);
    let kept = nucleus_set(&weights, top_p);
    let mass: F = kept.iter().map(|&i| weights[i as usize]).sum();
    let mut out = vec![F::zero(); dist.len()];
    for i in kept {
        out[i as usize] = weights[i as usize] / mass;
    }
    out
}

/// Draws one token from `dist` under `cfg`.
pub fn sample<F: Real, R: Rng + ?Sized>(dist: &[F], cfg: &SamplerConfig, rng: &mut R) -> Result<TokenId, DecodeError> {
    if !dist.iter().any(|&p| p > F::zero()) {
        return Err(DecodeError::Contract(
            "cannot sample from an all-zero distribution".into(),
        ));
    }
    match cfg.mode {
        SamplingMode::Greedy => Ok(argmax(dist).expect("non-empty")),
        SamplingMode::Nucleus => {
            let weights = tempered(dist, cfg.temperature);
            let kept = nucleus_set(&weights, cfg.top_p);
            let mass: F = kept.iter().map(|&i| weights[i as usize]).sum();
            let target = F::of(uniform(rng)) * mass;
            let mut cum = F::zero();
            for &i in &kept {
                cum = cum + weights[i as usize];
                if target < cum {
                    return Ok(i);
                }
            }
            Ok(*kept.last().expect("kept set is non-empty"))
        }
    }
}
