//! Generation results and their JSON form.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::vocab::TokenId;

/// Wall-clock phase timings in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub alignment: u64,
    pub free: u64,
    /// Slowest single mask lookup during alignment.
    pub per_lookup_max: u64,
}

/// Outcome of one generation session, aligned or not.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationResult {
    pub prompt: Vec<u8>,
    /// Full output: for aligned runs the reproduced prompt plus everything
    /// generated after it; for unaligned runs the prompt plus the
    /// continuation.
    pub output: Vec<u8>,
    /// Tokens sampled in this session, alignment steps included.
    pub token_ids: Vec<TokenId>,
    /// Decoding steps spent consuming the alignment prefix.
    pub alignment_steps: usize,
    /// Compatible-token count at each alignment step.
    pub mask_sizes: Vec<usize>,
    pub timings: Timings,
    pub dead_end: bool,
}

impl GenerationResult {
    /// Bytes after the prompt, or `None` when the output does not start
    /// with the prompt.
    pub fn continuation(&self) -> Option<&[u8]> {
        self.output.strip_prefix(self.prompt.as_slice())
    }

    pub fn preserves_prompt(&self) -> bool {
        self.output.starts_with(&self.prompt)
    }

    pub fn to_json(&self) -> GenerationRecord {
        GenerationRecord {
            id: None,
            prompt_b64: B64.encode(&self.prompt),
            output_b64: B64.encode(&self.output),
            token_ids: self.token_ids.clone(),
            alignment_steps: self.alignment_steps,
            mask_sizes: self.mask_sizes.clone(),
            timings_us: self.timings,
            dead_end: self.dead_end,
        }
    }
}

/// Serialized [`GenerationResult`], one JSONL line per prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub prompt_b64: String,
    pub output_b64: String,
    pub token_ids: Vec<TokenId>,
    pub alignment_steps: usize,
    pub mask_sizes: Vec<usize>,
    pub timings_us: Timings,
    pub dead_end: bool,
}

impl GenerationRecord {
    pub fn into_result(self) -> Result<GenerationResult, base64::DecodeError> {
        Ok(GenerationResult {
            prompt: B64.decode(&self.prompt_b64)?,
            output: B64.decode(&self.output_b64)?,
            token_ids: self.token_ids,
            alignment_steps: self.alignment_steps,
            mask_sizes: self.mask_sizes,
            timings: self.timings_us,
            dead_end: self.dead_end,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let r = GenerationResult {
            prompt: b"I ".to_vec(),
            output: b"I like".to_vec(),
            token_ids: vec![3, 4],
            alignment_steps: 1,
            mask_sizes: vec![12],
            timings: Timings {
                alignment: 5,
                free: 7,
                per_lookup_max: 2,
            },
            dead_end: false,
        };
        let v = serde_json::to_value(r.to_json()).unwrap();
        assert_eq!(v["prompt_b64"], "SSA=");
        assert_eq!(v["timings_us"]["per_lookup_max"], 2);
        assert_eq!(v["dead_end"], false);
        assert!(v.get("id").is_none());
        let back: GenerationRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back.into_result().unwrap(), r);
        assert_eq!(r.continuation(), Some(&b"like"[..]));
    }
}
