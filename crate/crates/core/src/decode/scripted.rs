//! Table-driven provider for deterministic fixtures.
//!
//! File format:
//!
//! ```json
//! {"rows": [{"suffix_b64": "ICAgIHJl", "probs": [0.0, 1.0]}], "default": [0.5, 0.5]}
//! ```
//!
//! The row whose suffix is the longest match against the decoded context
//! wins; rows of equal length resolve to the earliest. `default` applies
//! when nothing matches.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{DecodeError, LogitsProvider};
use crate::real::{check_distribution, Real};
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedRow {
    pub suffix_b64: String,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedTable {
    #[serde(default)]
    pub rows: Vec<ScriptedRow>,
    pub default: Option<Vec<f64>>,
}

impl ScriptedTable {
    pub fn from_json_str(json: &str) -> Result<Self, DecodeError> {
        serde_json::from_str(json).map_err(|e| DecodeError::Table(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DecodeError> {
        let text = std::fs::read_to_string(path).map_err(|e| DecodeError::Table(e.to_string()))?;
        Self::from_json_str(&text)
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedModel<F> {
    rows: Vec<(Vec<u8>, Vec<F>)>,
    default: Vec<F>,
    token_bytes: Vec<Vec<u8>>,
    longest_suffix: usize,
}

impl<F: Real> ScriptedModel<F> {
    pub fn new(table: &ScriptedTable, vocab: &Vocabulary) -> Result<Self, DecodeError> {
        let v = vocab.len();
        let convert = |probs: &[f64], what: &str| -> Result<Vec<F>, DecodeError> {
            check_distribution(probs, v).map_err(|e| DecodeError::Table(format!("{what}: {e}")))?;
            Ok(probs.iter().map(|&p| F::of(p)).collect())
        };
        let default = table
            .default
            .as_deref()
            .ok_or_else(|| DecodeError::Table("missing default row".into()))?;
        let default = convert(default, "default")?;
        let mut rows = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            let suffix = B64
                .decode(&row.suffix_b64)
                .map_err(|e| DecodeError::Table(format!("rows[{i}].suffix_b64: {e}")))?;
            rows.push((suffix, convert(&row.probs, &format!("rows[{i}]"))?));
        }
        let longest_suffix = rows.iter().map(|(s, _)| s.len()).max().unwrap_or(0);
        Ok(Self {
            rows,
            default,
            token_bytes: vocab.tokens().to_vec(),
            longest_suffix,
        })
    }

    /// Last `n` (or fewer) bytes of the decoded context.
    fn tail(&self, context: &[TokenId], n: usize) -> Vec<u8> {
        let mut parts = Vec::new();
        let mut have = 0;
        for &id in context.iter().rev() {
            if have >= n {
                break;
            }
            let bytes = &self.token_bytes[id as usize];
            have += bytes.len();
            parts.push(bytes.as_slice());
        }
        let joined: Vec<u8> = parts.into_iter().rev().flatten().copied().collect();
        joined[joined.len().saturating_sub(n)..].to_vec()
    }
}

impl<F: Real> LogitsProvider<F> for ScriptedModel<F> {
    fn vocab_size(&self) -> usize {
        self.default.len()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Vec<F> {
        let tail = self.tail(context, self.longest_suffix);
        let mut best: Option<&(Vec<u8>, Vec<F>)> = None;
        for row in &self.rows {
            if tail.ends_with(&row.0) && best.is_none_or(|b| row.0.len() > b.0.len()) {
                best = Some(row);
            }
        }
        best.map_or_else(|| self.default.clone(), |(_, probs)| probs.clone())
    }
}
