//! JSON vocabulary files.
//!
//! ```json
//! {
//!   "version": 1,
//!   "tokens": [{"id": 0, "text": "a"}, {"id": 1, "bytes_b64": "4pY="}],
//!   "merges": [["a", {"bytes_b64": "4pY="}]],
//!   "specials": [],
//!   "pretokenizer": {"space_prefix": true, "group_whitespace": true}
//! }
//! ```
//!
//! Each token carries either `text` (UTF-8) or `bytes_b64` (standard base64).
//! A merge side is a plain string for text or `{"bytes_b64": ...}`. The form
//! used for every entry is remembered so saving a loaded file reproduces it.
//! `merges` and `pretokenizer` are optional.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{invalid, Merge, PretokenizeOptions, TokenId, VocabError, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;

/// How a byte sequence is spelled in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteForm {
    Text,
    Base64,
}

impl ByteForm {
    fn preferred(bytes: &[u8]) -> Self {
        if std::str::from_utf8(bytes).is_ok() {
            ByteForm::Text
        } else {
            ByteForm::Base64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Forms {
    tokens: Vec<ByteForm>,
    merges: Vec<(ByteForm, ByteForm)>,
}

impl Forms {
    pub(crate) fn canonical(tokens: &[Vec<u8>], merges: Option<&[Merge]>) -> Self {
        Self {
            tokens: tokens.iter().map(|t| ByteForm::preferred(t)).collect(),
            merges: merges
                .unwrap_or_default()
                .iter()
                .map(|m| (ByteForm::preferred(&m.left), ByteForm::preferred(&m.right)))
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabFile {
    version: u32,
    tokens: Vec<TokenEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merges: Option<Vec<[MergeSide; 2]>>,
    #[serde(default)]
    specials: Vec<TokenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pretokenizer: Option<PretokenizeOptions>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenEntry {
    id: TokenId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bytes_b64: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MergeSide {
    Text(String),
    Bytes { bytes_b64: String },
}

fn spell(bytes: &[u8], form: ByteForm) -> (Option<String>, Option<String>) {
    match (form, std::str::from_utf8(bytes)) {
        (ByteForm::Text, Ok(s)) => (Some(s.to_owned()), None),
        _ => (None, Some(B64.encode(bytes))),
    }
}

fn unb64(field: String, s: &str) -> Result<Vec<u8>, VocabError> {
    B64.decode(s)
        .map_err(|e| invalid(field, format!("invalid base64: {e}")))
}

impl Vocabulary {
    pub fn from_json_str(json: &str) -> Result<Self, VocabError> {
        let file: VocabFile = serde_json::from_str(json).map_err(|e| VocabError::Format {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.version != FORMAT_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", file.version),
            ));
        }

        let n = file.tokens.len();
        let mut slots: Vec<Option<(Vec<u8>, ByteForm)>> = vec![None; n];
        for (pos, entry) in file.tokens.into_iter().enumerate() {
            let field = format!("tokens[{pos}]");
            let id = entry.id as usize;
            if id >= n {
                return Err(invalid(field, format!("id {id} is not dense in 0..{n}")));
            }
            if slots[id].is_some() {
                return Err(invalid(field, format!("id {id} appears twice")));
            }
            let decoded = match (entry.text, entry.bytes_b64) {
                (Some(t), None) => (t.into_bytes(), ByteForm::Text),
                (None, Some(b)) => (unb64(field, &b)?, ByteForm::Base64),
                _ => return Err(invalid(field, "exactly one of `text` or `bytes_b64` is required")),
            };
            slots[id] = Some(decoded);
        }
        let (tokens, token_forms): (Vec<_>, Vec<_>) = slots.into_iter().map(Option::unwrap).unzip();

        let mut merge_forms = Vec::new();
        let merges = match file.merges {
            None => None,
            Some(raw) => {
                let mut merges = Vec::with_capacity(raw.len());
                for (rank, [l, r]) in raw.into_iter().enumerate() {
                    let side = |s: MergeSide, which: &str| match s {
                        MergeSide::Text(t) => Ok((t.into_bytes(), ByteForm::Text)),
                        MergeSide::Bytes { bytes_b64 } => {
                            unb64(format!("merges[{rank}].{which}"), &bytes_b64).map(|b| (b, ByteForm::Base64))
                        }
                    };
                    let (left, lf) = side(l, "left")?;
                    let (right, rf) = side(r, "right")?;
                    merges.push(Merge { left, right });
                    merge_forms.push((lf, rf));
                }
                Some(merges)
            }
        };

        let specials: BTreeSet<TokenId> = file.specials.iter().copied().collect();
        if specials.len() != file.specials.len() {
            return Err(invalid("specials", "duplicate special id"));
        }
        let forms = Forms {
            tokens: token_forms,
            merges: merge_forms,
        };
        Vocabulary::with_forms(tokens, merges, specials, file.pretokenizer, forms)
    }

    pub fn to_json_string(&self) -> String {
        let forms = self.forms();
        let tokens = self
            .tokens()
            .iter()
            .enumerate()
            .map(|(id, bytes)| {
                let form = forms.tokens.get(id).copied().unwrap_or(ByteForm::preferred(bytes));
                let (text, bytes_b64) = spell(bytes, form);
                TokenEntry {
                    id: id as TokenId,
                    text,
                    bytes_b64,
                }
            })
            .collect();
        let merges = self.merges().map(|merges| {
            merges
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let (lf, rf) = forms
                        .merges
                        .get(i)
                        .copied()
                        .unwrap_or((ByteForm::preferred(&m.left), ByteForm::preferred(&m.right)));
                    let side = |bytes: &[u8], form| match spell(bytes, form) {
                        (Some(text), _) => MergeSide::Text(text),
                        (None, Some(bytes_b64)) => MergeSide::Bytes { bytes_b64 },
                        (None, None) => unreachable!(),
                    };
                    [side(&m.left, lf), side(&m.right, rf)]
                })
                .collect()
        });
        let file = VocabFile {
            version: FORMAT_VERSION,
            tokens,
            merges,
            specials: self.specials().iter().copied().collect(),
            pretokenizer: self.pretokenizer(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), VocabError> {
        let mut json = self.to_json_string();
        json.push('\n');
        fs::write(path, json)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn smallest_vocabulary() {
        let v = Vocabulary::from_json_str(
            r#"{"version":1,"tokens":[{"id":0,"text":"a"},{"id":1,"text":"b"},{"id":2,"text":"ab"}],"specials":[]}"#,
        )
        .unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.id_of(b"ab"), Some(2));
    }

    #[test]
    fn base64_token_with_partial_utf8() {
        // "4pY=" is 0xE2 0x96, the first two bytes of U+2580..U+25BF.
        let v = Vocabulary::from_json_str(
            r#"{"version":1,"tokens":[{"id":0,"text":"a"},{"id":1,"text":"b"},{"id":2,"text":"c"},
               {"id":3,"text":"d"},{"id":4,"text":"e"},{"id":5,"bytes_b64":"4pY="}],"specials":[]}"#,
        )
        .unwrap();
        assert_eq!(v.token_bytes(5).unwrap(), &[0xE2, 0x96]);
        assert!(std::str::from_utf8(v.token_bytes(5).unwrap()).is_err());
    }

    #[test]
    fn duplicate_bytes_rejected() {
        let err = Vocabulary::from_json_str(
            r#"{"version":1,"tokens":[{"id":0,"text":"x"},{"id":1,"text":"x"}],"specials":[]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, VocabError::Validation { .. }), "{err}");
    }

    #[test]
    fn non_dense_ids_rejected() {
        let err = Vocabulary::from_json_str(
            r#"{"version":1,"tokens":[{"id":0,"text":"x"},{"id":2,"text":"y"}],"specials":[]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("tokens[1]"), "{err}");
    }

    #[test]
    fn empty_token_rejected() {
        assert!(Vocabulary::from_json_str(r#"{"version":1,"tokens":[{"id":0,"text":""}],"specials":[]}"#).is_err());
    }

    #[test]
    fn malformed_json_has_position() {
        let err = Vocabulary::from_json_str("{\n  \"version\": 1,\n  \"tokens\": [\n").unwrap_err();
        match err {
            VocabError::Format { line, .. } => assert!(line >= 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn both_spellings_rejected() {
        assert!(Vocabulary::from_json_str(
            r#"{"version":1,"tokens":[{"id":0,"text":"a","bytes_b64":"YQ=="}],"specials":[]}"#
        )
        .is_err());
    }

    #[test]
    fn round_trip_preserves_spelling() {
        let src = r#"{"version":1,
            "tokens":[{"id":0,"bytes_b64":"YQ=="},{"id":1,"text":"b"},{"id":2,"text":"ab"},{"id":3,"text":"<eos>"}],
            "merges":[[{"bytes_b64":"YQ=="},"b"]],
            "specials":[3],
            "pretokenizer":{"space_prefix":true,"group_whitespace":false}}"#;
        let v = Vocabulary::from_json_str(src).unwrap();
        assert_eq!(value(&v.to_json_string()), value(src));
        assert_eq!(v.encode(b"ab").unwrap(), vec![2]);
    }
}
