//! Subword vocabularies over raw bytes.
//!
//! A [`Vocabulary`] maps dense token ids to non-empty byte sequences. With
//! merge rules it encodes like byte-level BPE; without them it falls back to
//! greedy longest match, which keeps hand-written fixture vocabularies short.

mod bpe;
mod file;
mod pretokenize;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use thiserror::Error;

pub use bpe::{train_tiny_bpe, TrainOptions};
pub use file::ByteForm;
pub use pretokenize::{pretokenize, PretokenizeOptions};

pub type TokenId = u32;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary file is malformed at line {line}, column {column}: {message}")]
    Format {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid vocabulary field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("byte 0x{byte:02x} at offset {offset} is not covered by any token")]
    Uncoverable { offset: usize, byte: u8 },
    #[error("unknown token id {id} at position {position}")]
    UnknownId { id: TokenId, position: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("target size {target} is below the {minimum} base tokens")]
    TargetTooSmall { target: usize, minimum: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> VocabError {
    VocabError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// A BPE merge rule: `left ++ right` becomes one token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merge {
    pub left: Vec<u8>,
    pub right: Vec<u8>,
}

/// Immutable token table plus the lookups encode/decode need.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<Vec<u8>>,
    specials: BTreeSet<TokenId>,
    merges: Option<Vec<Merge>>,
    pretokenizer: Option<PretokenizeOptions>,
    forms: file::Forms,
    by_bytes: HashMap<Vec<u8>, TokenId>,
    merge_rank: HashMap<(TokenId, TokenId), (usize, TokenId)>,
    byte_tokens: [Option<TokenId>; 256],
    max_len: usize,
}

impl Vocabulary {
    /// Builds and validates a vocabulary. Token `i` gets id `i`.
    pub fn new(
        tokens: Vec<Vec<u8>>,
        merges: Option<Vec<Merge>>,
        specials: impl IntoIterator<Item = TokenId>,
        pretokenizer: Option<PretokenizeOptions>,
    ) -> Result<Self, VocabError> {
        let forms = file::Forms::canonical(&tokens, merges.as_deref());
        Self::with_forms(tokens, merges, specials.into_iter().collect(), pretokenizer, forms)
    }

    /// A vocabulary without merges, encoded by greedy longest match.
    pub fn from_tokens<I, T>(tokens: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        let tokens = tokens.into_iter().map(|t| t.as_ref().to_vec()).collect();
        Self::new(tokens, None, [], None)
    }

    /// The 256 single-byte tokens followed by `extra`, skipping any extra
    /// token that is a single byte. Handy for fixtures that must never
    /// dead-end.
    pub fn byte_level_with<I, T>(extra: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        tokens.extend(extra.into_iter().map(|t| t.as_ref().to_vec()).filter(|t| t.len() > 1));
        Self::new(tokens, None, [], None)
    }

    pub(crate) fn with_forms(
        tokens: Vec<Vec<u8>>,
        merges: Option<Vec<Merge>>,
        specials: BTreeSet<TokenId>,
        pretokenizer: Option<PretokenizeOptions>,
        forms: file::Forms,
    ) -> Result<Self, VocabError> {
        let mut by_bytes = HashMap::with_capacity(tokens.len());
        let mut byte_tokens = [None; 256];
        let mut max_len = 0;
        for &s in &specials {
            if s as usize >= tokens.len() {
                return Err(invalid("specials", format!("id {s} is out of range")));
            }
        }
        for (id, bytes) in tokens.iter().enumerate() {
            let id = id as TokenId;
            if bytes.is_empty() {
                return Err(invalid(format!("tokens[{id}]"), "token bytes are empty"));
            }
            if specials.contains(&id) {
                continue;
            }
            if let Some(prev) = by_bytes.insert(bytes.clone(), id) {
                return Err(invalid(
                    format!("tokens[{id}]"),
                    format!("byte sequence duplicates token {prev}"),
                ));
            }
            if bytes.len() == 1 {
                byte_tokens[bytes[0] as usize] = Some(id);
            }
            max_len = max_len.max(bytes.len());
        }

        let mut merge_rank = HashMap::new();
        if let Some(merges) = &merges {
            for (rank, m) in merges.iter().enumerate() {
                let field = || format!("merges[{rank}]");
                let left = *by_bytes
                    .get(&m.left)
                    .ok_or_else(|| invalid(field(), "left side is not a token"))?;
                let right = *by_bytes
                    .get(&m.right)
                    .ok_or_else(|| invalid(field(), "right side is not a token"))?;
                let joined = [m.left.as_slice(), m.right.as_slice()].concat();
                let merged = *by_bytes
                    .get(&joined)
                    .ok_or_else(|| invalid(field(), "merged bytes are not a token"))?;
                merge_rank.entry((left, right)).or_insert((rank, merged));
            }
        }

        Ok(Self {
            tokens,
            specials,
            merges,
            pretokenizer,
            forms,
            by_bytes,
            merge_rank,
            byte_tokens,
            max_len,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_bytes(&self, id: TokenId) -> Option<&[u8]> {
        self.tokens.get(id as usize).map(Vec::as_slice)
    }

    /// All token byte sequences indexed by id.
    pub fn tokens(&self) -> &[Vec<u8>] {
        &self.tokens
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.specials.contains(&id)
    }

    pub fn specials(&self) -> &BTreeSet<TokenId> {
        &self.specials
    }

    pub fn merges(&self) -> Option<&[Merge]> {
        self.merges.as_deref()
    }

    pub fn pretokenizer(&self) -> Option<PretokenizeOptions> {
        self.pretokenizer
    }

    /// Id of the non-special token with exactly these bytes.
    pub fn id_of(&self, bytes: &[u8]) -> Option<TokenId> {
        self.by_bytes.get(bytes).copied()
    }

    pub fn byte_token(&self, byte: u8) -> Option<TokenId> {
        self.byte_tokens[byte as usize]
    }

    pub fn has_all_byte_tokens(&self) -> bool {
        self.byte_tokens.iter().all(Option::is_some)
    }

    pub fn max_token_len(&self) -> usize {
        self.max_len
    }

    /// Ids of the non-special tokens, ascending.
    pub fn regular_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.tokens.len() as TokenId).filter(|id| !self.specials.contains(id))
    }

    pub(crate) fn forms(&self) -> &file::Forms {
        &self.forms
    }

    /// Canonical tokenization of `text`.
    pub fn encode(&self, text: &[u8]) -> Result<Vec<TokenId>, VocabError> {
        let mut ids = Vec::with_capacity(text.len() / 2 + 1);
        match self.pretokenizer {
            Some(opts) => {
                for range in pretokenize(text, opts) {
                    let offset = range.start;
                    self.encode_chunk(&text[range], offset, &mut ids)?;
                }
            }
            None => self.encode_chunk(text, 0, &mut ids)?,
        }
        Ok(ids)
    }

    fn encode_chunk(&self, chunk: &[u8], offset: usize, out: &mut Vec<TokenId>) -> Result<(), VocabError> {
        if self.merges.is_some() {
            self.bpe_chunk(chunk, offset, out)
        } else {
            self.greedy_chunk(chunk, offset, out)
        }
    }

    fn greedy_chunk(&self, chunk: &[u8], offset: usize, out: &mut Vec<TokenId>) -> Result<(), VocabError> {
        let mut i = 0;
        while i < chunk.len() {
            let longest = self.max_len.min(chunk.len() - i);
            let hit = (1..=longest)
                .rev()
                .find_map(|len| self.by_bytes.get(&chunk[i..i + len]).map(|&id| (id, len)));
            let (id, len) = hit.ok_or(VocabError::Uncoverable {
                offset: offset + i,
                byte: chunk[i],
            })?;
            out.push(id);
            i += len;
        }
        Ok(())
    }

    /// Lowest-rank merge first, leftmost on ties, until nothing applies.
    fn bpe_chunk(&self, chunk: &[u8], offset: usize, out: &mut Vec<TokenId>) -> Result<(), VocabError> {
        const GONE: usize = usize::MAX;
        let mut ids = Vec::with_capacity(chunk.len());
        for (i, &b) in chunk.iter().enumerate() {
            ids.push(self.byte_tokens[b as usize].ok_or(VocabError::Uncoverable {
                offset: offset + i,
                byte: b,
            })?);
        }
        let n = ids.len();
        // Doubly linked list over symbol slots; a merged slot keeps the left id.
        let mut next: Vec<usize> = (1..=n).collect();
        let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
        let mut alive = vec![true; n];
        let mut heap = BinaryHeap::new();
        let push = |heap: &mut BinaryHeap<_>, ids: &[TokenId], left: usize, right: usize| {
            if let Some(&(rank, _)) = self.merge_rank.get(&(ids[left], ids[right])) {
                heap.push(Reverse((rank, left, ids[left], ids[right])));
            }
        };
        for i in 1..n {
            push(&mut heap, &ids, i - 1, i);
        }
        while let Some(Reverse((rank, left, lid, rid))) = heap.pop() {
            if !alive[left] || ids[left] != lid {
                continue;
            }
            let right = next[left];
            if right >= n || !alive[right] || ids[right] != rid {
                continue;
            }
            let (_, merged) = self.merge_rank[&(lid, rid)];
            debug_assert_eq!(self.merge_rank[&(lid, rid)].0, rank);
            ids[left] = merged;
            alive[right] = false;
            next[left] = next[right];
            if next[left] < n {
                prev[next[left]] = left;
            }
            next[right] = GONE;
            if prev[left] != GONE && prev[left] < n {
                push(&mut heap, &ids, prev[left], left);
            }
            if next[left] < n {
                push(&mut heap, &ids, left, next[left]);
            }
        }
        let mut i = 0;
        while i < n {
            out.push(ids[i]);
            i = next[i];
        }
        Ok(())
    }

    /// Concatenated bytes of `ids`.
    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<u8>, VocabError> {
        let mut out = Vec::new();
        for (position, &id) in ids.iter().enumerate() {
            let bytes = self.token_bytes(id).ok_or(VocabError::UnknownId { id, position })?;
            out.extend_from_slice(bytes);
        }
        Ok(out)
    }
}
