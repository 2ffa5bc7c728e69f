//! Byte trie over the vocabulary and the compatibility masks it produces.
//!
//! A token is *compatible* with an alignment prefix `P` when its bytes start
//! with `P` or `P` starts with its bytes. [`ByteTrie::matching_tokens`]
//! answers that in `|P|` node hops: it collects the tokens ending on the
//! walked path (prefixes of `P`) and then the whole subtree below `P`
//! (tokens extending `P`).
//!
//! Regular tokens are laid out in lexicographic byte order, so every node's
//! subtree is a contiguous range of that order. The range is the
//! precomputed subtree set; no subtree walk happens at query time.

use std::num::NonZeroUsize;
use std::sync::Arc;

use lru::LruCache;
use thiserror::Error;

use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Error)]
pub enum TrieError {
    #[error("vocabulary has no regular tokens; alignment could never match")]
    NoRegularTokens,
    #[error("trie image is corrupt: {0}")]
    Corrupt(String),
    #[error("trie image has version {found}, expected {expected}")]
    Version { found: u16, expected: u16 },
}

/// Fixed-size bitset over token ids.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TokenMask {
    words: Vec<u64>,
    len: usize,
}

impl std::fmt::Debug for TokenMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TokenMask")
            .field("len", &self.len)
            .field("ones", &self.iter_ones().collect::<Vec<_>>())
            .finish()
    }
}

impl TokenMask {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_ids(len: usize, ids: impl IntoIterator<Item = TokenId>) -> Self {
        let mut mask = Self::empty(len);
        for id in ids {
            mask.insert(id);
        }
        mask
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn insert(&mut self, id: TokenId) {
        let i = id as usize;
        assert!(i < self.len, "token {id} outside mask of {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, id: TokenId) -> bool {
        let i = id as usize;
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    /// Number of set bits.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros();
                bits &= bits - 1;
                Some((wi * 64) as TokenId + tz)
            })
        })
    }

    pub fn is_subset(&self, other: &TokenMask) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

/// Two-way prefix test used everywhere alignment checks compatibility.
pub fn is_compatible(token: &[u8], prefix: &[u8]) -> bool {
    token.starts_with(prefix) || prefix.starts_with(token)
}

/// Linear scan over the vocabulary: the naive lookup the trie replaces.
pub fn scan_matching_tokens(vocab: &Vocabulary, prefix: &[u8]) -> TokenMask {
    let mut mask = TokenMask::empty(vocab.len());
    for (id, bytes) in vocab.tokens().iter().enumerate() {
        let id = id as TokenId;
        if !vocab.is_special(id) && is_compatible(bytes, prefix) {
            mask.insert(id);
        }
    }
    mask
}

const NO_TOKEN: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Node {
    /// Token whose bytes end exactly here, or `NO_TOKEN`.
    exact: u32,
    /// Subtree tokens are `order[lo..hi]`.
    lo: u32,
    hi: u32,
    /// Children are `edge_bytes/edge_targets[edge_start..edge_start + edge_count]`,
    /// sorted by byte.
    edge_start: u32,
    edge_count: u32,
}

/// Immutable prefix tree over all regular token byte sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteTrie {
    nodes: Vec<Node>,
    edge_bytes: Vec<u8>,
    edge_targets: Vec<u32>,
    order: Vec<TokenId>,
    vocab_size: usize,
}

impl ByteTrie {
    /// Builds the trie for every non-special token of `vocab`.
    pub fn build(vocab: &Vocabulary) -> Result<Self, TrieError> {
        let tokens = vocab.tokens();
        let mut order: Vec<TokenId> = vocab.regular_ids().collect();
        if order.is_empty() {
            return Err(TrieError::NoRegularTokens);
        }
        order.sort_by(|&a, &b| tokens[a as usize].cmp(&tokens[b as usize]));

        let mut trie = Self {
            nodes: Vec::new(),
            edge_bytes: Vec::new(),
            edge_targets: Vec::new(),
            order,
            vocab_size: vocab.len(),
        };
        let n = trie.order.len();
        trie.build_node(tokens, 0, 0, n);
        debug_assert!(trie.verify(vocab).is_ok());
        Ok(trie)
    }

    /// Creates the node for tokens `order[lo..hi]`, which share their first
    /// `depth` bytes, and returns its index.
    fn build_node(&mut self, tokens: &[Vec<u8>], depth: usize, lo: usize, hi: usize) -> u32 {
        let index = self.nodes.len() as u32;
        self.nodes.push(Node {
            exact: NO_TOKEN,
            lo: lo as u32,
            hi: hi as u32,
            edge_start: 0,
            edge_count: 0,
        });
        let mut start = lo;
        if start < hi && tokens[self.order[start] as usize].len() == depth {
            self.nodes[index as usize].exact = self.order[start];
            start += 1;
        }
        let mut groups = Vec::new();
        let mut i = start;
        while i < hi {
            let byte = tokens[self.order[i] as usize][depth];
            let mut j = i + 1;
            while j < hi && tokens[self.order[j] as usize][depth] == byte {
                j += 1;
            }
            groups.push((byte, i, j));
            i = j;
        }
        let edge_start = self.edge_bytes.len();
        self.edge_bytes.extend(groups.iter().map(|g| g.0));
        self.edge_targets.extend(std::iter::repeat_n(0, groups.len()));
        self.nodes[index as usize].edge_start = edge_start as u32;
        self.nodes[index as usize].edge_count = groups.len() as u32;
        for (k, (_, glo, ghi)) in groups.into_iter().enumerate() {
            let child = self.build_node(tokens, depth + 1, glo, ghi);
            self.edge_targets[edge_start + k] = child;
        }
        index
    }

    fn child(&self, node: &Node, byte: u8) -> Option<&Node> {
        let start = node.edge_start as usize;
        let bytes = &self.edge_bytes[start..start + node.edge_count as usize];
        bytes
            .binary_search(&byte)
            .ok()
            .map(|k| &self.nodes[self.edge_targets[start + k] as usize])
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of regular tokens stored.
    pub fn token_count(&self) -> usize {
        self.order.len()
    }

    /// Tokens compatible with `prefix`. The empty prefix matches every
    /// regular token; an empty result is legal.
    pub fn matching_tokens(&self, prefix: &[u8]) -> TokenMask {
        let mut mask = TokenMask::empty(self.vocab_size);
        let mut node = &self.nodes[0];
        for &b in prefix {
            if node.exact != NO_TOKEN {
                mask.insert(node.exact);
            }
            match self.child(node, b) {
                Some(next) => node = next,
                None => return mask,
            }
        }
        for &id in &self.order[node.lo as usize..node.hi as usize] {
            mask.insert(id);
        }
        mask
    }

    /// Checks the structural invariants against `vocab`: every regular token
    /// is reachable along its own bytes and ends at a node naming it, and
    /// each node's subtree range is exactly its own token plus its
    /// children's ranges.
    pub fn verify(&self, vocab: &Vocabulary) -> Result<(), String> {
        if self.vocab_size != vocab.len() {
            return Err("vocabulary size differs".into());
        }
        for id in vocab.regular_ids() {
            let mut node = &self.nodes[0];
            for &b in vocab.token_bytes(id).unwrap() {
                node = self
                    .child(node, b)
                    .ok_or_else(|| format!("token {id} is not reachable"))?;
            }
            if node.exact != id {
                return Err(format!("token {id} does not end at its node"));
            }
        }
        let exact_count = self.nodes.iter().filter(|n| n.exact != NO_TOKEN).count();
        if exact_count != vocab.regular_ids().count() || self.order.len() != exact_count {
            return Err("trie holds tokens outside the regular vocabulary".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let mut cursor = node.lo + u32::from(node.exact != NO_TOKEN);
            if node.exact != NO_TOKEN && self.order[node.lo as usize] != node.exact {
                return Err(format!("node {i}: own token is not first in its range"));
            }
            let start = node.edge_start as usize;
            for &target in &self.edge_targets[start..start + node.edge_count as usize] {
                let child = &self.nodes[target as usize];
                if child.lo != cursor {
                    return Err(format!("node {i}: child ranges are not contiguous"));
                }
                cursor = child.hi;
            }
            if cursor != node.hi {
                return Err(format!("node {i}: range is not the union of its children"));
            }
        }
        Ok(())
    }
}

/// Binary trie images, all integers little-endian:
///
/// | offset | size | field                        |
/// |--------|------|------------------------------|
/// | 0      | 4    | magic `b"BTRI"`              |
/// | 4      | 2    | format version (1)           |
/// | 6      | 2    | reserved, zero               |
/// | 8      | 4    | vocabulary size              |
/// | 12     | 4    | node count `N`               |
/// | 16     | 4    | edge count `E`               |
/// | 20     | 4    | regular token count `T`      |
///
/// followed by `N` nodes of five `u32` (exact id or `u32::MAX`, range lo,
/// range hi, first edge, edge count), `E` edge bytes, `E` `u32` edge
/// targets and `T` `u32` token ids in lexicographic order.
impl ByteTrie {
    pub const MAGIC: [u8; 4] = *b"BTRI";
    pub const FORMAT_VERSION: u16 = 1;

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.nodes.len() * 20 + self.edge_bytes.len() * 5 + self.order.len() * 4);
        out.extend_from_slice(&Self::MAGIC);
        out.extend_from_slice(&Self::FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        for v in [
            self.vocab_size,
            self.nodes.len(),
            self.edge_bytes.len(),
            self.order.len(),
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for n in &self.nodes {
            for v in [n.exact, n.lo, n.hi, n.edge_start, n.edge_count] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.edge_bytes);
        for v in self.edge_targets.iter().chain(&self.order) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, TrieError> {
        let corrupt = |m: &str| TrieError::Corrupt(m.to_owned());
        let mut r = Reader { data, pos: 0 };
        if r.take(4).ok_or_else(|| corrupt("truncated header"))? != Self::MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u16().ok_or_else(|| corrupt("truncated header"))?;
        if version != Self::FORMAT_VERSION {
            return Err(TrieError::Version {
                found: version,
                expected: Self::FORMAT_VERSION,
            });
        }
        r.u16().ok_or_else(|| corrupt("truncated header"))?;
        let mut header = [0usize; 4];
        for h in &mut header {
            *h = r.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        }
        let [vocab_size, node_count, edge_count, token_count] = header;
        let body = node_count * 20 + edge_count * 5 + token_count * 4;
        if data.len() != 24 + body {
            return Err(corrupt("length does not match header"));
        }
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let mut f = [0u32; 5];
            for v in &mut f {
                *v = r.u32().unwrap();
            }
            nodes.push(Node {
                exact: f[0],
                lo: f[1],
                hi: f[2],
                edge_start: f[3],
                edge_count: f[4],
            });
        }
        let edge_bytes = r.take(edge_count).unwrap().to_vec();
        let edge_targets: Vec<u32> = (0..edge_count).map(|_| r.u32().unwrap()).collect();
        let order: Vec<u32> = (0..token_count).map(|_| r.u32().unwrap()).collect();

        if nodes.is_empty() || order.is_empty() {
            return Err(corrupt("empty trie"));
        }
        let in_vocab = |id: u32| (id as usize) < vocab_size;
        for n in &nodes {
            let edges_ok = (n.edge_start as usize)
                .checked_add(n.edge_count as usize)
                .is_some_and(|end| end <= edge_count);
            if (n.exact != NO_TOKEN && !in_vocab(n.exact)) || n.lo > n.hi || n.hi as usize > token_count || !edges_ok {
                return Err(corrupt("node fields out of range"));
            }
        }
        if edge_targets.iter().any(|&t| t == 0 || t as usize >= node_count) || !order.iter().all(|&id| in_vocab(id)) {
            return Err(corrupt("edge target or token id out of range"));
        }
        Ok(Self {
            nodes,
            edge_bytes,
            edge_targets,
            order,
            vocab_size,
        })
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.data.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }
    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Hit/miss counters of a [`MaskCache`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

/// Bounded LRU map from alignment prefix to compatibility mask.
///
/// Cached masks are shared through `Arc`, so a hit costs one hash lookup.
/// Capacity zero disables caching entirely. Otherwise the single-space
/// prefix is inserted at construction. Needs `&mut` access; share it
/// between sessions behind a mutex.
pub struct MaskCache {
    entries: Option<LruCache<Vec<u8>, Arc<TokenMask>>>,
    vocab_size: usize,
    stats: CacheStats,
}

impl std::fmt::Debug for MaskCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaskCache")
            .field("capacity", &self.capacity())
            .field("len", &self.len())
            .field("stats", &self.stats)
            .finish()
    }
}

impl MaskCache {
    pub const DEFAULT_CAPACITY: usize = 1024;
    pub const SEEDED_PREFIXES: [&'static [u8]; 1] = [b" "];

    pub fn new(trie: &ByteTrie, capacity: usize) -> Self {
        let mut entries = NonZeroUsize::new(capacity).map(LruCache::new);
        if let Some(entries) = entries.as_mut() {
            for prefix in Self::SEEDED_PREFIXES {
                entries.put(prefix.to_vec(), Arc::new(trie.matching_tokens(prefix)));
            }
        }
        Self {
            entries,
            vocab_size: trie.vocab_size(),
            stats: CacheStats::default(),
        }
    }

    pub fn with_default_capacity(trie: &ByteTrie) -> Self {
        Self::new(trie, Self::DEFAULT_CAPACITY)
    }

    pub fn capacity(&self) -> usize {
        self.entries.as_ref().map_or(0, |e| e.cap().get())
    }

    pub fn len(&self) -> usize {
        self.entries.as_ref().map_or(0, LruCache::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    /// Same bits as `trie.matching_tokens(prefix)`, memoized.
    pub fn cached_mask(&mut self, trie: &ByteTrie, prefix: &[u8]) -> Arc<TokenMask> {
        debug_assert_eq!(trie.vocab_size(), self.vocab_size, "cache built for another trie");
        if let Some(entries) = self.entries.as_mut() {
            if let Some(mask) = entries.get(prefix) {
                self.stats.hits += 1;
                return Arc::clone(mask);
            }
        }
        self.stats.misses += 1;
        let mask = Arc::new(trie.matching_tokens(prefix));
        if let Some(entries) = self.entries.as_mut() {
            entries.put(prefix.to_vec(), Arc::clone(&mask));
        }
        mask
    }
}
