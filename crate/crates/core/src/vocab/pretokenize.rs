//! Splitting text into pretokens before BPE.
//!
//! Merges never cross a pretoken boundary, which is what shapes the
//! vocabulary: with `space_prefix` a single space is glued to the front of
//! the following word or punctuation run (`" like"`), and with
//! `group_whitespace` runs of whitespace stay together so multi-space
//! tokens can form. When both are on, `"    x="` splits as
//! `"   "`, `" x"`, `"="`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretokenizeOptions {
    /// Attach one leading space to the next word or punctuation run.
    pub space_prefix: bool,
    /// Keep whitespace runs as one pretoken instead of one per byte.
    pub group_whitespace: bool,
}

impl PretokenizeOptions {
    pub const CODE: Self = Self {
        space_prefix: true,
        group_whitespace: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ByteClass {
    Word,
    Space,
    Punct,
}

pub(crate) fn class_of(b: u8) -> ByteClass {
    if b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80 {
        ByteClass::Word
    } else if b.is_ascii_whitespace() {
        ByteClass::Space
    } else {
        ByteClass::Punct
    }
}

fn run_end(text: &[u8], start: usize, class: ByteClass) -> usize {
    text[start..]
        .iter()
        .position(|&b| class_of(b) != class)
        .map_or(text.len(), |off| start + off)
}

/// Byte ranges of the pretokens of `text`, in order, covering it exactly.
pub fn pretokenize(text: &[u8], opts: PretokenizeOptions) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let class = class_of(text[i]);
        if class != ByteClass::Space {
            let end = run_end(text, i, class);
            out.push(i..end);
            i = end;
            continue;
        }
        let end = run_end(text, i, ByteClass::Space);
        let attach = opts.space_prefix && end < text.len() && text[end - 1] == b' ';
        let body_end = if attach { end - 1 } else { end };
        if body_end > i {
            if opts.group_whitespace {
                out.push(i..body_end);
            } else {
                out.extend((i..body_end).map(|k| k..k + 1));
            }
        }
        if attach {
            let next = run_end(text, end, class_of(text[end]));
            out.push(end - 1..next);
            i = next;
        } else {
            i = end;
        }
    }
    out
}
