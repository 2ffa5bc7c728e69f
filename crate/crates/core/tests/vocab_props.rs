use std::sync::OnceLock;

use proptest::collection::vec;
use proptest::prelude::*;
use tokenalign::scenarios::load_corpus;
use tokenalign::vocab::{train_tiny_bpe, PretokenizeOptions, TrainOptions};
use tokenalign::Vocabulary;

fn docs() -> &'static Vec<String> {
    static D: OnceLock<Vec<String>> = OnceLock::new();
    D.get_or_init(|| {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/code_corpus.jsonl");
        load_corpus(path).unwrap().into_iter().map(|d| d.text).collect()
    })
}

fn trained() -> &'static Vocabulary {
    static V: OnceLock<Vocabulary> = OnceLock::new();
    V.get_or_init(|| train_tiny_bpe(docs(), 500, &TrainOptions::code()).unwrap())
}

proptest! {
    #[test]
    fn bpe_encoding_is_lossless(bytes in vec(any::<u8>(), 0..200)) {
        let v = trained();
        let ids = v.encode(&bytes).unwrap();
        prop_assert_eq!(v.decode(&ids).unwrap(), bytes.clone());
        prop_assert_eq!(v.encode(&bytes).unwrap(), ids);
    }

    #[test]
    fn code_slices_are_lossless(doc in 0usize..50, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let text = docs()[doc].as_bytes();
        let (lo, hi) = ((a.min(b) * text.len() as f64) as usize, (a.max(b) * text.len() as f64) as usize);
        let v = trained();
        prop_assert_eq!(v.decode(&v.encode(&text[lo..hi]).unwrap()).unwrap(), &text[lo..hi]);
    }

    #[test]
    fn greedy_vocab_is_lossless(bytes in vec(prop::sample::select(b"ab c".to_vec()), 0..40)) {
        let v = Vocabulary::byte_level_with(["ab", "abc", " c", "  "]).unwrap();
        prop_assert_eq!(v.decode(&v.encode(&bytes).unwrap()).unwrap(), bytes);
    }
}

#[test]
fn retraining_gives_identical_files() {
    for opts in [
        TrainOptions::code(),
        TrainOptions {
            pretokenize: PretokenizeOptions::default(),
            ..TrainOptions::code()
        },
    ] {
        let a = train_tiny_bpe(docs(), 450, &opts).unwrap();
        let b = train_tiny_bpe(docs(), 450, &opts).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        assert!(a.has_all_byte_tokens());
    }
}

#[test]
fn saved_vocabulary_reloads_byte_for_byte() {
    let v = trained();
    let json = v.to_json_string();
    let back = Vocabulary::from_json_str(&json).unwrap();
    assert_eq!(back.to_json_string(), json);
    assert_eq!(back.tokens(), v.tokens());
    for d in docs().iter().take(10) {
        assert_eq!(back.encode(d.as_bytes()).unwrap(), v.encode(d.as_bytes()).unwrap());
    }
}

#[test]
fn space_prefix_forms_word_tokens() {
    let v = trained();
    for word in [" return", " in", " for"] {
        assert!(v.id_of(word.as_bytes()).is_some(), "{word:?} missing");
    }
}
