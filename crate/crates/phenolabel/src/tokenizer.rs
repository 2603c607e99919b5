//! Word-level vocabulary and fixed-length token-id encoding.
//!
//! Text is lowercased and split into alphanumeric runs; every other
//! non-whitespace character becomes its own single-character token. A
//! [`Vocabulary`] maps tokens to dense ids with four reserved slots, and
//! [`tokenize`] renders text as `CLS + body + SEP` with head truncation and
//! optional padding to a fixed length.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;

/// Reserved token names, indexed by id. Brackets cannot occur inside real
/// tokens (they split into single characters), so these never collide.
pub const RESERVED: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// Immutable token→id mapping with dense ids and reserved slots 0..=3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, u32>,
    min_frequency: usize,
}

/// Serialized form: plain token→id map plus the build threshold.
#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    min_frequency: usize,
    tokens: BTreeMap<String, u32>,
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> VocabularyRepr {
        VocabularyRepr {
            min_frequency: v.min_frequency,
            tokens: v.token_to_id,
        }
    }
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = String;

    fn try_from(repr: VocabularyRepr) -> Result<Vocabulary, String> {
        let n = repr.tokens.len();
        let mut seen = vec![false; n];
        for (token, &id) in &repr.tokens {
            let idx = id as usize;
            if idx >= n {
                return Err(format!("token {token:?} has id {id}, out of range for size {n}"));
            }
            if seen[idx] {
                return Err(format!("id {id} assigned to more than one token"));
            }
            seen[idx] = true;
        }
        for (id, name) in RESERVED.iter().enumerate() {
            if repr.tokens.get(*name) != Some(&(id as u32)) {
                return Err(format!("reserved token {name} must have id {id}"));
            }
        }
        Ok(Vocabulary {
            token_to_id: repr.tokens,
            min_frequency: repr.min_frequency,
        })
    }
}

impl Vocabulary {
    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Number of ids, reserved tokens included.
    pub fn size(&self) -> usize {
        self.token_to_id.len()
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    /// Tokens in id order, reserved first.
    pub fn tokens_in_id_order(&self) -> Vec<&str> {
        let mut out = vec![""; self.token_to_id.len()];
        for (token, &id) in &self.token_to_id {
            out[id as usize] = token.as_str();
        }
        out
    }
}

/// Lowercase and split `text` into word-level tokens: maximal alphanumeric
/// runs, plus one token per remaining non-whitespace character.
pub fn word_tokens(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut run = String::new();
    for ch in lower.chars() {
        if ch.is_alphanumeric() {
            run.push(ch);
        } else {
            if !run.is_empty() {
                tokens.push(std::mem::take(&mut run));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !run.is_empty() {
        tokens.push(run);
    }
    tokens
}

/// Build a vocabulary over every token occurring at least `min_frequency`
/// times in the corpus. Ids are dense: reserved tokens take 0..=3, the rest
/// follow by descending frequency, ties broken lexicographically.
pub fn build_vocab(corpus: &Corpus, min_frequency: usize) -> Vocabulary {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for doc in corpus.iter() {
        for token in word_tokens(&doc.text) {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_frequency)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut token_to_id = BTreeMap::new();
    for (id, name) in RESERVED.iter().enumerate() {
        token_to_id.insert(name.to_string(), id as u32);
    }
    for (i, (token, _)) in kept.into_iter().enumerate() {
        token_to_id.insert(token, (RESERVED.len() + i) as u32);
    }
    Vocabulary {
        token_to_id,
        min_frequency,
    }
}

/// A tokenized document: `CLS + body + SEP`, optionally padded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// True for real tokens, false for padding; non-increasing.
    pub mask: Vec<bool>,
    /// Whether head truncation dropped body tokens.
    pub truncated: bool,
}

impl TokenSequence {
    /// Number of real (non-padding) positions.
    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Encode `text` against `vocab`. The body keeps at most `max_len - 2`
/// tokens from the front; unknown tokens map to UNK. With `pad` the output
/// length is exactly `max_len`, otherwise `body + 2`.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize, pad: bool) -> TokenSequence {
    assert!(max_len >= 2, "max_len must leave room for CLS and SEP");
    let words = word_tokens(text);
    let cap = max_len - 2;
    let truncated = words.len() > cap;
    let body = &words[..words.len().min(cap)];

    let mut ids = Vec::with_capacity(if pad { max_len } else { body.len() + 2 });
    ids.push(CLS);
    for word in body {
        ids.push(vocab.id_of(word).unwrap_or(UNK));
    }
    ids.push(SEP);
    let valid = ids.len();
    let mut mask = vec![true; valid];
    if pad {
        ids.resize(max_len, PAD);
        mask.resize(max_len, false);
    }
    TokenSequence {
        ids,
        mask,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document};
    use crate::label::LabelSet;
    use proptest::prelude::*;

    fn corpus_of(texts: &[&str]) -> Corpus {
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document {
                id: format!("d{i}"),
                text: t.to_string(),
                gold: LabelSet::EMPTY,
            })
            .collect();
        Corpus::new(docs).unwrap()
    }

    #[test]
    fn splits_words_and_punctuation() {
        assert_eq!(word_tokens("Denies SI."), ["denies", "si", "."]);
        assert_eq!(
            word_tokens("self-harm without intent"),
            ["self", "-", "harm", "without", "intent"]
        );
        assert_eq!(word_tokens(""), Vec::<String>::new());
    }

    #[test]
    fn tiny_corpus_vocab_is_exhaustive() {
        let vocab = build_vocab(&corpus_of(&["Denies SI."]), 1);
        assert_eq!(vocab.size(), RESERVED.len() + 3);
        for token in ["denies", "si", "."] {
            assert!(vocab.id_of(token).is_some(), "missing {token}");
        }
        assert_eq!(vocab.id_of("[PAD]"), Some(PAD));
        assert_eq!(vocab.id_of("[SEP]"), Some(SEP));
    }

    #[test]
    fn threshold_above_all_counts_leaves_reserved_only() {
        let vocab = build_vocab(&corpus_of(&["one two three"]), 5);
        assert_eq!(vocab.size(), RESERVED.len());
    }

    #[test]
    fn threshold_keeps_shared_tokens_only() {
        let vocab = build_vocab(
            &corpus_of(&["suicide mention alpha", "suicide note beta"]),
            2,
        );
        assert!(vocab.id_of("suicide").is_some());
        for singleton in ["mention", "alpha", "note", "beta"] {
            assert!(vocab.id_of(singleton).is_none(), "{singleton} should be cut");
        }
    }

    #[test]
    fn ids_are_dense_and_injective() {
        let vocab = build_vocab(&corpus_of(&["a b c a b a"]), 1);
        let mut ids: Vec<u32> = (0..vocab.size() as u32).collect();
        let mut actual: Vec<u32> = vocab
            .tokens_in_id_order()
            .iter()
            .map(|t| vocab.id_of(t).unwrap())
            .collect();
        actual.sort_unstable();
        ids.sort_unstable();
        assert_eq!(actual, ids);
        // "a" occurs most often, so it gets the first open id.
        assert_eq!(vocab.id_of("a"), Some(4));
    }

    #[test]
    fn empty_text_is_cls_sep() {
        let vocab = build_vocab(&corpus_of(&["x"]), 1);
        let seq = tokenize("", &vocab, 512, false);
        assert_eq!(seq.ids, vec![CLS, SEP]);
        assert!(!seq.truncated);
        assert_eq!(seq.valid_len(), 2);
    }

    #[test]
    fn long_text_keeps_head_and_sets_truncated() {
        let text = (0..600).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let corpus = corpus_of(&[text.as_str()]);
        let vocab = build_vocab(&corpus, 1);
        let seq = tokenize(&text, &vocab, 512, false);
        assert!(seq.truncated);
        assert_eq!(seq.ids.len(), 512);
        assert_eq!(seq.ids[0], CLS);
        assert_eq!(seq.ids[511], SEP);
        assert_eq!(seq.ids[1], vocab.id_of("w0").unwrap());
        assert_eq!(seq.ids[510], vocab.id_of("w509").unwrap());
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let vocab = build_vocab(&corpus_of(&["si only"]), 1);
        let seq = tokenize("denies si", &vocab, 16, false);
        assert_eq!(seq.ids, vec![CLS, UNK, vocab.id_of("si").unwrap(), SEP]);
    }

    #[test]
    fn padding_fills_to_max_len() {
        let vocab = build_vocab(&corpus_of(&["a b"]), 1);
        let seq = tokenize("a b", &vocab, 8, true);
        assert_eq!(seq.ids.len(), 8);
        assert_eq!(seq.mask, vec![true, true, true, true, false, false, false, false]);
        for (i, &m) in seq.mask.iter().enumerate() {
            if !m {
                assert_eq!(seq.ids[i], PAD);
            }
        }
        assert_eq!(seq.valid_len(), 4);
    }

    #[test]
    fn vocab_serde_round_trip() {
        let vocab = build_vocab(&corpus_of(&["denies si today ."]), 1);
        let json = serde_json::to_string(&vocab).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vocab);
    }

    #[test]
    fn vocab_deserialization_rejects_sparse_ids() {
        let json = r#"{"min_frequency":1,"tokens":{"[PAD]":0,"[UNK]":1,"[CLS]":2,"[SEP]":3,"si":9}}"#;
        assert!(serde_json::from_str::<Vocabulary>(json).is_err());
        let json = r#"{"min_frequency":1,"tokens":{"[PAD]":0,"[UNK]":1,"[CLS]":2,"[SEP]":4,"si":3}}"#;
        assert!(serde_json::from_str::<Vocabulary>(json).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tokenize_invariants(text in ".{0,200}", max_len in 2usize..64, pad in any::<bool>()) {
            let vocab = build_vocab(&corpus_of(&["seed text ."]), 1);
            let seq = tokenize(&text, &vocab, max_len, pad);
            let again = tokenize(&text, &vocab, max_len, pad);
            prop_assert_eq!(&seq, &again);
            if pad {
                prop_assert_eq!(seq.ids.len(), max_len);
            } else {
                prop_assert!(seq.ids.len() <= max_len);
            }
            prop_assert_eq!(seq.ids.len(), seq.mask.len());
            prop_assert_eq!(seq.ids[0], CLS);
            let valid = seq.valid_len();
            prop_assert!(valid >= 2);
            prop_assert_eq!(seq.ids[valid - 1], SEP);
            for i in 1..seq.mask.len() {
                prop_assert!(seq.mask[i] <= seq.mask[i - 1]);
            }
            for (i, &m) in seq.mask.iter().enumerate() {
                if !m {
                    prop_assert_eq!(seq.ids[i], PAD);
                }
            }
        }
    }
}
