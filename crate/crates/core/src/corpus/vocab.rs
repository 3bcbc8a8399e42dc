use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ContextInstance;
use crate::error::{bail, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Word ↔ index map with the four reserved entries at indices 0..=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Builds from non-reserved words in index order (index = position + 4).
    pub fn from_words<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Result<Self> {
        let mut vocab = Vocabulary {
            words: RESERVED.iter().map(|w| w.to_string()).collect(),
            index: RESERVED.iter().enumerate().map(|(i, w)| (w.to_string(), i)).collect(),
        };
        for w in words {
            let w = w.as_ref();
            if w.is_empty() || w.contains(char::is_whitespace) {
                bail!(Config, "vocabulary entry {:?} is empty or contains whitespace", w);
            }
            if vocab.index.contains_key(w) {
                bail!(Config, "vocabulary entry `{w}` is duplicated or reserved");
            }
            vocab.index.insert(w.to_string(), vocab.words.len());
            vocab.words.push(w.to_string());
        }
        Ok(vocab)
    }

    /// Collects every token of `instances`, most frequent first (ties in
    /// lexicographic order), keeping words seen at least `min_count` times
    /// and at most `max_words` of them.
    pub fn build(instances: &[ContextInstance], min_count: usize, max_words: Option<usize>) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for inst in instances {
            let tokens = inst.turns.iter().flat_map(|t| &t.tokens).chain(&inst.response);
            for tok in tokens {
                if !RESERVED.contains(&tok.as_str()) {
                    *counts.entry(tok.as_str()).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count.max(1)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        if let Some(max) = max_words {
            ranked.truncate(max);
        }
        Vocabulary::from_words(ranked.into_iter().map(|(w, _)| w)).expect("tokens are unique and nonempty")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Non-reserved words in index order (the vocabulary file body).
    pub fn words(&self) -> &[String] {
        &self.words[RESERVED.len()..]
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn encode(&self, word: &str) -> usize {
        self.get(word).unwrap_or(UNK)
    }

    pub fn decode(&self, index: usize) -> &str {
        self.words.get(index).map_or(RESERVED[UNK], String::as_str)
    }
}
