//! Text preprocessing: tokenization, vocabulary construction and
//! fixed-length index encoding.
//!
//! Index 0 is reserved for padding and index 1 for out-of-vocabulary
//! tokens. Sequences are encoded to exactly `max_len` indices: longer
//! inputs keep their last `max_len` tokens, shorter ones are pre-padded
//! with zeros so the real content sits at the end of the sequence, next
//! to the recurrent read-out.

use std::collections::HashMap;

/// Reserved padding index.
pub const PAD_INDEX: usize = 0;
/// Reserved out-of-vocabulary index.
pub const OOV_INDEX: usize = 1;

/// Token to index mapping with reserved PAD and OOV slots.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_index: HashMap<String, usize>,
    index_to_token: Vec<String>,
}

/// One encoded, fixed-length example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    /// Exactly `max_len` vocabulary indices.
    pub indices: Vec<usize>,
    /// 1 = rumor, 0 = non-rumor.
    pub label: u8,
    /// Free-form event tag carried through from the source record.
    pub event: String,
}

/// Lowercases, splits on Unicode whitespace, and strips leading/trailing
/// non-alphanumeric characters from each token. Tokens that start with `@`
/// or `#`, or that contain `://`, are kept whole so mentions, hashtags and
/// URLs survive intact. Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .filter_map(|raw| {
            if raw.starts_with('@') || raw.starts_with('#') || raw.contains("://") {
                return Some(raw.to_string());
            }
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect()
}

impl Vocabulary {
    /// Builds a vocabulary from tokenized documents.
    ///
    /// Tokens with corpus frequency at least `min_count` are ranked by
    /// frequency (descending) with lexicographic ties, then assigned indices
    /// starting at 2 until `max_vocab` entries exist in total. The ranking
    /// depends only on aggregate counts, so document order is irrelevant.
    pub fn build(corpus: &[Vec<String>], min_count: usize, max_vocab: usize) -> Vocabulary {
        assert!(min_count >= 1, "min_count must be at least 1");
        assert!(max_vocab >= 2, "max_vocab must leave room for PAD and OOV");

        let mut freq: HashMap<&str, usize> = HashMap::new();
        for doc in corpus {
            for token in doc {
                *freq.entry(token).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> =
            freq.into_iter().filter(|&(_, n)| n >= min_count).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_vocab.saturating_sub(2));

        let mut index_to_token = vec!["<pad>".to_string(), "<oov>".to_string()];
        let mut token_to_index = HashMap::new();
        for (token, _) in ranked {
            token_to_index.insert(token.to_string(), index_to_token.len());
            index_to_token.push(token.to_string());
        }
        Vocabulary { token_to_index, index_to_token }
    }

    /// Rebuilds a vocabulary from its index-ordered token list (used when
    /// loading a persisted model). Entries 0 and 1 must be the reserved
    /// PAD/OOV markers.
    pub fn from_index_list(index_to_token: Vec<String>) -> Option<Vocabulary> {
        if index_to_token.len() < 2 {
            return None;
        }
        let mut token_to_index = HashMap::new();
        for (i, token) in index_to_token.iter().enumerate().skip(2) {
            if token_to_index.insert(token.clone(), i).is_some() {
                return None; // duplicate token
            }
        }
        Some(Vocabulary { token_to_index, index_to_token })
    }

    /// Total number of indices, including PAD and OOV.
    pub fn size(&self) -> usize {
        self.index_to_token.len()
    }

    /// Index for `token`, or the OOV index if unknown.
    pub fn index_of(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(OOV_INDEX)
    }

    /// Token at `index`, if in range.
    pub fn token_at(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn index_list(&self) -> &[String] {
        &self.index_to_token
    }
}

/// Encodes tokens into exactly `max_len` indices: unknown tokens map to
/// OOV, sequences longer than `max_len` keep the last `max_len` tokens,
/// shorter ones are pre-padded with PAD (index 0).
pub fn encode_and_pad(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    assert!(max_len >= 1, "max_len must be at least 1");
    let start = tokens.len().saturating_sub(max_len);
    let kept = &tokens[start..];
    let mut out = vec![PAD_INDEX; max_len - kept.len()];
    out.extend(kept.iter().map(|t| vocab.index_of(t)));
    out
}
