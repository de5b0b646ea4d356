//! Token vocabulary with reserved padding and unknown ids.

use std::collections::BTreeMap;

use super::Corpus;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Injective token -> id mapping with dense ids in `[0, size)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Build from tokens listed in id order, ids starting at [`UNK_ID`]` + 1`.
    /// Used by checkpoint loading; duplicates of the reserved tokens are not
    /// allowed.
    pub fn from_ordered_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Vocabulary {
        let mut v = Vocabulary {
            token_to_id: BTreeMap::new(),
            id_to_token: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
        };
        v.token_to_id.insert(PAD_TOKEN.to_string(), PAD_ID);
        v.token_to_id.insert(UNK_TOKEN.to_string(), UNK_ID);
        for tok in tokens {
            let id = v.id_to_token.len();
            let prev = v.token_to_id.insert(tok.clone(), id);
            assert!(prev.is_none(), "duplicate vocabulary token {tok:?}");
            v.id_to_token.push(tok);
        }
        v
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    /// Id of `token`, falling back to [`UNK_ID`] for out-of-vocabulary tokens.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Tokens beyond the reserved ids, in id order.
    pub fn ordered_tokens(&self) -> &[String] {
        &self.id_to_token[2..]
    }

    /// Map a token sequence to ids, truncating/padding to `max_len`.
    pub fn encode_padded(&self, tokens: &[String], max_len: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = tokens.iter().take(max_len).map(|t| self.id_or_unk(t)).collect();
        ids.resize(max_len, PAD_ID);
        ids
    }
}

/// Build a vocabulary over all corpus tokens with frequency >= `min_freq`,
/// optionally capped to the `max_size` most frequent entries (reserved ids
/// included in the cap). Ids are assigned by descending frequency, ties
/// broken lexicographically.
pub fn build_vocabulary(corpora: &[&Corpus], min_freq: usize, max_size: Option<usize>) -> Vocabulary {
    assert!(min_freq >= 1, "min_freq must be at least 1");
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for corpus in corpora {
        for tweet in &corpus.tweets {
            for tok in &tweet.tokens {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(tok, n)| n >= min_freq && tok != PAD_TOKEN && tok != UNK_TOKEN)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(cap) = max_size {
        entries.truncate(cap.saturating_sub(2));
    }
    Vocabulary::from_ordered_tokens(entries.into_iter().map(|(t, _)| t.to_string()))
}
