//! Tweet corpora: loading, normalization, vocabulary, and synthetic data.

mod load;
mod synthetic;
mod tokenize;
mod vocab;

pub use load::{load_corpus, write_corpus_tsv, CorpusSchema, LoadError, Split};
pub use synthetic::{generate_synthetic_corpus, synthetic_anchor_map, SyntheticSpec};
pub use tokenize::{extract_hashtags, normalize_and_tokenize, tokenize_with_hashtags, URL_TOKEN, USER_TOKEN};
pub use vocab::{build_vocabulary, Vocabulary, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};

use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// Event id used for tweets that belong to no event. Such tweets are never
/// eligible as the positive event of an episode.
pub const NON_EVENT: &str = "none";

/// One normalized tweet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tweet {
    /// Unique identifier.
    pub id: String,
    /// Key of the originating event set, [`NON_EVENT`] for non-event tweets.
    pub event_id: String,
    /// Original text.
    pub raw_text: String,
    /// Normalized token sequence; non-empty for every loaded tweet.
    pub tokens: Vec<String>,
    /// Lowercased hashtags of `raw_text`, without the `#` prefix.
    pub hashtags: BTreeSet<String>,
}

impl Tweet {
    /// Build a tweet by normalizing `raw_text`. Returns `None` when the text
    /// normalizes to an empty token sequence.
    pub fn from_raw(id: &str, event_id: &str, raw_text: &str) -> Option<Tweet> {
        let (tokens, hashtags) = tokenize_with_hashtags(raw_text);
        if tokens.is_empty() {
            return None;
        }
        Some(Tweet {
            id: id.to_string(),
            event_id: event_id.to_string(),
            raw_text: raw_text.to_string(),
            tokens,
            hashtags,
        })
    }
}

/// An immutable, indexed collection of tweets.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    /// All tweets, in load order.
    pub tweets: Vec<Tweet>,
    /// event id -> indexes into `tweets`, each tweet in exactly one bucket.
    pub by_event: BTreeMap<String, Vec<usize>>,
    /// (event id, hashtag) -> indexes of tweets of that event carrying the tag.
    pub by_event_hashtag: BTreeMap<(String, String), Vec<usize>>,
    /// Rows dropped at load time because their text normalized to nothing.
    pub skipped_rows: usize,
}

impl Corpus {
    /// Index a set of tweets.
    pub fn from_tweets(tweets: Vec<Tweet>) -> Corpus {
        let mut by_event: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_event_hashtag: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for (i, tweet) in tweets.iter().enumerate() {
            by_event.entry(tweet.event_id.clone()).or_default().push(i);
            for tag in &tweet.hashtags {
                by_event_hashtag
                    .entry((tweet.event_id.clone(), tag.clone()))
                    .or_default()
                    .push(i);
            }
        }
        Corpus { tweets, by_event, by_event_hashtag, skipped_rows: 0 }
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    /// Event ids present in the corpus, in sorted order.
    pub fn event_ids(&self) -> impl Iterator<Item = &str> {
        self.by_event.keys().map(String::as_str)
    }

    /// Indexes of the tweets of one event (empty slice if unknown).
    pub fn event_tweets(&self, event_id: &str) -> &[usize] {
        self.by_event.get(event_id).map_or(&[], Vec::as_slice)
    }

    /// Indexes of the tweets of `event_id` that carry `hashtag`.
    pub fn event_hashtag_tweets(&self, event_id: &str, hashtag: &str) -> &[usize] {
        self.by_event_hashtag
            .get(&(event_id.to_string(), hashtag.to_string()))
            .map_or(&[], Vec::as_slice)
    }

    /// New corpus containing only the events accepted by `keep`.
    pub fn subset_by_events<F: Fn(&str) -> bool>(&self, keep: F) -> Corpus {
        let tweets = self
            .tweets
            .iter()
            .filter(|t| keep(&t.event_id))
            .cloned()
            .collect();
        Corpus::from_tweets(tweets)
    }

    /// Check index exhaustiveness and disjointness. Test support.
    pub fn check_indexes(&self) -> bool {
        let mut seen = vec![false; self.tweets.len()];
        for (event, idxs) in &self.by_event {
            for &i in idxs {
                if i >= self.tweets.len() || seen[i] || &self.tweets[i].event_id != event {
                    return false;
                }
                seen[i] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return false;
        }
        for ((event, tag), idxs) in &self.by_event_hashtag {
            for &i in idxs {
                let t = &self.tweets[i];
                if &t.event_id != event || !t.hashtags.contains(tag) {
                    return false;
                }
            }
        }
        true
    }
}
