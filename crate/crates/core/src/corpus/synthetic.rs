//! Synthetic corpora with known structure.
//!
//! Each event draws from its own disjoint topic vocabulary (`ev<k>w<i>`)
//! with a configurable probability, otherwise from a vocabulary shared by
//! all events (`sh<i>`). A configurable fraction of each event's tweets
//! carries the event's anchor hashtag `#ev<k>tag`, which makes the corpora
//! usable for hashtag-anchored sampling without any real data.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use super::{Corpus, Tweet};

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_events: usize,
    /// Distinct topic tokens per event; topic vocabularies of different
    /// events are disjoint by construction.
    pub topic_vocab_per_event: usize,
    /// Tokens shared by all events.
    pub shared_vocab: usize,
    pub tweets_per_event: usize,
    /// Probability that a token is drawn from the event topic vocabulary.
    pub topic_token_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a tweet carries the event's anchor hashtag.
    pub anchor_hashtag_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_events: 2,
            topic_vocab_per_event: 30,
            shared_vocab: 100,
            tweets_per_event: 100,
            topic_token_prob: 0.7,
            min_len: 5,
            max_len: 12,
            anchor_hashtag_prob: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_events == 0 || self.topic_vocab_per_event == 0 || self.tweets_per_event == 0 {
            return Err("n_events, topic_vocab_per_event and tweets_per_event must be positive".into());
        }
        if self.min_len < 1 || self.max_len < self.min_len {
            return Err("need 1 <= min_len <= max_len".into());
        }
        if !(0.0..=1.0).contains(&self.topic_token_prob) || !(0.0..=1.0).contains(&self.anchor_hashtag_prob) {
            return Err("probabilities must lie in [0, 1]".into());
        }
        if self.shared_vocab == 0 && self.topic_token_prob < 1.0 {
            return Err("shared_vocab must be positive unless topic_token_prob is 1".into());
        }
        Ok(())
    }
}

/// Event id of the k-th synthetic event.
pub fn synthetic_event_id(k: usize) -> String {
    format!("ev{k}")
}

fn anchor_tag(k: usize) -> String {
    format!("ev{k}tag")
}

/// Anchor map for the first `n_events` synthetic events, as used by
/// hashtag-anchored sampling.
pub fn synthetic_anchor_map(n_events: usize) -> BTreeMap<String, String> {
    (0..n_events).map(|k| (synthetic_event_id(k), anchor_tag(k))).collect()
}

/// Generate a corpus per `spec`. Deterministic for a given seed.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Corpus {
    spec.validate().expect("invalid synthetic spec");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tweets = Vec::with_capacity(spec.n_events * spec.tweets_per_event);
    for ev in 0..spec.n_events {
        let event_id = synthetic_event_id(ev);
        for t in 0..spec.tweets_per_event {
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let mut words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.random::<f64>() < spec.topic_token_prob {
                        format!("ev{ev}w{}", rng.random_range(0..spec.topic_vocab_per_event))
                    } else {
                        format!("sh{}", rng.random_range(0..spec.shared_vocab))
                    }
                })
                .collect();
            if rng.random::<f64>() < spec.anchor_hashtag_prob {
                let at = rng.random_range(0..=words.len());
                words.insert(at, format!("#{}", anchor_tag(ev)));
            }
            let raw = words.join(" ");
            let tweet = Tweet::from_raw(&format!("ev{ev}t{t}"), &event_id, &raw)
                .expect("synthetic text never normalizes to empty");
            tweets.push(tweet);
        }
    }
    Corpus::from_tweets(tweets)
}
