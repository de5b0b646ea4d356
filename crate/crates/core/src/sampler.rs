//! Episode construction for episodic training and evaluation.
//!
//! Two regimes are supported. In *event-vs-event*, positive supports are the
//! tweets of one event that carry a configured anchor hashtag (the anchor
//! token is removed from every support afterwards), positive queries are
//! anchor-free tweets of the same event, and negatives come from the other
//! events of the same corpus. In *event-vs-all*, membership alone decides:
//! positives are drawn from one event, negatives uniformly from a dedicated
//! negative corpus (or the rest of the positive corpus when none is given).

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Corpus, Tweet, NON_EVENT};

/// How many times a draw may be retried before sampling gives up.
const REDRAW_CAP: usize = 100;

/// Experimental regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    EventVsEvent,
    EventVsAll,
}

impl Regime {
    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "event-vs-event" | "event_vs_event" => Some(Regime::EventVsEvent),
            "event-vs-all" | "event_vs_all" => Some(Regime::EventVsAll),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::EventVsEvent => "event-vs-event",
            Regime::EventVsAll => "event-vs-all",
        }
    }
}

/// One few-shot unit: support set(s) plus a single labeled query.
#[derive(Debug, Clone)]
pub struct Episode {
    /// k positive supports, all from one event. In the event-vs-event regime
    /// the anchor hashtag token has been removed from their token sequences.
    pub pos_supports: Vec<Tweet>,
    /// k negative supports, or empty for one-way episodes.
    pub neg_supports: Vec<Tweet>,
    pub query: Tweet,
    pub query_positive: bool,
    /// `(event_id, hashtag)` when hashtag anchoring was used.
    pub anchor: Option<(String, String)>,
}

impl Episode {
    /// Event id shared by the positive supports.
    pub fn positive_event(&self) -> &str {
        &self.pos_supports[0].event_id
    }
}

/// Sampler configuration shared by both regimes.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub regime: Regime,
    /// Support examples per class.
    pub k_shot: usize,
    /// One-way episodes carry no negative supports.
    pub one_way: bool,
    /// Probability that the query is positive. Must lie strictly in (0, 1).
    pub pos_query_prob: f64,
    /// event id -> anchor hashtag (lowercase, no '#'); required per sampled
    /// event in the event-vs-event regime.
    pub anchor_map: BTreeMap<String, String>,
}

impl SamplerConfig {
    pub fn new(regime: Regime, k_shot: usize, one_way: bool) -> SamplerConfig {
        SamplerConfig { regime, k_shot, one_way, pos_query_prob: 0.5, anchor_map: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        if self.k_shot < 1 {
            return Err(SampleError::InvalidConfig("k_shot must be at least 1".into()));
        }
        if !(self.pos_query_prob > 0.0 && self.pos_query_prob < 1.0) {
            return Err(SampleError::InvalidConfig("pos_query_prob must lie strictly in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("event {event:?} has no anchor hashtag configured")]
    MissingAnchor { event: String },
    #[error("event {event:?} has {have} tweets carrying anchor #{anchor}, need {need} positive supports")]
    InsufficientAnchored { event: String, anchor: String, have: usize, need: usize },
    #[error("event {event:?} has no anchor-free tweet to use as a positive query")]
    NoAnchorFreeQuery { event: String },
    #[error("event {event:?} has {have} tweets, need {need} for supports plus query")]
    InsufficientPositives { event: String, have: usize, need: usize },
    #[error("negative pool has {have} tweets outside event {event:?}, need {need}")]
    InsufficientNegatives { event: String, have: usize, need: usize },
    #[error("stripping anchor #{anchor} left support {id:?} empty (support unusable)")]
    SupportUnusable { id: String, anchor: String },
    #[error("gave up after {attempts} redraws: {reason}")]
    RedrawCapExceeded { attempts: usize, reason: String },
    #[error("no event satisfies the episode preconditions")]
    NoEligibleEvent,
    #[error("cannot read anchor map: {0}")]
    AnchorMapIo(#[from] std::io::Error),
    #[error("anchor map line {line}: expected `event_id<TAB>hashtag`")]
    AnchorMapFormat { line: usize },
}

/// Remove every occurrence of the anchor hashtag token, preserving order.
///
/// `hashtag` must be lowercase and '#'-free. An empty result means the
/// support is unusable and the caller should redraw.
pub fn strip_anchor_hashtag(tokens: &[String], hashtag: &str) -> Result<Vec<String>, SampleError> {
    let kept: Vec<String> = tokens.iter().filter(|t| t.as_str() != hashtag).cloned().collect();
    if kept.is_empty() {
        return Err(SampleError::SupportUnusable { id: String::new(), anchor: hashtag.to_string() });
    }
    Ok(kept)
}

fn strip_tweet(tweet: &Tweet, hashtag: &str) -> Result<Tweet, SampleError> {
    let tokens = strip_anchor_hashtag(&tweet.tokens, hashtag).map_err(|e| match e {
        SampleError::SupportUnusable { anchor, .. } => {
            SampleError::SupportUnusable { id: tweet.id.clone(), anchor }
        }
        other => other,
    })?;
    let mut out = tweet.clone();
    out.tokens = tokens;
    out.hashtags.remove(hashtag);
    Ok(out)
}

/// Draw `n` distinct elements from `pool` without replacement.
fn draw_without_replacement(pool: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    debug_assert!(n <= pool.len());
    let mut picked: Vec<usize> = Vec::with_capacity(n);
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    while picked.len() < n {
        let at = rng.random_range(0..pool.len());
        if taken.insert(at) {
            picked.push(pool[at]);
        }
    }
    picked
}

/// Draw `n` distinct tweets from `corpus` whose event differs from `exclude_event`.
fn draw_negatives(
    corpus: &Corpus,
    exclude_event: &str,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, SampleError> {
    let available = corpus.len() - corpus.event_tweets(exclude_event).len();
    if available < n {
        return Err(SampleError::InsufficientNegatives {
            event: exclude_event.to_string(),
            have: available,
            need: n,
        });
    }
    let mut picked = Vec::with_capacity(n);
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    while picked.len() < n {
        let i = rng.random_range(0..corpus.len());
        if corpus.tweets[i].event_id == exclude_event {
            continue;
        }
        if taken.insert(i) {
            picked.push(i);
        }
    }
    Ok(picked)
}

/// Sample one event-vs-event episode for `event`.
///
/// Positive supports are drawn without replacement from the event's
/// anchor-bearing tweets and the anchor token is removed from them (and from
/// any negative support that happens to carry it). A positive query is drawn
/// from the event's tweets whose token sequences are anchor-free; a negative
/// query comes from the other events of the corpus.
pub fn sample_event_vs_event(
    corpus: &Corpus,
    config: &SamplerConfig,
    event: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Episode, SampleError> {
    config.validate()?;
    let anchor = config
        .anchor_map
        .get(event)
        .ok_or_else(|| SampleError::MissingAnchor { event: event.to_string() })?
        .clone();
    let k = config.k_shot;

    let anchored = corpus.event_hashtag_tweets(event, &anchor);
    // A support that is nothing but the anchor hashtag becomes empty after
    // stripping; only multi-token supports are eligible.
    let usable: Vec<usize> = anchored
        .iter()
        .copied()
        .filter(|&i| corpus.tweets[i].tokens.iter().any(|t| t != &anchor))
        .collect();
    if usable.len() < k {
        return Err(SampleError::InsufficientAnchored {
            event: event.to_string(),
            anchor,
            have: usable.len(),
            need: k,
        });
    }
    let anchor_free: Vec<usize> = corpus
        .event_tweets(event)
        .iter()
        .copied()
        .filter(|&i| !corpus.tweets[i].tokens.iter().any(|t| t == &anchor))
        .collect();
    if anchor_free.is_empty() {
        return Err(SampleError::NoAnchorFreeQuery { event: event.to_string() });
    }

    let support_idx = draw_without_replacement(&usable, k, rng);
    let mut pos_supports = Vec::with_capacity(k);
    for i in support_idx {
        pos_supports.push(strip_tweet(&corpus.tweets[i], &anchor)?);
    }

    let query_positive = rng.random::<f64>() < config.pos_query_prob;
    let (query, neg_supports) = if config.one_way {
        let query = if query_positive {
            let i = anchor_free[rng.random_range(0..anchor_free.len())];
            corpus.tweets[i].clone()
        } else {
            let i = draw_negatives(corpus, event, 1, rng)?[0];
            corpus.tweets[i].clone()
        };
        (query, Vec::new())
    } else {
        // Draw negatives jointly so a negative query never collides with a
        // negative support.
        let n_neg = if query_positive { k } else { k + 1 };
        let mut negs = draw_negatives(corpus, event, n_neg, rng)?;
        let query = if query_positive {
            let i = anchor_free[rng.random_range(0..anchor_free.len())];
            corpus.tweets[i].clone()
        } else {
            corpus.tweets[negs.pop().expect("drew k+1 negatives")].clone()
        };
        let mut supports = Vec::with_capacity(k);
        for i in negs {
            // The anchor must not leak through any support, negative ones
            // included; a rare all-anchor negative is redrawn by the caller.
            supports.push(strip_tweet(&corpus.tweets[i], &anchor)?);
        }
        (query, supports)
    };

    Ok(Episode {
        pos_supports,
        neg_supports,
        query,
        query_positive,
        anchor: Some((event.to_string(), anchor)),
    })
}

/// Sample one event-vs-all episode for `event`.
///
/// Positive supports (plus the query, when positive) are drawn without
/// replacement from the event's tweets in `pos_corpus`. Negatives are drawn
/// uniformly from `neg_corpus`, excluding any tweet of the positive event.
pub fn sample_event_vs_all(
    pos_corpus: &Corpus,
    neg_corpus: &Corpus,
    config: &SamplerConfig,
    event: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Episode, SampleError> {
    config.validate()?;
    let k = config.k_shot;
    let members = pos_corpus.event_tweets(event);
    if members.len() < k + 1 {
        return Err(SampleError::InsufficientPositives {
            event: event.to_string(),
            have: members.len(),
            need: k + 1,
        });
    }

    let query_positive = rng.random::<f64>() < config.pos_query_prob;
    let n_pos = if query_positive { k + 1 } else { k };
    let mut pos_idx = draw_without_replacement(members, n_pos, rng);
    let pos_query = if query_positive {
        Some(pos_corpus.tweets[pos_idx.pop().expect("drew k+1 positives")].clone())
    } else {
        None
    };
    let pos_supports: Vec<Tweet> = pos_idx.into_iter().map(|i| pos_corpus.tweets[i].clone()).collect();

    let n_neg = match (config.one_way, query_positive) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => k,
        (false, false) => k + 1,
    };
    let mut negs = draw_negatives(neg_corpus, event, n_neg, rng).map(|v| {
        v.into_iter().map(|i| neg_corpus.tweets[i].clone()).collect::<Vec<Tweet>>()
    })?;
    let query = match pos_query {
        Some(q) => q,
        None => negs.pop().expect("drew a negative query"),
    };
    debug_assert_eq!(negs.len(), if config.one_way { 0 } else { k });

    Ok(Episode { pos_supports, neg_supports: negs, query, query_positive, anchor: None })
}

/// Events of `pos_corpus` that satisfy the per-episode preconditions.
///
/// The [`NON_EVENT`] bucket is never eligible as a positive event.
pub fn eligible_events(
    pos_corpus: &Corpus,
    neg_corpus: &Corpus,
    config: &SamplerConfig,
) -> Vec<String> {
    let k = config.k_shot;
    let neg_need = if config.one_way { 1 } else { k + 1 };
    pos_corpus
        .event_ids()
        .filter(|&event| event != NON_EVENT)
        .filter(|&event| {
            let negatives_ok =
                neg_corpus.len() - neg_corpus.event_tweets(event).len() >= neg_need;
            match config.regime {
                Regime::EventVsEvent => {
                    let Some(anchor) = config.anchor_map.get(event) else {
                        return false;
                    };
                    let usable = pos_corpus
                        .event_hashtag_tweets(event, anchor)
                        .iter()
                        .filter(|&&i| pos_corpus.tweets[i].tokens.iter().any(|t| t != anchor))
                        .count();
                    let anchor_free = pos_corpus
                        .event_tweets(event)
                        .iter()
                        .any(|&i| !pos_corpus.tweets[i].tokens.iter().any(|t| t == anchor));
                    usable >= k && anchor_free && negatives_ok
                }
                Regime::EventVsAll => {
                    pos_corpus.event_tweets(event).len() > k && negatives_ok
                }
            }
        })
        .map(String::from)
        .collect()
}

/// Reusable episode source over immutable corpora.
pub struct EpisodeSampler<'a> {
    pos_corpus: &'a Corpus,
    neg_corpus: &'a Corpus,
    config: SamplerConfig,
    events: Vec<String>,
}

impl<'a> EpisodeSampler<'a> {
    /// `neg_corpus` defaults to `pos_corpus`, which in the event-vs-all
    /// regime reproduces "negatives are random tweets from other events".
    pub fn new(
        pos_corpus: &'a Corpus,
        neg_corpus: Option<&'a Corpus>,
        config: SamplerConfig,
    ) -> Result<EpisodeSampler<'a>, SampleError> {
        config.validate()?;
        let neg_corpus = neg_corpus.unwrap_or(pos_corpus);
        let events = eligible_events(pos_corpus, neg_corpus, &config);
        if events.is_empty() {
            return Err(SampleError::NoEligibleEvent);
        }
        Ok(EpisodeSampler { pos_corpus, neg_corpus, config, events })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn eligible(&self) -> &[String] {
        &self.events
    }

    /// Sample one episode; the positive event is chosen uniformly among
    /// eligible events. Unusable supports are redrawn up to a fixed cap.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Episode, SampleError> {
        let mut last: Option<SampleError> = None;
        for _ in 0..REDRAW_CAP {
            let event = &self.events[rng.random_range(0..self.events.len())];
            let drawn = match self.config.regime {
                Regime::EventVsEvent => {
                    sample_event_vs_event(self.pos_corpus, &self.config, event, rng)
                }
                Regime::EventVsAll => {
                    sample_event_vs_all(self.pos_corpus, self.neg_corpus, &self.config, event, rng)
                }
            };
            match drawn {
                Ok(ep) => return Ok(ep),
                Err(e @ SampleError::SupportUnusable { .. }) => last = Some(e),
                Err(other) => return Err(other),
            }
        }
        Err(SampleError::RedrawCapExceeded {
            attempts: REDRAW_CAP,
            reason: last.map_or_else(|| "unknown".to_string(), |e| e.to_string()),
        })
    }

    /// Sample exactly `n` episodes.
    pub fn sample_many(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Episode>, SampleError> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Build a fixed episode set. Deterministic given the rng state.
pub fn build_episode_set(
    pos_corpus: &Corpus,
    neg_corpus: Option<&Corpus>,
    config: &SamplerConfig,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Episode>, SampleError> {
    if n == 0 {
        return Err(SampleError::InvalidConfig("episode count must be positive".into()));
    }
    EpisodeSampler::new(pos_corpus, neg_corpus, config.clone())?.sample_many(n, rng)
}

/// Load an anchor map file: TSV lines `event_id<TAB>hashtag`, hashtags
/// lowercase and without '#'. Blank lines and `#`-comments are ignored.
pub fn load_anchor_map(path: &Path) -> Result<BTreeMap<String, String>, SampleError> {
    let reader = BufReader::new(File::open(path)?);
    let mut map = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split('\t');
        let (Some(event), Some(tag), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(SampleError::AnchorMapFormat { line: idx + 1 });
        };
        map.insert(event.to_string(), tag.trim_start_matches('#').to_lowercase());
    }
    Ok(map)
}
