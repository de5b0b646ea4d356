//! Distance-based few-shot classification heads and the per-episode loss.
//!
//! Three heads turn support and query embeddings into a binary score pair:
//!
//! * `matching`: softmax attention over cosine similarities to every support,
//!   summed into class likelihoods (weighted nearest-neighbor).
//! * `prototypical`: softmax over negative squared Euclidean distances to the
//!   positive and negative class centroids.
//! * `oneway_prototypical`: prototypical with the negative centroid fixed at
//!   the origin; consumes no negative supports at all.
//!
//! All heads are stateless pure functions. Each forward has a matching
//! backward that maps the loss gradient on the two logits to gradients on
//! every embedding involved, which the episode trainer chains into the
//! encoder.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::encoder::{encode, encode_backward, EncodeContext, EncoderConfig, EncoderParams};
use crate::numeric::{softmax_cross_entropy, Scalar};
use crate::sampler::Episode;

/// Norms below this are treated as degenerate by the cosine rule.
const NORM_FLOOR: f64 = 1e-12;

/// Head selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Matching,
    Prototypical,
    OnewayPrototypical,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::Matching, HeadKind::Prototypical, HeadKind::OnewayPrototypical];

    /// One-way heads accept episodes without negative supports.
    pub fn one_way(self) -> bool {
        matches!(self, HeadKind::OnewayPrototypical)
    }

    pub fn parse(s: &str) -> Option<HeadKind> {
        match s {
            "matching" => Some(HeadKind::Matching),
            "prototypical" => Some(HeadKind::Prototypical),
            "oneway" | "oneway-prototypical" | "oneway_prototypical" => Some(HeadKind::OnewayPrototypical),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Matching => "matching",
            HeadKind::Prototypical => "prototypical",
            HeadKind::OnewayPrototypical => "oneway",
        }
    }
}

/// Probability pair produced by a head for one query.
#[derive(Debug, Clone, Copy)]
pub struct ClassScores<T> {
    pub p_pos: T,
    pub p_neg: T,
    /// Pre-softmax score pair feeding the shared cross-entropy path.
    pub logits: [T; 2],
}

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("{head} head needs negative supports, episode has none")]
    MissingNegatives { head: &'static str },
    #[error("episode has {pos} positive but {neg} negative supports")]
    UnbalancedSupports { pos: usize, neg: usize },
    #[error("episode has no positive supports")]
    EmptySupports,
}

/// Cosine similarity with the degenerate-vector rule: if either norm is
/// (numerically) zero the similarity is defined as 0.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "cosine of vectors of different lengths");
    let mut dot = T::zero();
    let mut na = T::zero();
    let mut nb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    let floor = T::from_f64(NORM_FLOOR);
    let (na, nb) = (na.sqrt(), nb.sqrt());
    if na < floor || nb < floor {
        return T::zero();
    }
    dot / (na * nb)
}

/// Arithmetic mean of the embeddings: the class centroid.
pub fn prototype<T: Scalar>(embs: &[Vec<T>]) -> Vec<T> {
    assert!(!embs.is_empty(), "prototype of an empty support set");
    let dim = embs[0].len();
    let mut mean = vec![T::zero(); dim];
    for e in embs {
        assert_eq!(e.len(), dim);
        for (m, &v) in mean.iter_mut().zip(e) {
            *m = *m + v;
        }
    }
    let n = T::from_f64(embs.len() as f64);
    for m in &mut mean {
        *m = *m / n;
    }
    mean
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).fold(T::zero(), |s, v| s + v)
}

fn scores_from_logits<T: Scalar>(logits: [T; 2]) -> ClassScores<T> {
    let p = crate::numeric::softmax(&logits);
    ClassScores { p_pos: p[0], p_neg: p[1], logits }
}

// ---------------------------------------------------------------------------
// Matching head
// ---------------------------------------------------------------------------

/// Cached forward quantities needed by [`matching_backward`].
#[derive(Debug)]
pub struct MatchingContext<T> {
    sims: Vec<T>,
    attention: Vec<T>,
    p: [T; 2],
    n_pos: usize,
}

/// Weighted nearest-neighbor classification: softmax attention over cosine
/// similarities to all supports, attention mass summed per class. Logits are
/// the log class likelihoods so that the shared softmax cross-entropy
/// reproduces them as probabilities.
pub fn matching_head<T: Scalar>(query: &[T], pos: &[Vec<T>], neg: &[Vec<T>]) -> ClassScores<T> {
    matching_forward(query, pos, neg).0
}

pub fn matching_forward<T: Scalar>(
    query: &[T],
    pos: &[Vec<T>],
    neg: &[Vec<T>],
) -> (ClassScores<T>, MatchingContext<T>) {
    assert!(!pos.is_empty() && !neg.is_empty(), "matching head needs supports of both classes");
    let sims: Vec<T> = pos.iter().chain(neg).map(|s| cosine_similarity(query, s)).collect();
    let attention = crate::numeric::softmax(&sims);
    let p_pos = attention[..pos.len()].iter().fold(T::zero(), |a, &b| a + b);
    let p_neg = T::one() - p_pos;
    let logits = [p_pos.ln(), p_neg.ln()];
    let scores = ClassScores { p_pos, p_neg, logits };
    (scores, MatchingContext { sims, attention, p: [p_pos, p_neg], n_pos: pos.len() })
}

/// Gradients of the matching logits with respect to the query and every
/// support embedding. `grad_logits` is the loss gradient on
/// `[ln p_pos, ln p_neg]`.
pub fn matching_backward<T: Scalar>(
    ctx: &MatchingContext<T>,
    query: &[T],
    pos: &[Vec<T>],
    neg: &[Vec<T>],
    grad_logits: [T; 2],
) -> (Vec<T>, Vec<Vec<T>>, Vec<Vec<T>>) {
    let n = ctx.sims.len();
    debug_assert_eq!(n, pos.len() + neg.len());
    // d loss / d attention_i = grad_logits[class(i)] / p[class(i)]
    let g_att: Vec<T> = (0..n)
        .map(|i| {
            let class = usize::from(i >= ctx.n_pos);
            grad_logits[class] / ctx.p[class]
        })
        .collect();
    // softmax jacobian: d loss / d sim_j = a_j (g_j - sum_i g_i a_i)
    let weighted: T = g_att.iter().zip(&ctx.attention).map(|(&g, &a)| g * a).fold(T::zero(), |s, v| s + v);
    let g_sims: Vec<T> = ctx
        .attention
        .iter()
        .zip(&g_att)
        .map(|(&a, &g)| a * (g - weighted))
        .collect();

    let dim = query.len();
    let floor = T::from_f64(NORM_FLOOR);
    let q_norm = query.iter().map(|&v| v * v).fold(T::zero(), |s, v| s + v).sqrt();
    let mut grad_q = vec![T::zero(); dim];
    let mut grads: Vec<Vec<T>> = Vec::with_capacity(n);
    for (j, support) in pos.iter().chain(neg).enumerate() {
        let s_norm = support.iter().map(|&v| v * v).fold(T::zero(), |s, v| s + v).sqrt();
        let mut grad_s = vec![T::zero(); dim];
        // The degenerate-similarity rule is flat: zero gradient there.
        if q_norm >= floor && s_norm >= floor {
            let sim = ctx.sims[j];
            let g = g_sims[j];
            let inv = T::one() / (q_norm * s_norm);
            for d in 0..dim {
                grad_q[d] = grad_q[d] + g * (support[d] * inv - sim * query[d] / (q_norm * q_norm));
                grad_s[d] = g * (query[d] * inv - sim * support[d] / (s_norm * s_norm));
            }
        }
        grads.push(grad_s);
    }
    let grad_neg = grads.split_off(pos.len());
    (grad_q, grads, grad_neg)
}

// ---------------------------------------------------------------------------
// Prototypical heads
// ---------------------------------------------------------------------------

/// Prototypical logits: negative squared Euclidean distances to the positive
/// and negative prototypes, softmaxed into probabilities.
pub fn proto_head<T: Scalar>(query: &[T], pos_proto: &[T], neg_proto: &[T]) -> ClassScores<T> {
    let logits = [-squared_distance(query, pos_proto), -squared_distance(query, neg_proto)];
    scores_from_logits(logits)
}

/// One-way variant: the negative class is a non-trainable centroid at the
/// origin, so no negative supports are consumed.
pub fn oneway_head<T: Scalar>(query: &[T], pos_proto: &[T]) -> ClassScores<T> {
    let origin = vec![T::zero(); query.len()];
    proto_head(query, pos_proto, &origin)
}

/// Gradients of the prototypical logits. Returns `(grad_query,
/// grad_pos_proto, grad_neg_proto)`; for the one-way head pass the origin as
/// `neg_proto` and drop the negative gradient.
pub fn proto_backward<T: Scalar>(
    query: &[T],
    pos_proto: &[T],
    neg_proto: &[T],
    grad_logits: [T; 2],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let dim = query.len();
    let two = T::from_f64(2.0);
    let mut grad_q = vec![T::zero(); dim];
    let mut grad_p = vec![T::zero(); dim];
    let mut grad_n = vec![T::zero(); dim];
    for d in 0..dim {
        let dp = query[d] - pos_proto[d];
        let dn = query[d] - neg_proto[d];
        grad_q[d] = -two * (grad_logits[0] * dp + grad_logits[1] * dn);
        grad_p[d] = two * grad_logits[0] * dp;
        grad_n[d] = two * grad_logits[1] * dn;
    }
    (grad_q, grad_p, grad_n)
}

// ---------------------------------------------------------------------------
// Episode forward / training step
// ---------------------------------------------------------------------------

/// Outcome of classifying one episode's query.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeOutcome<T> {
    /// Cross-entropy of the true query class.
    pub loss: T,
    /// Positive iff `p_pos > 0.5`; a tie counts as negative.
    pub predicted_positive: bool,
    pub scores: ClassScores<T>,
}

fn check_shapes(head: HeadKind, episode: &Episode) -> Result<(), HeadError> {
    if episode.pos_supports.is_empty() {
        return Err(HeadError::EmptySupports);
    }
    if !head.one_way() {
        if episode.neg_supports.is_empty() {
            return Err(HeadError::MissingNegatives { head: head.as_str() });
        }
        if episode.neg_supports.len() != episode.pos_supports.len() {
            return Err(HeadError::UnbalancedSupports {
                pos: episode.pos_supports.len(),
                neg: episode.neg_supports.len(),
            });
        }
    }
    Ok(())
}

fn head_scores<T: Scalar>(
    head: HeadKind,
    query: &[T],
    pos: &[Vec<T>],
    neg: &[Vec<T>],
) -> ClassScores<T> {
    match head {
        HeadKind::Matching => matching_head(query, pos, neg),
        HeadKind::Prototypical => proto_head(query, &prototype(pos), &prototype(neg)),
        HeadKind::OnewayPrototypical => oneway_head(query, &prototype(pos)),
    }
}

fn outcome_from_scores<T: Scalar>(scores: ClassScores<T>, query_positive: bool) -> EpisodeOutcome<T> {
    let label = usize::from(!query_positive); // class 0 = positive
    let (loss, _) = softmax_cross_entropy(&scores.logits, label);
    let half = T::from_f64(0.5);
    EpisodeOutcome { loss, predicted_positive: scores.p_pos > half, scores }
}

/// Encode every support and the query with the shared encoder, score the
/// query with `head`, and compute the episode loss. Inference mode: no
/// dropout, no gradients.
pub fn episode_forward<T: Scalar>(
    params: &EncoderParams<T>,
    config: &EncoderConfig,
    vocab: &Vocabulary,
    head: HeadKind,
    episode: &Episode,
) -> Result<EpisodeOutcome<T>, HeadError> {
    check_shapes(head, episode)?;
    let enc = |tokens: &[String]| -> Vec<T> {
        encode(params, config, &vocab.encode_padded(tokens, config.max_len), None).0
    };
    let pos: Vec<Vec<T>> = episode.pos_supports.iter().map(|t| enc(&t.tokens)).collect();
    let neg: Vec<Vec<T>> = if head.one_way() {
        Vec::new()
    } else {
        episode.neg_supports.iter().map(|t| enc(&t.tokens)).collect()
    };
    let query = enc(&episode.query.tokens);
    let scores = head_scores(head, &query, &pos, &neg);
    Ok(outcome_from_scores(scores, episode.query_positive))
}

/// One training step on one episode: forward in training mode (dropout
/// active), backward through the head and the shared encoder. Gradients are
/// accumulated on `params`; the caller applies the optimizer step.
pub fn episode_train_step<T: Scalar>(
    params: &mut EncoderParams<T>,
    config: &EncoderConfig,
    vocab: &Vocabulary,
    head: HeadKind,
    episode: &Episode,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<EpisodeOutcome<T>, HeadError> {
    check_shapes(head, episode)?;
    type Encoded<T> = (Vec<T>, EncodeContext<T>);
    let enc = |params: &EncoderParams<T>, tokens: &[String], rng: &mut ChaCha8Rng| -> Encoded<T> {
        encode(params, config, &vocab.encode_padded(tokens, config.max_len), Some(rng))
    };

    let mut pos: Vec<Encoded<T>> = Vec::with_capacity(episode.pos_supports.len());
    for t in &episode.pos_supports {
        pos.push(enc(params, &t.tokens, dropout_rng));
    }
    let mut neg: Vec<Encoded<T>> = Vec::new();
    if !head.one_way() {
        for t in &episode.neg_supports {
            neg.push(enc(params, &t.tokens, dropout_rng));
        }
    }
    let (query, query_ctx) = enc(params, &episode.query.tokens, dropout_rng);

    let pos_embs: Vec<Vec<T>> = pos.iter().map(|(e, _)| e.clone()).collect();
    let neg_embs: Vec<Vec<T>> = neg.iter().map(|(e, _)| e.clone()).collect();

    let label = usize::from(!episode.query_positive);
    let (scores, grad_q, grad_pos, grad_neg) = match head {
        HeadKind::Matching => {
            let (scores, ctx) = matching_forward(&query, &pos_embs, &neg_embs);
            let (_, grad_logits) = softmax_cross_entropy(&scores.logits, label);
            let gl = [grad_logits[0], grad_logits[1]];
            let (gq, gp, gn) = matching_backward(&ctx, &query, &pos_embs, &neg_embs, gl);
            (scores, gq, gp, gn)
        }
        HeadKind::Prototypical => {
            let p_proto = prototype(&pos_embs);
            let n_proto = prototype(&neg_embs);
            let scores = proto_head(&query, &p_proto, &n_proto);
            let (_, grad_logits) = softmax_cross_entropy(&scores.logits, label);
            let (gq, gp_proto, gn_proto) =
                proto_backward(&query, &p_proto, &n_proto, [grad_logits[0], grad_logits[1]]);
            let k_pos = T::from_f64(pos_embs.len() as f64);
            let k_neg = T::from_f64(neg_embs.len() as f64);
            let gp: Vec<Vec<T>> =
                (0..pos_embs.len()).map(|_| gp_proto.iter().map(|&g| g / k_pos).collect()).collect();
            let gn: Vec<Vec<T>> =
                (0..neg_embs.len()).map(|_| gn_proto.iter().map(|&g| g / k_neg).collect()).collect();
            (scores, gq, gp, gn)
        }
        HeadKind::OnewayPrototypical => {
            let p_proto = prototype(&pos_embs);
            let origin = vec![T::zero(); query.len()];
            let scores = proto_head(&query, &p_proto, &origin);
            let (_, grad_logits) = softmax_cross_entropy(&scores.logits, label);
            let (gq, gp_proto, _) =
                proto_backward(&query, &p_proto, &origin, [grad_logits[0], grad_logits[1]]);
            let k_pos = T::from_f64(pos_embs.len() as f64);
            let gp: Vec<Vec<T>> =
                (0..pos_embs.len()).map(|_| gp_proto.iter().map(|&g| g / k_pos).collect()).collect();
            (scores, gq, gp, Vec::new())
        }
    };

    for ((_, ctx), grad) in pos.iter().zip(&grad_pos) {
        encode_backward(params, config, ctx, grad);
    }
    for ((_, ctx), grad) in neg.iter().zip(&grad_neg) {
        encode_backward(params, config, ctx, grad);
    }
    encode_backward(params, config, &query_ctx, &grad_q);

    Ok(outcome_from_scores(scores, episode.query_positive))
}
