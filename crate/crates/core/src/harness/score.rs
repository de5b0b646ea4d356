//! Triage scoring: rank candidate tweets against a handful of support
//! tweets using a trained encoder.

use std::io::Write;

use crate::corpus::{Tweet, Vocabulary};
use crate::encoder::{encode, EncoderConfig, EncoderParams};
use crate::heads::{matching_head, oneway_head, proto_head, prototype, HeadKind};

use super::HarnessError;

/// One ranked candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub id: String,
    pub p_pos: f64,
    /// Positive iff `p_pos > 0.5`; ties count as negative.
    pub predicted_positive: bool,
}

/// Score every candidate against the supports, sorted by descending
/// probability (ties broken by id, so the ranking is independent of the
/// candidate order). Supports are encoded once. The one-way head needs no
/// negative supports; the two-way heads reject an empty negative set.
pub fn score_candidates(
    params: &EncoderParams<f32>,
    enc_config: &EncoderConfig,
    vocab: &Vocabulary,
    head: HeadKind,
    pos_supports: &[Tweet],
    neg_supports: &[Tweet],
    candidates: &[Tweet],
) -> Result<Vec<ScoredCandidate>, HarnessError> {
    if pos_supports.is_empty() {
        return Err(HarnessError::Config("scoring needs at least one positive support".into()));
    }
    if !head.one_way() && neg_supports.is_empty() {
        return Err(HarnessError::MissingNegativeSupports { head: head.as_str() });
    }
    let enc = |t: &Tweet| -> Vec<f32> {
        encode(params, enc_config, &vocab.encode_padded(&t.tokens, enc_config.max_len), None).0
    };
    let pos: Vec<Vec<f32>> = pos_supports.iter().map(&enc).collect();
    let neg: Vec<Vec<f32>> = if head.one_way() {
        Vec::new()
    } else {
        neg_supports.iter().map(&enc).collect()
    };
    let pos_proto = prototype(&pos);
    let neg_proto = if neg.is_empty() { Vec::new() } else { prototype(&neg) };

    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|t| {
            let q = enc(t);
            let scores = match head {
                HeadKind::Matching => matching_head(&q, &pos, &neg),
                HeadKind::Prototypical => proto_head(&q, &pos_proto, &neg_proto),
                HeadKind::OnewayPrototypical => oneway_head(&q, &pos_proto),
            };
            ScoredCandidate {
                id: t.id.clone(),
                p_pos: scores.p_pos as f64,
                predicted_positive: scores.p_pos > 0.5,
            }
        })
        .collect();
    scored.sort_by(|a, b| b.p_pos.total_cmp(&a.p_pos).then_with(|| a.id.cmp(&b.id)));
    Ok(scored)
}

/// TSV output: header `id<TAB>p_pos<TAB>label`, one row per candidate in
/// ranked order. An empty candidate list yields only the header.
pub fn write_scores_tsv<W: Write>(scored: &[ScoredCandidate], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "id\tp_pos\tlabel")?;
    for s in scored {
        let label = if s.predicted_positive { "positive" } else { "negative" };
        writeln!(w, "{}\t{:.6}\t{}", s.id, s.p_pos, label)?;
    }
    Ok(())
}
