//! Confusion counting, per-seed metrics, and seed aggregation.
//!
//! Predictions are pooled over all validation episodes of a run: one
//! confusion matrix per seed, with the event class counted as positive.

use crate::corpus::Vocabulary;
use crate::encoder::{EncoderConfig, EncoderParams};
use crate::heads::{episode_forward, HeadKind};
use crate::numeric::Scalar;
use crate::sampler::Episode;

use super::HarnessError;

/// Pooled binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn record(&mut self, actual_positive: bool, predicted_positive: bool) {
        match (actual_positive, predicted_positive) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics of one (config, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedMetrics {
    pub seed: u64,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Configuration fingerprint; rows may only aggregate with equal prints.
    pub fingerprint: String,
}

impl SeedMetrics {
    pub fn from_counts(seed: u64, counts: ConfusionCounts, fingerprint: String) -> SeedMetrics {
        SeedMetrics {
            seed,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            accuracy: counts.accuracy(),
            fingerprint,
        }
    }
}

/// Mean and population standard deviation of each metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Per-seed rows plus their aggregate for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<SeedMetrics>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    pub fingerprint: String,
}

/// Aggregate per-seed rows: arithmetic mean and population standard
/// deviation per metric. All rows must share one fingerprint.
pub fn aggregate_seeds(rows: &[SeedMetrics]) -> Result<MetricReport, HarnessError> {
    let Some(first) = rows.first() else {
        return Err(HarnessError::Config("cannot aggregate zero seed rows".into()));
    };
    if let Some(bad) = rows.iter().find(|r| r.fingerprint != first.fingerprint) {
        return Err(HarnessError::FingerprintMismatch { seed: bad.seed });
    }
    let stats = |get: fn(&SeedMetrics) -> f64| -> (f64, f64) {
        let n = rows.len() as f64;
        let mean = rows.iter().map(get).sum::<f64>() / n;
        let var = rows.iter().map(|r| (get(r) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (p_mean, p_std) = stats(|r| r.precision);
    let (r_mean, r_std) = stats(|r| r.recall);
    let (f_mean, f_std) = stats(|r| r.f1);
    let (a_mean, a_std) = stats(|r| r.accuracy);
    Ok(MetricReport {
        rows: rows.to_vec(),
        mean: MetricSummary { precision: p_mean, recall: r_mean, f1: f_mean, accuracy: a_mean },
        std: MetricSummary { precision: p_std, recall: r_std, f1: f_std, accuracy: a_std },
        fingerprint: first.fingerprint.clone(),
    })
}

/// Classify a fixed episode set in inference mode and pool the confusion
/// counts. Fails on an empty episode set.
pub fn evaluate_episodes<T: Scalar>(
    params: &EncoderParams<T>,
    enc_config: &EncoderConfig,
    vocab: &Vocabulary,
    head: HeadKind,
    episodes: &[Episode],
) -> Result<ConfusionCounts, HarnessError> {
    if episodes.is_empty() {
        return Err(HarnessError::Config("cannot evaluate an empty episode set".into()));
    }
    let mut counts = ConfusionCounts::default();
    for ep in episodes {
        let out = episode_forward(params, enc_config, vocab, head, ep)?;
        counts.record(ep.query_positive, out.predicted_positive);
    }
    Ok(counts)
}
