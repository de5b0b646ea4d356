//! Everything that turns the core into runnable experiments: run
//! configuration, the training loop, multi-seed evaluation and k-shot
//! sweeps, metric aggregation, binary checkpoints, and triage scoring.

mod checkpoint;
mod config;
mod metrics;
mod score;
mod train;

pub use checkpoint::{
    checkpoint_config_text, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, MAGIC,
    VERSION,
};
pub use config::TrainConfig;
pub use metrics::{
    aggregate_seeds, evaluate_episodes, ConfusionCounts, MetricReport, MetricSummary, SeedMetrics,
};
pub use score::{score_candidates, write_scores_tsv, ScoredCandidate};
pub use train::{
    evaluate, k_shot_sweep, train, train_all_seeds, validation_episodes, write_aggregate_csv,
    write_seed_rows_csv, SweepCell, TrainContext, TrainedModel, DROPOUT_SEED_SALT,
    SAMPLER_SEED_SALT, VAL_SEED_SALT,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Load(#[from] crate::corpus::LoadError),
    #[error(transparent)]
    Sample(#[from] crate::sampler::SampleError),
    #[error(transparent)]
    Head(#[from] crate::heads::HeadError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("seed {seed} was evaluated under a different configuration")]
    FingerprintMismatch { seed: u64 },
    #[error("{head} head scoring requires negative supports")]
    MissingNegativeSupports { head: &'static str },
}
